"""Live steering service.

Hosts one simulation driven by the unified controller, streams state
frames over a WebSocket at a fixed wall-clock rate (simulation paced to
real time through a timescale knob), accepts steering commands, and
serves quality grids for the UI heatmap.

Concurrency: the simulation thread is the sole writer of simulation
state.  Commands from any client go into a queue that the loop drains at
tick boundaries, so no frame ever reflects a half-applied command; the
acknowledgement for a command is queued to its sender before the next
frame is broadcast.
"""

from __future__ import annotations

import asyncio
import hashlib
import itertools
import json
import threading
import time
from collections import deque
from contextlib import asynccontextmanager

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse

from .dynamics import Mode, SimConfig, Terrain
from .gaits import GaitSpec
from .tensor import (ConfigMismatchError, EmptyNeighborhoodError,
                     NoViableTransitionError, TransitionTensor)
from .unified import UnifiedController

PROTOCOL_VERSION = 1
FRAME_RATE = 60.0
CONTROL_COMMANDS = ("pause", "resume", "reset", "set_timescale")


class PortInUseError(RuntimeError):
    pass


def terrain_digest(terrain: Terrain) -> str:
    doc = json.dumps(terrain.to_dict(), sort_keys=True)
    return hashlib.sha256(doc.encode()).hexdigest()[:16]


class SteeringLoop:
    """The simulation loop and its command queue."""

    def __init__(self, cfg: SimConfig, gaits: dict[str, GaitSpec],
                 tensor: TransitionTensor, terrain: Terrain | None = None,
                 timescale: float = 1.0, frame_rate: float = FRAME_RATE,
                 active: str = "Trot"):
        tensor.require_config(cfg, gaits)
        self.cfg = cfg
        self.gaits = gaits
        self.tensor = tensor
        self.terrain = terrain if terrain is not None else Terrain()
        self.timescale = timescale
        self.frame_rate = frame_rate
        self.controller = UnifiedController(gaits, cfg, self.terrain,
                                            tensor=tensor, active=active)
        self.paused = False
        self.commands: deque = deque()       # (client_id, dict)
        self.deferred: deque = deque()       # held while paused
        self.clients: dict[int, asyncio.Queue] = {}
        self.aio_loop: asyncio.AbstractEventLoop | None = None
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._ids = itertools.count(1)
        self._terrain_digest = terrain_digest(self.terrain)
        self.frame_count = 0

    # ---- client plumbing (called from the async side) ----

    def attach(self) -> tuple[int, asyncio.Queue]:
        cid = next(self._ids)
        q: asyncio.Queue = asyncio.Queue(maxsize=256)
        self.clients[cid] = q
        return cid, q

    def detach(self, cid: int) -> None:
        self.clients.pop(cid, None)

    def submit(self, cid: int, cmd: dict) -> None:
        self.commands.append((cid, cmd))

    def hello(self) -> dict:
        return {"type": "hello", "protocol": PROTOCOL_VERSION,
                "vocabulary": sorted(self.gaits),
                "bins": self.tensor.bins,
                "terrain": self.terrain.to_dict(),
                "timescale": self.timescale,
                "frame_rate": self.frame_rate}

    # ---- simulation side ----

    def _send(self, cid: int, payload: dict) -> None:
        q = self.clients.get(cid)
        if q is None or self.aio_loop is None:
            return
        text = json.dumps(payload)
        def put() -> None:
            if q.full():
                try:
                    q.get_nowait()  # drop the oldest frame for a slow client
                except asyncio.QueueEmpty:
                    pass
            q.put_nowait(text)
        self.aio_loop.call_soon_threadsafe(put)

    def _broadcast(self, payload: dict) -> None:
        for cid in list(self.clients):
            self._send(cid, payload)

    def _ack(self, cid: int, cmd: dict, **extra) -> None:
        self._send(cid, {"type": "ack", "cmd": cmd.get("type"), "ok": True, **extra})

    def _err(self, cid: int, cmd, code: str, message: str) -> None:
        self._send(cid, {"type": "error", "cmd": cmd.get("type") if isinstance(cmd, dict) else None,
                         "code": code, "message": message})

    def _apply(self, cid: int, cmd: dict) -> None:
        kind = cmd.get("type")
        c = self.controller
        try:
            if kind == "set_motion":
                motion = cmd.get("motion")
                if motion not in self.gaits:
                    self._err(cid, cmd, "UnknownCommand", f"unknown motion {motion!r}")
                    return
                plan = c.request_motion(motion)
                extra = {}
                if plan is not None:
                    extra = {"plan": {"phi_bin": plan.phi_bin,
                                      "omega_bin": plan.omega_bin,
                                      "quality": plan.quality,
                                      "wait_time": plan.wait_time}}
                self._ack(cid, cmd, **extra)
            elif kind == "perturb":
                dvx = float(cmd.get("dvx", 0.0))
                dvz = float(cmd.get("dvz", 0.0))
                c.state.vx += dvx
                c.state.vz += dvz
                self._ack(cid, cmd)
            elif kind == "reset":
                c.reset()
                self._ack(cid, cmd)
            elif kind == "pause":
                self.paused = True
                self._ack(cid, cmd)
            elif kind == "resume":
                self.paused = False
                self._ack(cid, cmd)
            elif kind == "set_timescale":
                value = float(cmd["value"])
                if not 0.0 < value <= 100.0:
                    raise ValueError("timescale out of range")
                self.timescale = value
                self._ack(cid, cmd)
            else:
                self._err(cid, cmd, "UnknownCommand", f"unknown command {kind!r}")
        except NoViableTransitionError as exc:
            self._err(cid, cmd, "NoViableTransition", str(exc))
        except (TypeError, ValueError, KeyError) as exc:
            self._err(cid, cmd, "BadPayload", str(exc))

    def _drain(self) -> None:
        # control commands always apply; steering commands wait out a pause
        pending = self.deferred
        self.deferred = deque()
        while self.commands:
            pending.append(self.commands.popleft())
        for cid, cmd in pending:
            kind = cmd.get("type") if isinstance(cmd, dict) else None
            if self.paused and kind not in CONTROL_COMMANDS:
                self.deferred.append((cid, cmd))
                continue
            self._apply(cid, cmd)

    def frame(self) -> dict:
        c = self.controller
        s = c.state
        pending = None
        if c.pending is not None:
            pending = {"target": c.pending.target,
                       "phi_bin": c.pending.plan.phi_bin,
                       "omega_bin": c.pending.plan.omega_bin,
                       "quality": c.pending.plan.quality}
        return {"type": "frame", "t": s.t, "x": s.x, "z": s.z,
                "vx": s.vx, "vz": s.vz, "mode": s.mode.value,
                "foot_x": s.foot_x if s.mode is Mode.STANCE else None,
                "motion": c.active, "phase": c.clock.phase,
                "alive": s.alive, "measuring": c.measuring,
                "pending": pending, "terrain_digest": self._terrain_digest}

    def run(self) -> None:
        frame_dt = 1.0 / self.frame_rate
        next_frame = time.monotonic()
        last = next_frame
        while not self._stop.is_set():
            now = time.monotonic()
            wall_dt = now - last
            last = now
            self._drain()
            if not self.paused and self.controller.state.alive:
                # cap the catch-up burst so a stall cannot freeze the loop
                budget = min(wall_dt * self.timescale, 0.25)
                t_end = self.controller.state.t + budget
                while self.controller.state.t < t_end and self.controller.state.alive:
                    self.controller.tick()
            self._broadcast(self.frame())
            self.frame_count += 1
            next_frame += frame_dt
            sleep = next_frame - time.monotonic()
            if sleep > 0:
                self._stop.wait(sleep)
            else:
                next_frame = time.monotonic()

    def start(self) -> None:
        self.aio_loop = asyncio.get_running_loop()
        self._stop = threading.Event()  # re-armed so the app can restart
        self._thread = threading.Thread(target=self.run, daemon=True,
                                        name="steering-loop")
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)


def create_app(cfg: SimConfig, gaits: dict[str, GaitSpec],
               tensor: TransitionTensor, terrain: Terrain | None = None,
               timescale: float = 1.0, frame_rate: float = FRAME_RATE) -> FastAPI:
    loop = SteeringLoop(cfg, gaits, tensor, terrain=terrain,
                        timescale=timescale, frame_rate=frame_rate)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        loop.start()
        try:
            yield
        finally:
            loop.stop()

    app = FastAPI(lifespan=lifespan)
    app.state.loop = loop

    @app.get("/quality_grid")
    async def quality_grid(m: str, n: str):
        if (m, n) not in loop.tensor.cells:
            return JSONResponse({"error": f"pair {m}->{n} not populated"},
                                status_code=404)
        return {"m": m, "n": n, "bins": loop.tensor.bins,
                "q": loop.tensor.quality_grid(m, n)}

    @app.websocket("/ws")
    async def ws(sock: WebSocket):
        await sock.accept()
        cid, queue = loop.attach()
        await sock.send_text(json.dumps(loop.hello()))

        async def pump_out():
            while True:
                await sock.send_text(await queue.get())

        async def pump_in():
            while True:
                raw = await sock.receive_text()
                try:
                    cmd = json.loads(raw)
                    if not isinstance(cmd, dict):
                        raise ValueError("command must be a JSON object")
                except ValueError as exc:
                    loop._send(cid, {"type": "error", "cmd": None,
                                     "code": "BadPayload", "message": str(exc)})
                    continue
                loop.submit(cid, cmd)

        out_task = asyncio.create_task(pump_out())
        in_task = asyncio.create_task(pump_in())
        try:
            done, pending = await asyncio.wait(
                {out_task, in_task}, return_when=asyncio.FIRST_COMPLETED)
            for t in pending:
                t.cancel()
            for t in done:
                exc = t.exception()
                if exc is not None and not isinstance(
                        exc, (WebSocketDisconnect, RuntimeError)):
                    raise exc
        except WebSocketDisconnect:
            pass
        finally:
            loop.detach(cid)

    return app


def serve(cfg: SimConfig, gaits: dict[str, GaitSpec], tensor: TransitionTensor,
          port: int, terrain: Terrain | None = None,
          timescale: float = 1.0) -> None:
    """Run the service until terminated; raises PortInUseError if bound."""
    import uvicorn
    app = create_app(cfg, gaits, tensor, terrain=terrain, timescale=timescale)
    try:
        uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
    except OSError as exc:
        if exc.errno == 98:
            raise PortInUseError(f"port {port} is already in use") from exc
        raise
