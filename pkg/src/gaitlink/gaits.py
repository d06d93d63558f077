"""Cyclic gait controllers for the planar hopper.

Each motion in the vocabulary gets an analytic controller: a Raibert-style
touchdown-angle law in flight and an energy-regulating thrust law in
stance.  Phase is normalized time since the last apex.  A damped-secant
search finds each gait's limit cycle (fixed point of the apex-to-apex
return map), and a stability test checks whether recent apexes sit inside
a band around that cycle.

The degenerate Stand gait has no cycle: it places the foot at the capture
point and bleeds energy toward the stance equilibrium.  A point foot has
no authority over the tipping mode, so a stand that drifts too fast
re-hops to replace its foot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .dynamics import (ControlCommand, EventKind, Mode, SimConfig, SimState,
                       StepEvent, Terrain, flight_state, mechanical_energy,
                       step)

# Stability band around the nominal apex.
EPS_H = 0.03    # m
EPS_V = 0.1     # m/s
STABLE_K = 3    # consecutive apexes required

# Standing gait: drift speed at which the corrective hop reaches full
# strength, and the extra hop height it pumps.  A point foot has no
# authority over the tipping mode, so a drifting stand can only catch
# itself by hopping to a fresh foothold.
STAND_REHOP_SPEED = 0.18   # m/s
STAND_REHOP_RAISE = 0.04   # m of extra apex height for the corrective hop


class NoCycleError(RuntimeError):
    """Limit-cycle search failed to converge; the gait spec is infeasible."""


@dataclass
class GaitSpec:
    """One motion-vocabulary entry: targets, gains, and its measured cycle."""

    id: str
    target_speed: float          # m/s at apex
    target_apex: float           # m apex height
    raibert_gain: float          # s, speed-error gain on foot placement
    thrust_gain: float           # dimensionless, energy-error gain on thrust
    speed_err_max: float = 0.5   # m/s, speed error fed to the placement gain
    standing: bool = False
    period: float | None = None              # s, measured cycle duration
    nominal_apex: tuple[float, float] | None = None  # measured (z, vx) at apex

    def to_dict(self) -> dict:
        return {
            "id": self.id, "target_speed": self.target_speed,
            "target_apex": self.target_apex, "raibert_gain": self.raibert_gain,
            "thrust_gain": self.thrust_gain,
            "speed_err_max": self.speed_err_max, "standing": self.standing,
            "period": self.period,
            "nominal_apex": list(self.nominal_apex) if self.nominal_apex else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GaitSpec":
        apex = d.get("nominal_apex")
        return cls(id=d["id"], target_speed=d["target_speed"],
                   target_apex=d["target_apex"], raibert_gain=d["raibert_gain"],
                   thrust_gain=d["thrust_gain"],
                   speed_err_max=d.get("speed_err_max", 0.5),
                   standing=d.get("standing", False),
                   period=d.get("period"),
                   nominal_apex=tuple(apex) if apex else None)


@dataclass(frozen=True)
class Directive:
    """Live control directive; None fields fall back to the gait's targets."""

    target_speed: float | None = None


@dataclass(slots=True, frozen=True)
class ControllerClock:
    phase: float = 0.0            # in [0, 1)
    time_since_apex: float = 0.0  # s


def default_gaits() -> dict[str, GaitSpec]:
    """The default motion vocabulary (cycles not yet measured)."""
    specs = [
        GaitSpec("Trot", target_speed=1.5, target_apex=1.05,
                 raibert_gain=0.30, thrust_gain=30.0, speed_err_max=0.3),
        GaitSpec("Pace", target_speed=1.0, target_apex=1.06,
                 raibert_gain=0.25, thrust_gain=30.0, speed_err_max=0.3),
        GaitSpec("Canter", target_speed=3.0, target_apex=1.10,
                 raibert_gain=0.12, thrust_gain=30.0, speed_err_max=0.6),
        GaitSpec("Jump", target_speed=1.5, target_apex=1.70,
                 raibert_gain=0.10, thrust_gain=30.0, speed_err_max=1.2),
        GaitSpec("Stand", target_speed=0.0, target_apex=1.0,
                 raibert_gain=0.13, thrust_gain=15.0, speed_err_max=0.3,
                 standing=True),
    ]
    return {g.id: g for g in specs}


def stand_equilibrium(cfg: SimConfig) -> float:
    """Leg length (= height) at which spring force balances gravity."""
    return cfg.rest_length - cfg.mass * cfg.gravity / cfg.stiffness


def target_energy(gait: GaitSpec, v_cmd: float, cfg: SimConfig) -> float:
    """Mechanical energy of the gait's nominal cycle at the commanded speed."""
    if gait.standing:
        z_eq = stand_equilibrium(cfg)
        c = cfg.rest_length - z_eq
        return cfg.mass * cfg.gravity * z_eq + 0.5 * cfg.stiffness * c * c
    return 0.5 * cfg.mass * v_cmd * v_cmd + cfg.mass * cfg.gravity * gait.target_apex


def control(gait: GaitSpec, state: SimState, clock: ControllerClock,
            directive: Directive | None, cfg: SimConfig) -> ControlCommand:
    """Compute the actuator command for one step.

    Flight: touchdown angle from foot offset vx*Ts/2 + kv*(vx - v*),
    Ts = pi*sqrt(m/k).  Stance: thrust u = kE*(E* - E)/l0 along the leg,
    applied only while the leg extends.  Commands are clamped to actuator
    limits.
    """
    v_cmd = gait.target_speed
    if directive is not None and directive.target_speed is not None:
        v_cmd = directive.target_speed

    if state.mode is Mode.FLIGHT:
        ts = math.pi * math.sqrt(cfg.mass / cfg.stiffness)
        # the speed error is bounded before it reaches the placement gain:
        # an unbounded error (e.g. right after a cross-speed switch) would
        # command a touchdown angle steep enough to stall the vault
        err = state.vx - v_cmd
        if err > gait.speed_err_max:
            err = gait.speed_err_max
        elif err < -gait.speed_err_max:
            err = -gait.speed_err_max
        offset = state.vx * ts * 0.5 + gait.raibert_gain * err
        ratio = offset / cfg.rest_length
        if ratio > 0.9:
            ratio = 0.9
        elif ratio < -0.9:
            ratio = -0.9
        return ControlCommand(thrust=0.0, touchdown_angle=math.asin(ratio))

    # Stance: energy regulation while the leg extends.
    e_star = target_energy(gait, v_cmd, cfg)
    if gait.standing:
        # corrective hop, blended in smoothly with drift speed
        r = abs(state.vx) / STAND_REHOP_SPEED
        if r > 1.0:
            r = 1.0
        boost = cfg.mass * cfg.gravity * STAND_REHOP_RAISE \
            + 0.5 * cfg.mass * state.vx * state.vx
        e_star += boost * r * r
    lx = state.x - state.foot_x
    lz = state.z - state.foot_z
    l = math.sqrt(lx * lx + lz * lz)
    extending = (lx * state.vx + lz * state.vz) > 0.0
    u = 0.0
    if extending:
        e = mechanical_energy(state, cfg)
        u = gait.thrust_gain * (e_star - e) / cfg.rest_length
        if u > cfg.thrust_max:
            u = cfg.thrust_max
        elif u < -cfg.thrust_max:
            u = -cfg.thrust_max
    return ControlCommand(thrust=u, touchdown_angle=0.0)


def advance_clock(clock: ControllerClock, event: StepEvent, gait: GaitSpec,
                  dt: float) -> ControllerClock:
    """Advance the phase clock by dt; apex events reset it to zero."""
    if gait.standing:
        return ControllerClock(0.0, 0.0)
    if event.kind is EventKind.APEX:
        return ControllerClock(0.0, 0.0)
    tsa = clock.time_since_apex + dt
    period = gait.period if gait.period else 1.0
    return ControllerClock((tsa / period) % 1.0, tsa)


def is_stable(apex_history: list[tuple[float, float]], gait: GaitSpec,
              eps_h: float = EPS_H, eps_v: float = EPS_V, k: int = STABLE_K,
              quiet_seconds: float | None = None) -> bool:
    """True when the gait has settled.

    Non-standing: the last k apexes all lie within (eps_h, eps_v) of the
    nominal apex.  Standing: the state has stayed within (eps_h, eps_v) of
    the stance equilibrium continuously for k*0.5 seconds (the caller
    tracks that duration and passes it as quiet_seconds).
    """
    if gait.standing:
        return quiet_seconds is not None and quiet_seconds >= k * 0.5
    if gait.nominal_apex is None:
        raise ValueError(f"gait {gait.id} has no measured cycle")
    if len(apex_history) < k:
        return False
    z_n, v_n = gait.nominal_apex
    for z, v in apex_history[-k:]:
        if abs(z - z_n) > eps_h or abs(v - v_n) > eps_v:
            return False
    return True


def apex_state(z: float, vx: float, t: float = 0.0, x: float = 0.0) -> SimState:
    return flight_state(t, x, z, vx, 0.0)


def run_to_apex(gait: GaitSpec, state: SimState, clock: ControllerClock,
                cfg: SimConfig, terrain: Terrain,
                directive: Directive | None = None,
                max_time: float = 5.0) -> tuple[SimState, ControllerClock] | None:
    """Simulate under the gait controller until the next apex event.

    Returns None if the character falls or no apex occurs within max_time.
    """
    t_end = state.t + max_time
    while state.t < t_end:
        cmd = control(gait, state, clock, directive, cfg)
        new_state, ev = step(state, cmd, cfg, terrain)
        clock = advance_clock(clock, ev, gait, new_state.t - state.t)
        state = new_state
        if ev.kind is EventKind.FALL:
            return None
        if ev.kind is EventKind.APEX:
            return state, clock
    return None


def apex_return_map(gait: GaitSpec, apex: tuple[float, float], cfg: SimConfig,
                    terrain: Terrain) -> tuple[tuple[float, float], float] | None:
    """One cycle of the gait: apex (z, vx) -> next apex (z, vx) and its duration."""
    state = apex_state(apex[0], apex[1])
    out = run_to_apex(gait, state, ControllerClock(), cfg, terrain)
    if out is None:
        return None
    s, _ = out
    return (s.z, s.vx), s.t


def find_limit_cycle(gait: GaitSpec, cfg: SimConfig,
                     terrain: Terrain | None = None,
                     tol: float = 1e-3, max_iter: int = 100) -> tuple[tuple[float, float], float]:
    """Find the fixed point of the apex return map by damped secant iteration.

    Starts from the analytic guess (target_apex, target_speed).  Returns
    the apex fixed point and the cycle period; raises NoCycleError if the
    residual does not drop below tol within max_iter iterations.
    """
    if gait.standing:
        raise ValueError("standing gaits have no cycle")
    if terrain is None:
        terrain = Terrain()

    p = (gait.target_apex, gait.target_speed)
    # Damped fixed-point sweep with a secant (Broyden) refinement: the
    # return map of a stable gait is contractive, so the damped sweep
    # closes in and the secant step polishes the fixed point.
    lam = 0.7
    prev_p = None
    prev_g = None
    for _ in range(max_iter):
        out = apex_return_map(gait, p, cfg, terrain)
        if out is None:
            # fell: retreat halfway toward the analytic guess
            p = (0.5 * (p[0] + gait.target_apex), 0.5 * (p[1] + gait.target_speed))
            prev_p = prev_g = None
            continue
        (z1, v1), period = out
        g = (z1 - p[0], v1 - p[1])
        if math.hypot(g[0], g[1]) < tol:
            return (p[0], p[1]), period
        if prev_g is not None:
            # component-wise secant step where the residual moved
            nz = p[0] - lam * g[0] * (p[0] - prev_p[0]) / (g[0] - prev_g[0]) \
                if g[0] != prev_g[0] else p[0] + lam * g[0]
            nv = p[1] - lam * g[1] * (p[1] - prev_p[1]) / (g[1] - prev_g[1]) \
                if g[1] != prev_g[1] else p[1] + lam * g[1]
            new_p = (nz, nv)
        else:
            new_p = (p[0] + lam * g[0], p[1] + lam * g[1])
        prev_p, prev_g = p, g
        p = new_p
    raise NoCycleError(f"no limit cycle for gait {gait.id} within {max_iter} iterations")


def measure_gaits(gaits: dict[str, GaitSpec], cfg: SimConfig,
                  terrain: Terrain | None = None) -> dict[str, GaitSpec]:
    """Return a copy of the vocabulary with limit cycles measured.

    Standing gaits get their stance equilibrium as the nominal state and
    no period.
    """
    out = {}
    for name, gait in gaits.items():
        if gait.standing:
            out[name] = replace(gait, period=None,
                                nominal_apex=(stand_equilibrium(cfg), 0.0))
        else:
            apex, period = find_limit_cycle(gait, cfg, terrain)
            out[name] = replace(gait, period=period, nominal_apex=apex)
    return out


def stand_state(cfg: SimConfig, x: float = 0.0, t: float = 0.0) -> SimState:
    """The standing gait's equilibrium state: at rest on a settled spring."""
    z_eq = stand_equilibrium(cfg)
    return SimState(t, x, z_eq, 0.0, 0.0, Mode.STANCE,
                    foot_x=x, foot_z=0.0, apex_t=t, apex_z=z_eq, apex_vx=0.0)
