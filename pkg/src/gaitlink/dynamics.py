"""Hybrid flight/stance dynamics of a planar spring-loaded point-mass hopper.

The character is a point mass on a massless telescoping spring leg over
piecewise-flat terrain with gaps.  Flight is ballistic (advanced in closed
form, exact up to roundoff); stance is a radial spring plus an actuator
thrust along the leg, integrated with fixed-step RK4.  Mode changes
(apex, touchdown, liftoff, fall) are located inside a step by bisection
to within ``event_tol`` and the state is advanced exactly to the event.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class Mode(Enum):
    FLIGHT = "flight"
    STANCE = "stance"


class EventKind(Enum):
    NONE = "none"
    APEX = "apex"
    TOUCHDOWN = "touchdown"
    LIFTOFF = "liftoff"
    FALL = "fall"


class NonFiniteError(RuntimeError):
    """Integration produced a non-finite state (controller or config bug)."""


@dataclass(frozen=True)
class SimConfig:
    """Physical constants and integrator settings for the hopper."""

    mass: float = 80.0           # kg
    gravity: float = 9.81        # m/s^2
    rest_length: float = 1.0     # m, telescoping leg rest length
    stiffness: float = 20000.0   # N/m
    dt: float = 1e-3             # s, integrator step
    event_tol: float = 1e-6      # s, event bisection tolerance
    z_min: float = 0.2           # m, below this the character has fallen
    l_min_frac: float = 0.5      # min leg length as a fraction of rest length
    v_back_max: float = 0.5      # m/s, max allowed backward speed
    thrust_max: float = 2400.0   # N, actuator force limit along the leg

    def validate(self) -> None:
        for name in ("mass", "gravity", "rest_length", "stiffness", "dt",
                     "event_tol", "z_min", "v_back_max", "thrust_max"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"SimConfig.{name} must be strictly positive")
        if not 0.0 < self.l_min_frac < 1.0:
            raise ValueError("SimConfig.l_min_frac must lie in (0, 1)")
        if not self.event_tol < self.dt:
            raise ValueError("SimConfig.event_tol must be smaller than dt")

    def to_dict(self) -> dict:
        return {
            "mass": self.mass, "gravity": self.gravity,
            "rest_length": self.rest_length, "stiffness": self.stiffness,
            "dt": self.dt, "event_tol": self.event_tol, "z_min": self.z_min,
            "l_min_frac": self.l_min_frac, "v_back_max": self.v_back_max,
            "thrust_max": self.thrust_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        cfg = cls(**d)
        cfg.validate()
        return cfg


@dataclass(frozen=True)
class Terrain:
    """Piecewise-flat ground: sorted (x_start, x_end, height) segments.

    Anything between segments is a gap; a foot strike over a gap is fatal.
    """

    segments: tuple[tuple[float, float, float], ...] = ((-1e9, 1e9, 0.0),)

    def validate(self) -> None:
        prev_end = -math.inf
        for x0, x1, _h in self.segments:
            if not x0 < x1:
                raise ValueError("terrain segment must have x_start < x_end")
            if x0 < prev_end:
                raise ValueError("terrain segments must be sorted and non-overlapping")
            prev_end = x1

    def probe(self, x: float) -> tuple[float, bool]:
        """Ground height at x and whether there is ground there.

        Over a gap the returned height is the level at which a descending
        foot counts as having struck (the higher adjacent segment), so the
        fall is detected at the instant the foot misses the ground.
        """
        segs = self.segments
        left_h = None
        for x0, x1, h in segs:
            if x < x0:
                return (h if left_h is None else max(left_h, h)), False
            if x < x1:
                return h, True
            left_h = h
        return (left_h if left_h is not None else 0.0), False

    def to_dict(self) -> dict:
        return {"segments": [list(s) for s in self.segments]}

    @classmethod
    def from_dict(cls, d: dict) -> "Terrain":
        t = cls(segments=tuple(tuple(float(v) for v in s) for s in d["segments"]))
        t.validate()
        return t


@dataclass(slots=True)
class SimState:
    """Full state of the hopper at an instant.

    ``leg_angle`` is meaningful in flight (angle of the leg from vertical,
    positive = foot ahead of the mass); ``foot_x``/``foot_z`` are the
    anchored foot position in stance.  ``apex_*`` records the most recent
    apex event.
    """

    t: float
    x: float
    z: float
    vx: float
    vz: float
    mode: Mode
    leg_angle: float = 0.0
    foot_x: float = 0.0
    foot_z: float = 0.0
    apex_t: float = 0.0
    apex_z: float = 0.0
    apex_vx: float = 0.0
    alive: bool = True

    def leg_length(self, cfg: SimConfig) -> float:
        if self.mode is Mode.STANCE:
            return math.hypot(self.x - self.foot_x, self.z - self.foot_z)
        return cfg.rest_length

    def copy(self) -> "SimState":
        return SimState(self.t, self.x, self.z, self.vx, self.vz, self.mode,
                        self.leg_angle, self.foot_x, self.foot_z,
                        self.apex_t, self.apex_z, self.apex_vx, self.alive)


@dataclass(slots=True)
class ControlCommand:
    thrust: float = 0.0           # N, along the leg, stance only
    touchdown_angle: float = 0.0  # rad, flight only


@dataclass(slots=True)
class StepEvent:
    kind: EventKind
    t_event: float


def flight_state(t: float, x: float, z: float, vx: float, vz: float,
                 leg_angle: float = 0.0) -> SimState:
    s = SimState(t, x, z, vx, vz, Mode.FLIGHT, leg_angle=leg_angle)
    s.apex_t, s.apex_z, s.apex_vx = t, z, vx
    return s


def mechanical_energy(state: SimState, cfg: SimConfig) -> float:
    """Kinetic + gravitational + (stance) spring potential energy, in J."""
    e = 0.5 * cfg.mass * (state.vx * state.vx + state.vz * state.vz) \
        + cfg.mass * cfg.gravity * state.z
    if state.mode is Mode.STANCE:
        c = cfg.rest_length - state.leg_length(cfg)
        e += 0.5 * cfg.stiffness * c * c
    return e


def _bisect(f, lo: float, hi: float, tol: float) -> float:
    # f(lo) > 0 (condition not yet met), f(hi) <= 0 (condition met);
    # returns the earliest time, within tol, at which the condition holds.
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return hi


def step(state: SimState, cmd: ControlCommand, cfg: SimConfig,
         terrain: Terrain) -> tuple[SimState, StepEvent]:
    """Advance one integrator step; stop exactly at a mode-change event.

    Deterministic: identical inputs produce bit-identical outputs.
    """
    if not state.alive:
        raise ValueError("cannot step a fallen character")
    if state.mode is Mode.FLIGHT:
        out = _step_flight(state, cmd, cfg, terrain)
    else:
        out = _step_stance(state, cmd, cfg, terrain)
    s = out[0]
    if not (math.isfinite(s.x) and math.isfinite(s.z)
            and math.isfinite(s.vx) and math.isfinite(s.vz)):
        raise NonFiniteError(f"non-finite state at t={state.t}")
    return out


def _step_flight(state: SimState, cmd: ControlCommand, cfg: SimConfig,
                 terrain: Terrain) -> tuple[SimState, StepEvent]:
    g = cfg.gravity
    l0 = cfg.rest_length
    dt = cfg.dt
    x0, z0, vx, vz0 = state.x, state.z, state.vx, state.vz
    theta = cmd.touchdown_angle
    if theta > 1.4:
        theta = 1.4
    elif theta < -1.4:
        theta = -1.4
    foot_dx = l0 * math.sin(theta)
    foot_dz = l0 * math.cos(theta)

    def z_at(tau: float) -> float:
        return z0 + vz0 * tau - 0.5 * g * tau * tau

    # Candidate events: earliest one inside (0, dt] wins.
    t_event = dt
    kind = EventKind.NONE

    z1 = z_at(dt)
    vz1 = vz0 - g * dt

    # Apex: vertical velocity crosses zero downward.
    if vz0 > 0.0 >= vz1:
        te = _bisect(lambda tau: vz0 - g * tau, 0.0, dt, cfg.event_tol)
        if te < t_event:
            t_event, kind = te, EventKind.APEX

    # Touchdown / foot strike: the descending foot reaches ground level.
    # The reference level follows the terrain under the moving foot.
    def foot_clearance(tau: float) -> float:
        h, _ = terrain.probe(x0 + vx * tau + foot_dx)
        return z_at(tau) - foot_dz - h

    if vz1 < 0.0:
        c0 = foot_clearance(0.0)
        c1 = foot_clearance(dt)
        if c0 > 0.0 >= c1:
            te = _bisect(foot_clearance, 0.0, dt, cfg.event_tol)
            if te < t_event and vz0 - g * te < 0.0:
                t_event, kind = te, EventKind.TOUCHDOWN
        elif c0 <= 0.0 and vz0 < 0.0:
            # Descending with the foot already at/below ground (e.g. the
            # commanded angle moved it there this step): immediate strike.
            t_event, kind = 0.0, EventKind.TOUCHDOWN

    # Fall: the mass itself drops below the minimum height.
    if z1 < cfg.z_min <= z0:
        te = _bisect(lambda tau: z_at(tau) - cfg.z_min, 0.0, dt, cfg.event_tol)
        if te < t_event:
            t_event, kind = te, EventKind.FALL
    elif z0 < cfg.z_min:
        t_event, kind = 0.0, EventKind.FALL

    tau = t_event
    s = SimState(state.t + tau, x0 + vx * tau, z_at(tau), vx, vz0 - g * tau,
                 Mode.FLIGHT, theta, 0.0, 0.0,
                 state.apex_t, state.apex_z, state.apex_vx)

    if kind is EventKind.NONE:
        return s, StepEvent(EventKind.NONE, s.t)
    if kind is EventKind.APEX:
        s.apex_t, s.apex_z, s.apex_vx = s.t, s.z, s.vx
        return s, StepEvent(EventKind.APEX, s.t)
    if kind is EventKind.TOUCHDOWN:
        fx = s.x + foot_dx
        h, on_ground = terrain.probe(fx)
        if not on_ground:
            s.alive = False
            return s, StepEvent(EventKind.FALL, s.t)
        s.mode = Mode.STANCE
        s.foot_x = fx
        s.foot_z = h
        return s, StepEvent(EventKind.TOUCHDOWN, s.t)
    s.alive = False
    return s, StepEvent(EventKind.FALL, s.t)


def _step_stance(state: SimState, cmd: ControlCommand, cfg: SimConfig,
                 terrain: Terrain) -> tuple[SimState, StepEvent]:
    m = cfg.mass
    g = cfg.gravity
    k = cfg.stiffness
    l0 = cfg.rest_length
    dt = cfg.dt
    u = cmd.thrust
    fx, fz = state.foot_x, state.foot_z
    x0, z0, vx0, vz0 = state.x, state.z, state.vx, state.vz

    def rk4(tau: float) -> tuple[float, float, float, float]:
        # One RK4 step of size tau for the stance ODE (thrust held constant).
        def acc(px: float, pz: float) -> tuple[float, float]:
            lx = px - fx
            lz = pz - fz
            l = math.sqrt(lx * lx + lz * lz)
            f = (k * (l0 - l) + u) / (m * l)
            return f * lx, f * lz - g

        ax1, az1 = acc(x0, z0)
        h2 = 0.5 * tau
        x2 = x0 + h2 * vx0
        z2 = z0 + h2 * vz0
        vx2 = vx0 + h2 * ax1
        vz2 = vz0 + h2 * az1
        ax2, az2 = acc(x2, z2)
        x3 = x0 + h2 * vx2
        z3 = z0 + h2 * vz2
        vx3 = vx0 + h2 * ax2
        vz3 = vz0 + h2 * az2
        ax3, az3 = acc(x3, z3)
        x4 = x0 + tau * vx3
        z4 = z0 + tau * vz3
        vx4 = vx0 + tau * ax3
        vz4 = vz0 + tau * az3
        ax4, az4 = acc(x4, z4)
        s6 = tau / 6.0
        return (x0 + s6 * (vx0 + 2.0 * (vx2 + vx3) + vx4),
                z0 + s6 * (vz0 + 2.0 * (vz2 + vz3) + vz4),
                vx0 + s6 * (ax1 + 2.0 * (ax2 + ax3) + ax4),
                vz0 + s6 * (az1 + 2.0 * (az2 + az3) + az4))

    x1, z1, vx1, vz1 = rk4(dt)

    lx0 = x0 - fx
    lz0 = z0 - fz
    l_start = math.sqrt(lx0 * lx0 + lz0 * lz0)
    lx1 = x1 - fx
    lz1 = z1 - fz
    l_end = math.sqrt(lx1 * lx1 + lz1 * lz1)
    l_min = cfg.l_min_frac * l0

    t_event = dt
    kind = EventKind.NONE

    def leg_len(tau: float) -> float:
        px, pz, _, _ = rk4(tau)
        return math.hypot(px - fx, pz - fz)

    # Liftoff: leg length returns to rest length while extending.
    if l_start < l0 <= l_end:
        te = _bisect(lambda tau: l0 - leg_len(tau), 0.0, dt, cfg.event_tol)
        if te < t_event:
            t_event, kind = te, EventKind.LIFTOFF

    # Fall: leg over-compressed.
    if l_end < l_min <= l_start:
        te = _bisect(lambda tau: leg_len(tau) - l_min, 0.0, dt, cfg.event_tol)
        if te < t_event:
            t_event, kind = te, EventKind.FALL
    elif l_start < l_min:
        t_event, kind = 0.0, EventKind.FALL

    # Fall: mass below minimum height.
    if z1 < cfg.z_min <= z0:
        te = _bisect(lambda tau: rk4(tau)[1] - cfg.z_min, 0.0, dt, cfg.event_tol)
        if te < t_event:
            t_event, kind = te, EventKind.FALL
    elif z0 < cfg.z_min:
        t_event, kind = 0.0, EventKind.FALL

    # Fall: moving backward too fast.
    vb = -cfg.v_back_max
    if vx1 < vb <= vx0:
        te = _bisect(lambda tau: rk4(tau)[2] - vb, 0.0, dt, cfg.event_tol)
        if te < t_event:
            t_event, kind = te, EventKind.FALL
    elif vx0 < vb:
        t_event, kind = 0.0, EventKind.FALL

    if t_event < dt:
        x1, z1, vx1, vz1 = rk4(t_event)

    s = SimState(state.t + t_event, x1, z1, vx1, vz1, Mode.STANCE,
                 state.leg_angle, fx, fz,
                 state.apex_t, state.apex_z, state.apex_vx)

    if kind is EventKind.NONE:
        return s, StepEvent(EventKind.NONE, s.t)
    if kind is EventKind.LIFTOFF:
        s.mode = Mode.FLIGHT
        s.leg_angle = cmd.touchdown_angle
        s.foot_x = 0.0
        s.foot_z = 0.0
        return s, StepEvent(EventKind.LIFTOFF, s.t)
    s.alive = False
    return s, StepEvent(EventKind.FALL, s.t)
