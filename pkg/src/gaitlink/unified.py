"""The unified controller.

Owns the active gait controller, accepts motion requests, asks the tensor
for the best upcoming switch window, fires the switch when the clock
reaches it, and measures the live transition with the same recorder the
tensor population uses.  With no pending request its trajectory is
bit-identical to running the bare gait controller.
"""

from __future__ import annotations

from dataclasses import dataclass

from .dynamics import EventKind, SimConfig, SimState, Terrain, step
from .gaits import (ControllerClock, Directive, GaitSpec, advance_clock,
                    apex_state, control, stand_state)
from .measurement import TransitionOutcome, TransitionRecorder
from .tensor import (NoViableTransitionError, QualityQueryResult,
                     TransitionTensor)


@dataclass
class PendingPlan:
    target: str
    plan: QualityQueryResult


class UnifiedController:
    """Single-owner runtime around one simulated character.

    Commands arrive through ``request_motion`` between ticks; ``tick``
    advances one integrator step and performs at most one state change
    (switch, measurement update) at its boundary.
    """

    def __init__(self, gaits: dict[str, GaitSpec], cfg: SimConfig,
                 terrain: Terrain, tensor: TransitionTensor | None = None,
                 active: str = "Trot", state: SimState | None = None,
                 clock: ControllerClock | None = None,
                 directive: Directive | None = None,
                 horizon: float = 1.0, wait_discount: float = 0.0):
        if tensor is not None:
            tensor.require_config(cfg, gaits)
        self.gaits = gaits
        self.cfg = cfg
        self.terrain = terrain
        self.tensor = tensor
        self.active = active
        self.directive = directive
        self.horizon = horizon
        self.wait_discount = wait_discount
        self.state = state if state is not None else self._home_state(active)
        self.clock = clock if clock is not None else ControllerClock()
        self.pending: PendingPlan | None = None
        self.deferred_target: str | None = None
        self.recorder: TransitionRecorder | None = None
        self.last_outcome: TransitionOutcome | None = None

    def _home_state(self, motion: str, t: float = 0.0, x: float = 0.0) -> SimState:
        gait = self.gaits[motion]
        if gait.standing:
            return stand_state(self.cfg, x=x, t=t)
        if gait.nominal_apex is None:
            raise ValueError(f"gait {motion} has no measured cycle")
        return apex_state(gait.nominal_apex[0], gait.nominal_apex[1], t=t, x=x)

    @property
    def measuring(self) -> bool:
        return self.recorder is not None

    def reset(self) -> None:
        """Restore the character onto the active gait's limit cycle."""
        self.state = self._home_state(self.active, t=self.state.t, x=self.state.x)
        self.clock = ControllerClock()
        self.pending = None
        self.deferred_target = None
        self.recorder = None

    def request_motion(self, target: str) -> QualityQueryResult | None:
        """Plan a switch to ``target``; a newer request replaces an older one.

        Requests issued mid-transition are deferred until the measurement
        finalizes.  Raises NoViableTransitionError (pending unchanged) when
        the tensor has no usable window for the pair.
        """
        if target not in self.gaits:
            raise KeyError(f"unknown motion {target!r}")
        if target == self.active:
            self.pending = None
            self.deferred_target = None
            return None
        if self.measuring:
            self.deferred_target = target
            return None
        if self.tensor is None:
            raise NoViableTransitionError("no tensor loaded")
        plan = self.tensor.query_best(self.active, self.clock.phase, target,
                                      horizon=self.horizon,
                                      wait_discount=self.wait_discount)
        self.pending = PendingPlan(target, plan)
        return plan

    def switch_now(self, target: str, omega: float | None = None) -> None:
        """Adopt ``target`` at the current tick boundary, bypassing the tensor.

        The destination clock is imposed at ``omega`` (default: the current
        phase).  Any in-flight measurement is abandoned.  This is the
        degenerate plan used by the immediate-switching baseline.
        """
        if target not in self.gaits:
            raise KeyError(f"unknown motion {target!r}")
        gait_to = self.gaits[target]
        if gait_to.standing:
            self.clock = ControllerClock(0.0, 0.0)
        else:
            om = (self.clock.phase if omega is None else omega) % 1.0
            self.clock = ControllerClock(om, om * gait_to.period)
        self.active = target
        self.pending = None
        self.deferred_target = None
        self.recorder = TransitionRecorder(gait_to, self.cfg, self.state.t,
                                           directive=self.directive)

    def _fire_switch(self, events: list[dict]) -> None:
        pend = self.pending
        gait_to = self.gaits[pend.target]
        if gait_to.standing:
            self.clock = ControllerClock(0.0, 0.0)
        else:
            omega = pend.plan.omega
            self.clock = ControllerClock(omega, omega * gait_to.period)
        self.active = pend.target
        self.pending = None
        self.recorder = TransitionRecorder(gait_to, self.cfg, self.state.t,
                                           directive=self.directive)
        events.append({"kind": "switch", "t": self.state.t,
                       "motion": self.active,
                       "phi_bin": pend.plan.phi_bin,
                       "omega_bin": pend.plan.omega_bin})

    def tick(self) -> list[dict]:
        """Advance one step under the active controller."""
        gait = self.gaits[self.active]
        cmd = control(gait, self.state, self.clock, self.directive, self.cfg)
        new, ev = step(self.state, cmd, self.cfg, self.terrain)
        prev = self.state
        prev_phase = self.clock.phase
        self.clock = advance_clock(self.clock, ev, gait, new.t - prev.t)
        self.state = new

        events: list[dict] = []
        if ev.kind is not EventKind.NONE:
            events.append({"kind": ev.kind.value, "t": ev.t_event})

        if self.recorder is not None:
            if self.recorder.observe(prev, new, ev, cmd):
                self.last_outcome = self.recorder.outcome
                self.recorder = None
                o = self.last_outcome
                events.append({"kind": "transition_done", "t": new.t,
                               "eta": o.eta, "duration": o.duration,
                               "effort": o.effort, "accuracy": o.accuracy})
                if self.deferred_target is not None and new.alive:
                    target, self.deferred_target = self.deferred_target, None
                    try:
                        self.request_motion(target)
                    except NoViableTransitionError as exc:
                        events.append({"kind": "request_failed",
                                       "t": new.t, "error": str(exc)})
        elif self.pending is not None and new.alive:
            phi_star = self.pending.plan.switch_phase
            if gait.standing:
                fire = True
            elif ev.kind is EventKind.APEX:
                # the cycle ended early: a window in the skipped tail fires now
                fire = prev_phase < phi_star
            else:
                fire = prev_phase < phi_star <= self.clock.phase
            if fire:
                self._fire_switch(events)

        return events


def run_passthrough(gaits: dict[str, GaitSpec], cfg: SimConfig,
                    terrain: Terrain, active: str, state: SimState,
                    clock: ControllerClock, steps: int) -> tuple[SimState, ControllerClock]:
    """The bare gait-controller loop the unified controller must match."""
    gait = gaits[active]
    for _ in range(steps):
        cmd = control(gait, state, clock, None, cfg)
        new, ev = step(state, cmd, cfg, terrain)
        clock = advance_clock(clock, ev, gait, new.t - state.t)
        state = new
        if not state.alive:
            break
    return state, clock
