"""Transition outcome measurement.

A transition starts at the switch instant and ends when the destination
controller has stabilized; what happens in between is recorded as the
outcome (alive flag, duration, actuator effort, control accuracy).  Both
tensor population and the live unified controller feed their simulation
steps through the same recorder so that offline and online measurements
agree exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .dynamics import (ControlCommand, EventKind, Mode, SimConfig, SimState,
                       StepEvent, Terrain, step)
from .gaits import (EPS_H, EPS_V, STABLE_K, ControllerClock, Directive,
                    GaitSpec, advance_clock, apex_state, control, is_stable,
                    stand_equilibrium, stand_state)

T_MAX = 5.0          # s, stabilization timeout after the switch
SIGMA_V = 0.5        # m/s, width of the per-step speed-tracking reward
ALPHA_WINDOW_STAND = 0.5  # s, accuracy window for the cycle-less standing gait


@dataclass(frozen=True)
class TransitionOutcome:
    """One trial's outcome: alive flag, duration, effort, accuracy."""

    eta: int          # 1 = stabilized, 0 = fell or timed out
    duration: float   # s, switch -> stabilization (or failure)
    effort: float     # J, |thrust * leg-length rate| integrated over the transition
    accuracy: float   # mean speed-tracking reward over the first cycle after stabilization


class TransitionRecorder:
    """Accumulates one transition's outcome from simulation steps.

    Feed every step taken under the destination controller through
    ``observe``; it returns True once the outcome is final.
    """

    def __init__(self, gait_to: GaitSpec, cfg: SimConfig, t_switch: float,
                 directive: Directive | None = None,
                 eps_h: float = EPS_H, eps_v: float = EPS_V, k: int = STABLE_K,
                 t_max: float = T_MAX, sigma_v: float = SIGMA_V):
        self.gait = gait_to
        self.cfg = cfg
        self.t_switch = t_switch
        self.eps_h = eps_h
        self.eps_v = eps_v
        self.k = k
        self.t_max = t_max
        self.sigma_v = sigma_v
        self.v_cmd = gait_to.target_speed
        if directive is not None and directive.target_speed is not None:
            self.v_cmd = directive.target_speed
        self.apex_history: list[tuple[float, float]] = []
        self.effort = 0.0
        self.quiet = 0.0
        self.t_stable: float | None = None
        self.alpha_acc = 0.0
        self.alpha_time = 0.0
        if gait_to.standing:
            self.alpha_window = ALPHA_WINDOW_STAND
            self.z_eq = stand_equilibrium(cfg)
        else:
            if gait_to.period is None:
                raise ValueError(f"gait {gait_to.id} has no measured cycle")
            self.alpha_window = gait_to.period
        self.outcome: TransitionOutcome | None = None

    def _finish_dead(self, t_now: float) -> bool:
        dt = self.t_stable - self.t_switch if self.t_stable is not None \
            else t_now - self.t_switch
        self.outcome = TransitionOutcome(0, dt, self.effort, 0.0)
        return True

    def observe(self, prev: SimState, new: SimState, event: StepEvent,
                cmd: ControlCommand) -> bool:
        """Record one step; returns True when the outcome is final."""
        if self.outcome is not None:
            return True
        dt = new.t - prev.t

        if event.kind is EventKind.FALL:
            return self._finish_dead(new.t)

        if self.t_stable is None:
            # actuator work only counts while the leg is on the ground
            if prev.mode is Mode.STANCE:
                l_prev = prev.leg_length(self.cfg)
                l_new = new.leg_length(self.cfg)
                self.effort += abs(cmd.thrust * (l_new - l_prev))

            if self.gait.standing:
                in_band = (abs(new.vx) < self.eps_v
                           and abs(new.z - self.z_eq) < self.eps_h)
                self.quiet = self.quiet + dt if in_band else 0.0
                if is_stable([], self.gait, self.eps_h, self.eps_v, self.k,
                             quiet_seconds=self.quiet):
                    self.t_stable = new.t
            elif event.kind is EventKind.APEX:
                self.apex_history.append((new.z, new.vx))
                if is_stable(self.apex_history, self.gait,
                             self.eps_h, self.eps_v, self.k):
                    self.t_stable = new.t

            if self.t_stable is None and new.t - self.t_switch >= self.t_max:
                return self._finish_dead(new.t)
            return False

        # stabilized: measure accuracy over one nominal cycle
        dv = new.vx - self.v_cmd
        self.alpha_acc += math.exp(-dv * dv / (2.0 * self.sigma_v * self.sigma_v)) * dt
        self.alpha_time += dt
        if self.alpha_time >= self.alpha_window:
            alpha = self.alpha_acc / self.alpha_time
            self.outcome = TransitionOutcome(
                1, self.t_stable - self.t_switch, self.effort, alpha)
            return True
        return False


def perturbed_start(gait: GaitSpec, cfg: SimConfig, sigma: float,
                    xi_z: float, xi_v: float) -> SimState:
    """The gait's nominal state with relative noise on apex height and speed."""
    if gait.nominal_apex is None:
        raise ValueError(f"gait {gait.id} has no measured cycle")
    z_n, v_n = gait.nominal_apex
    if gait.standing:
        s = stand_state(cfg)
        s.z = z_n * (1.0 + sigma * xi_z)
        return s
    return apex_state(z_n * (1.0 + sigma * xi_z), v_n * (1.0 + sigma * xi_v))


def run_transition_trial(gait_from: GaitSpec, gait_to: GaitSpec,
                         phi: float, omega: float, cfg: SimConfig,
                         terrain: Terrain, sigma: float = 0.0,
                         xi_z: float = 0.0, xi_v: float = 0.0,
                         t_max: float = T_MAX,
                         sigma_v: float = SIGMA_V) -> TransitionOutcome:
    """One population trial.

    Places the character on the source gait's cycle advanced to phase
    ``phi`` (apex perturbed by relative noise sigma), switches to the
    destination gait with its clock imposed at phase ``omega``, and
    measures the outcome.
    """
    state = perturbed_start(gait_from, cfg, sigma, xi_z, xi_v)
    clock = ControllerClock()

    # advance the source to the requested phase (standing sources sit at 0)
    if not gait_from.standing and phi > 0.0:
        t_target = state.t + phi * gait_from.period
        while state.t < t_target:
            cmd = control(gait_from, state, clock, None, cfg)
            new, ev = step(state, cmd, cfg, terrain)
            clock = advance_clock(clock, ev, gait_from, new.t - state.t)
            state = new
            if ev.kind is EventKind.FALL:
                # died before the switch: the transition never happened
                return TransitionOutcome(0, 0.0, 0.0, 0.0)

    # impose the destination phase and measure
    if gait_to.standing:
        clock = ControllerClock(0.0, 0.0)
    else:
        omega = omega % 1.0
        clock = ControllerClock(omega, omega * gait_to.period)
    recorder = TransitionRecorder(gait_to, cfg, state.t, t_max=t_max,
                                  sigma_v=sigma_v)
    deadline = state.t + t_max + recorder.alpha_window + 1.0
    while state.t < deadline:
        cmd = control(gait_to, state, clock, None, cfg)
        new, ev = step(state, cmd, cfg, terrain)
        clock = advance_clock(clock, ev, gait_to, new.t - state.t)
        done = recorder.observe(state, new, ev, cmd)
        state = new
        if done:
            return recorder.outcome
    raise RuntimeError("transition measurement did not terminate")
