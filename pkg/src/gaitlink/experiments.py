"""Evaluation harness: pairwise success tables, scoring ablations, switching
baselines, and the gap-jumping scenario.

All evaluations are paired: for a fixed seed, every strategy sees
bit-identical initial conditions per trial, so strategy comparisons are
free of sampling luck.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import EventKind, Mode, SimConfig, SimState, Terrain, step
from .gaits import (EPS_H, EPS_V, ControllerClock, GaitSpec, advance_clock,
                    control)
from .measurement import TransitionOutcome, perturbed_start
from .tensor import (NoViableTransitionError, QualityQueryResult,
                     TransitionTensor, _gait_digest)
from .unified import PendingPlan, UnifiedController

STRATEGIES = ("tmt", "outcome_only", "stability_only", "random_phase",
              "immediate", "pose_distance")

_METRIC_FOR = {"tmt": "quality", "outcome_only": "outcome",
               "stability_only": "stability"}

POSE_MODE_PENALTY = 1e9


@dataclass
class PairStats:
    m: str
    n: str
    trials: int
    successes: int
    success_rate: float | None       # None (flagged) when trials == 0
    mean_duration: float | None      # means over successful trials
    mean_effort: float | None
    mean_accuracy: float | None


@dataclass
class EvalReport:
    strategy: str
    seed: int
    sigma: float
    trials_per_pair: int
    rows: list[PairStats] = field(default_factory=list)

    @property
    def flagged(self) -> bool:
        return any(r.success_rate is None for r in self.rows)

    def row(self, m: str, n: str) -> PairStats:
        for r in self.rows:
            if r.m == m and r.n == n:
                return r
        raise KeyError(f"no row for {m}->{n}")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh)
            wr.writerow(["strategy", "seed", "sigma", "trials_per_pair",
                         "m", "n", "trials", "successes", "success_rate",
                         "mean_duration", "mean_effort", "mean_accuracy"])
            for r in self.rows:
                wr.writerow([self.strategy, self.seed, repr(self.sigma),
                             self.trials_per_pair, r.m, r.n, r.trials,
                             r.successes,
                             "" if r.success_rate is None else repr(r.success_rate),
                             "" if r.mean_duration is None else repr(r.mean_duration),
                             "" if r.mean_effort is None else repr(r.mean_effort),
                             "" if r.mean_accuracy is None else repr(r.mean_accuracy)])

    @classmethod
    def from_csv(cls, path) -> "EvalReport":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError("empty report")
        first = rows[0]
        rep = cls(strategy=first["strategy"], seed=int(first["seed"]),
                  sigma=float(first["sigma"]),
                  trials_per_pair=int(first["trials_per_pair"]))
        for r in rows:
            rep.rows.append(PairStats(
                m=r["m"], n=r["n"], trials=int(r["trials"]),
                successes=int(r["successes"]),
                success_rate=float(r["success_rate"]) if r["success_rate"] else None,
                mean_duration=float(r["mean_duration"]) if r["mean_duration"] else None,
                mean_effort=float(r["mean_effort"]) if r["mean_effort"] else None,
                mean_accuracy=float(r["mean_accuracy"]) if r["mean_accuracy"] else None))
        return rep


def trial_initial_state(gaits: dict[str, GaitSpec], cfg: SimConfig,
                        terrain: Terrain, m: str, sigma: float,
                        rng: np.random.Generator
                        ) -> tuple[SimState, ControllerClock] | None:
    """Shared per-trial start: perturbed apex advanced to a random phase.

    Returns None if the perturbed character falls before reaching the
    phase (the trial then counts as failed for every strategy alike).
    """
    gait = gaits[m]
    xi = rng.standard_normal(2)
    phi0 = float(rng.uniform())
    state = perturbed_start(gait, cfg, sigma, float(xi[0]), float(xi[1]))
    clock = ControllerClock()
    if gait.standing:
        return state, clock
    t_target = state.t + phi0 * gait.period
    while state.t < t_target:
        cmd = control(gait, state, clock, None, cfg)
        new, ev = step(state, cmd, cfg, terrain)
        clock = advance_clock(clock, ev, gait, new.t - state.t)
        state = new
        if ev.kind is EventKind.FALL:
            return None
    return state, clock


def cycle_pose_table(gait: GaitSpec, cfg: SimConfig, terrain: Terrain,
                     bins: int) -> list[tuple[float, float, Mode]]:
    """(z, vx, mode) snapshots of the nominal cycle at each phase-bin center."""
    if gait.standing:
        from .gaits import stand_equilibrium
        return [(stand_equilibrium(cfg), 0.0, Mode.STANCE)] * bins
    state = perturbed_start(gait, cfg, 0.0, 0.0, 0.0)
    clock = ControllerClock()
    table = []
    for b in range(bins):
        t_target = (b + 0.5) / bins * gait.period
        while state.t < t_target:
            cmd = control(gait, state, clock, None, cfg)
            new, ev = step(state, cmd, cfg, terrain)
            clock = advance_clock(clock, ev, gait, new.t - state.t)
            state = new
        table.append((state.z, state.vx, state.mode))
    return table


def pose_distance_plan(table_m: list, table_n: list, bins: int) -> tuple[int, int]:
    """Switch where the source pose is nearest to some destination pose."""
    best = (0, 0)
    best_d = math.inf
    for pb in range(bins):
        z_m, v_m, mode_m = table_m[pb]
        for ob in range(bins):
            z_n, v_n, mode_n = table_n[ob]
            d = math.hypot((z_m - z_n) / EPS_H, (v_m - v_n) / EPS_V)
            if mode_m is not mode_n:
                d += POSE_MODE_PENALTY
            if d < best_d:
                best_d = d
                best = (pb, ob)
    return best


def _plan_for(strategy: str, tensor: TransitionTensor, m: str, n: str,
              phi_now: float, rng_strat: np.random.Generator,
              pose_tables: dict | None) -> QualityQueryResult | None:
    """A (phi_bin, omega_bin) plan, or None for an immediate switch."""
    b = tensor.bins
    if strategy in _METRIC_FOR:
        return tensor.query_best(m, phi_now, n, metric=_METRIC_FOR[strategy])
    if strategy == "random_phase":
        pb = int(rng_strat.integers(b))
        ob = int(rng_strat.integers(b))
        return QualityQueryResult(pb, ob, 0.0, 0.0, (pb + 0.5) / b, (ob + 0.5) / b)
    if strategy == "immediate":
        return None
    if strategy == "pose_distance":
        pb, ob = pose_distance_plan(pose_tables[m], pose_tables[n], b)
        return QualityQueryResult(pb, ob, 0.0, 0.0, (pb + 0.5) / b, (ob + 0.5) / b)
    raise ValueError(f"unknown strategy {strategy!r}")


def run_strategy_trial(gaits: dict[str, GaitSpec], cfg: SimConfig,
                       terrain: Terrain, tensor: TransitionTensor,
                       m: str, n: str, strategy: str,
                       rng_init: np.random.Generator,
                       rng_strat: np.random.Generator, sigma: float,
                       pose_tables: dict | None = None) -> TransitionOutcome:
    start = trial_initial_state(gaits, cfg, terrain, m, sigma, rng_init)
    if start is None:
        return TransitionOutcome(0, 0.0, 0.0, 0.0)
    state, clock = start
    u = UnifiedController(gaits, cfg, terrain, tensor=None, active=m,
                          state=state, clock=clock)
    try:
        plan = _plan_for(strategy, tensor, m, n, clock.phase, rng_strat,
                         pose_tables)
    except NoViableTransitionError:
        return TransitionOutcome(0, 0.0, 0.0, 0.0)
    if plan is None:
        u.switch_now(n)
    else:
        u.pending = PendingPlan(n, plan)
    deadline = state.t + 2.0 * (gaits[m].period or 1.0) + tensor.t_max + 3.0
    while u.state.t < deadline:
        for e in u.tick():
            if e["kind"] == "transition_done":
                return TransitionOutcome(e["eta"], e["duration"],
                                         e["effort"], e["accuracy"])
        if not u.state.alive:
            break
    return TransitionOutcome(0, 0.0, 0.0, 0.0)


def eval_pairwise(tensor: TransitionTensor, strategy: str, trials: int,
                  sigma: float, seed: int, cfg: SimConfig,
                  gaits: dict[str, GaitSpec], terrain: Terrain | None = None,
                  pairs: list[tuple[str, str]] | None = None,
                  progress=None) -> EvalReport:
    """Paired pairwise evaluation of one switching strategy."""
    tensor.require_config(cfg, gaits)
    if terrain is None:
        terrain = Terrain()
    if pairs is None:
        pairs = tensor.pairs()
    pose_tables = None
    if strategy == "pose_distance":
        pose_tables = {g: cycle_pose_table(gaits[g], cfg, terrain, tensor.bins)
                       for g in {p for pair in pairs for p in pair}}
    report = EvalReport(strategy=strategy, seed=seed, sigma=sigma,
                        trials_per_pair=trials)
    for idx, (m, n) in enumerate(pairs):
        outs = []
        for j in range(trials):
            rng_init = np.random.default_rng(
                (seed, _gait_digest(m), _gait_digest(n), j, 0))
            rng_strat = np.random.default_rng(
                (seed, _gait_digest(m), _gait_digest(n), j, 1))
            outs.append(run_strategy_trial(gaits, cfg, terrain, tensor, m, n,
                                           strategy, rng_init, rng_strat,
                                           sigma, pose_tables))
        ok = [o for o in outs if o.eta]
        report.rows.append(PairStats(
            m=m, n=n, trials=trials, successes=len(ok),
            success_rate=len(ok) / trials if trials else None,
            mean_duration=sum(o.duration for o in ok) / len(ok) if ok else None,
            mean_effort=sum(o.effort for o in ok) / len(ok) if ok else None,
            mean_accuracy=sum(o.accuracy for o in ok) / len(ok) if ok else None))
        if progress:
            progress(idx + 1, len(pairs))
    return report


def run_ablation(tensor: TransitionTensor, trials: int, sigma: float,
                 seed: int, cfg: SimConfig, gaits: dict[str, GaitSpec],
                 terrain: Terrain | None = None,
                 pairs: list[tuple[str, str]] | None = None,
                 progress=None) -> dict[str, EvalReport]:
    """Paired reports for full quality vs outcome-only vs stability-only."""
    return {s: eval_pairwise(tensor, s, trials, sigma, seed, cfg, gaits,
                             terrain, pairs, progress)
            for s in ("tmt", "outcome_only", "stability_only")}


# ---- gap-jumping scenario ----

GAP_START = 15.4       # m from the start line to the gap's near edge
JUMP_LEAD = 3.4        # m before the gap at which Jump is requested (nominal)
REQUEST_JITTER = 1.67  # m, per-seed spread of the request line (~one stride)
CANTER_AFTER = 1.5     # m past the gap at which Canter is requested again
SCENARIO_TIME = 25.0   # s overall cap
DEFAULT_GAP_WIDTH = 0.85  # m, the width at which guided timing separates
                          # cleanly from immediate switching


def run_gap_scenario(tensor: TransitionTensor, gap_width: float, seed: int,
                     cfg: SimConfig, gaits: dict[str, GaitSpec],
                     strategy: str = "tmt", sigma: float = 0.02,
                     trace_every: int = 10) -> tuple[bool, list[dict]]:
    """Scripted Canter -> Jump -> Canter run over a single gap.

    The Jump request fires at a per-seed jittered distance before the gap
    (the operator never hits the same line twice).  Tensor-guided timing
    snaps the actual switch to its phase window, which re-aligns the jump
    arcs with the gap; immediate switching inherits the jitter directly.
    Success means the character clears the gap and the transition back to
    Canter stabilizes.
    """
    if strategy not in ("tmt", "immediate"):
        raise ValueError("gap scenario compares 'tmt' and 'immediate'")
    gap_end = GAP_START + gap_width
    terrain = Terrain(segments=((-100.0, GAP_START, 0.0),
                                (gap_end, 1000.0, 0.0)))
    rng = np.random.default_rng((seed, 0xC0FFEE))
    request_x = GAP_START - JUMP_LEAD - REQUEST_JITTER * float(rng.uniform())
    start = trial_initial_state(gaits, cfg, terrain, "Canter", sigma, rng)
    if start is None:
        return False, []
    state, clock = start
    u = UnifiedController(gaits, cfg, terrain,
                          tensor=tensor if strategy == "tmt" else None,
                          active="Canter", state=state, clock=clock)
    trace: list[dict] = []
    stage = 0  # 0 approach, 1 jumping, 2 landing back into Canter
    steps = 0
    recovered = False
    while u.state.t < SCENARIO_TIME:
        events = u.tick()
        steps += 1
        if steps % trace_every == 0 or events:
            s = u.state
            trace.append({"t": s.t, "x": s.x, "z": s.z, "vx": s.vx,
                          "vz": s.vz, "mode": s.mode.value,
                          "motion": u.active, "alive": s.alive})
        if not u.state.alive:
            return False, trace
        if stage == 0 and u.state.x >= request_x:
            stage = 1
            if strategy == "tmt":
                try:
                    u.request_motion("Jump")
                except NoViableTransitionError:
                    return False, trace
            else:
                u.switch_now("Jump")
        elif stage == 1 and u.state.x >= gap_end + CANTER_AFTER:
            stage = 2
            if strategy == "tmt":
                try:
                    u.request_motion("Canter")
                except NoViableTransitionError:
                    return False, trace
            else:
                u.switch_now("Canter")
        elif stage == 2:
            for e in events:
                if e["kind"] == "request_failed":
                    return False, trace
                if e["kind"] == "transition_done" and u.active == "Canter":
                    if e["eta"] and u.state.x > gap_end:
                        recovered = True
                    else:
                        return False, trace
            if recovered:
                return True, trace
    return False, trace
