"""Acceptance suite: every release criterion, one pass/fail line each.

Heavy artifacts (the full-scale tensor and its paired evaluations) are
built once per session and shared across criteria.  Everything here is
deterministic: rerunning the suite reproduces identical numbers.
"""

import json
import math
import time

import numpy as np
import pytest

from gaitlink.dynamics import (ControlCommand, EventKind, Mode, SimConfig,
                               SimState, Terrain, flight_state,
                               mechanical_energy, step)
from gaitlink.experiments import (DEFAULT_GAP_WIDTH, eval_pairwise,
                                  run_gap_scenario)
from gaitlink.gaits import (EPS_H, EPS_V, ControllerClock, apex_return_map,
                            apex_state, is_stable, run_to_apex)
from gaitlink.measurement import TransitionOutcome
from gaitlink.tensor import (BETA, CorruptFileError, TensorCell,
                             TransitionIndex, TransitionTensor, consolidate,
                             populate)

from test_tensor import synthetic_tensor

PAIR_NAMES = ["Trot", "Canter", "Jump"]
ACCEPT_PAIRS = [(m, n) for m in PAIR_NAMES for n in PAIR_NAMES if m != n]


def report(name: str, ok: bool, detail: str = "") -> bool:
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}"
          + (f"  [{detail}]" if detail else ""))
    return ok


@pytest.fixture(scope="session")
def acceptance_tensor(cfg, gaits):
    """B=20, N=5, sigma=0.02 over the Trot/Canter/Jump pairs."""
    t0 = time.perf_counter()
    t = populate(ACCEPT_PAIRS, bins=20, trials=5, sigma=0.02, seed=42,
                 cfg=cfg, gaits=gaits)
    print(f"[acceptance tensor built in {time.perf_counter() - t0:.0f}s]")
    return t


@pytest.fixture(scope="session")
def paired_reports(acceptance_tensor, cfg, gaits):
    reports = {}
    for strategy in ("tmt", "random_phase", "outcome_only", "stability_only"):
        reports[strategy] = eval_pairwise(acceptance_tensor, strategy, 100,
                                          0.02, 0, cfg, gaits)
    return reports


class TestFormulaSuite:
    def test_formulas(self):
        ok = abs(consolidate(TransitionOutcome(1, math.log(2.0), 2.0, 1.0))
                 - 0.25) < 1e-12
        ok &= consolidate(TransitionOutcome(1, 0.0, 1.0, 1.0)) == 1.0
        ok &= consolidate(TransitionOutcome(0, 0.3, 2.0, 0.9)) == 0.0

        # stability: full alive proportion with normalized variance 10
        def fill(pb, ob):
            if pb == 1 and ob == 1:
                return TensorCell(samples=11, alive=11,
                                  gammas=[0.0] * 10 + [7.0])
            return TensorCell()
        t = synthetic_tensor(fill=fill)
        psi = t.stability(TransitionIndex("A", 1, "B", 1, 4))
        ok &= abs(psi - math.exp(-0.15)) < 1e-12 and BETA == 0.015

        # quality: product of stability and the cell's mean score
        t2 = synthetic_tensor(fill=lambda pb, ob: TensorCell(
            samples=2, alive=1, gammas=[0.8, 0.0]))
        w = TransitionIndex("A", 1, "B", 1, 4)
        ok &= abs(t2.quality(w) - t2.stability(w) * 0.4) < 1e-12
        assert report("formula-suite", ok)


class TestDynamicsSuite:
    def test_dynamics(self, cfg, terrain):
        t0 = time.perf_counter()
        # ballistic conservation over 1 s
        s = flight_state(0.0, 0.0, 5.0, 1.0, 3.0)
        e0 = mechanical_energy(s, cfg)
        while s.t < 1.0:
            s, _ = step(s, ControlCommand(), cfg, terrain)
        ballistic = abs(mechanical_energy(s, cfg) - e0) / e0

        # passive stance conservation
        cfg2 = SimConfig(l_min_frac=0.3)
        s = SimState(0.0, 0.0, 1.0, 0.0, -1.5, Mode.STANCE, foot_x=0.0)
        e0 = mechanical_energy(s, cfg2)
        while True:
            s, ev = step(s, ControlCommand(), cfg2, terrain)
            if ev.kind is EventKind.LIFTOFF:
                break
        stance = abs(mechanical_energy(s, cfg2) - e0) / e0

        # apex example against the closed form, with bracketing
        s = flight_state(0.0, 0.0, 1.0, 0.0, 2.0)
        while True:
            s, ev = step(s, ControlCommand(), cfg, terrain)
            if ev.kind is EventKind.APEX:
                break
        apex_t_err = abs(s.t - 2.0 / cfg.gravity)
        apex_z_err = abs(s.z - (1.0 + 4.0 / (2.0 * cfg.gravity)))
        elapsed = time.perf_counter() - t0

        ok = (ballistic < 1e-6 and stance < 1e-5
              and apex_t_err <= cfg.event_tol and apex_z_err < 1e-6
              and elapsed < 10.0)
        assert report("dynamics-suite", ok,
                      f"ballistic {ballistic:.1e}, stance {stance:.1e}, "
                      f"apex dt {apex_t_err:.1e}, dz {apex_z_err:.1e}, "
                      f"{elapsed:.1f}s")


class TestControllerSuite:
    def test_controllers(self, cfg, gaits, terrain):
        t0 = time.perf_counter()
        ok = True
        details = []
        for name, g in gaits.items():
            if g.standing:
                continue
            (z1, v1), _ = apex_return_map(g, g.nominal_apex, cfg, terrain)
            residual = math.hypot(z1 - g.nominal_apex[0], v1 - g.nominal_apex[1])
            ok &= residual < 1e-3
            details.append(f"{name} res {residual:.1e}")

            # 50-cycle hold inside the stability band
            state, clock = apex_state(*g.nominal_apex), ControllerClock()
            for _ in range(50):
                out = run_to_apex(g, state, clock, cfg, terrain)
                if out is None:
                    ok = False
                    break
                state, clock = out
                if (abs(state.z - g.nominal_apex[0]) > EPS_H
                        or abs(state.vx - g.nominal_apex[1]) > EPS_V):
                    ok = False
                    break

            # +-10% corner recovery within 10 cycles
            for sz in (1.1, 0.9):
                for sv in (1.1, 0.9):
                    state = apex_state(g.nominal_apex[0] * sz,
                                       g.nominal_apex[1] * sv)
                    clock = ControllerClock()
                    history, recovered = [], False
                    for _ in range(10):
                        out = run_to_apex(g, state, clock, cfg, terrain)
                        if out is None:
                            break
                        state, clock = out
                        history.append((state.z, state.vx))
                        if is_stable(history, g):
                            recovered = True
                            break
                    ok &= recovered
        elapsed = time.perf_counter() - t0
        ok &= elapsed < 60.0
        assert report("controller-suite", ok,
                      "; ".join(details) + f"; {elapsed:.1f}s")


class TestTensorDeterminism:
    def test_determinism(self, cfg, gaits, tmp_path):
        t0 = time.perf_counter()
        names = ["Trot", "Pace", "Canter", "Jump"]
        pairs = [(m, n) for m in names for n in names if m != n]
        kw = dict(bins=8, trials=3, sigma=0.02, seed=42, cfg=cfg, gaits=gaits)
        p1 = tmp_path / "d1.tensor"
        p2 = tmp_path / "d2.tensor"
        p3 = tmp_path / "d3.tensor"
        populate(pairs, **kw).save(p1)
        populate(pairs, **kw).save(p2)
        populate(pairs, workers=2, **kw).save(p3)
        same_serial = p1.read_bytes() == p2.read_bytes()
        same_parallel = p1.read_bytes() == p3.read_bytes()
        elapsed = time.perf_counter() - t0
        ok = same_serial and same_parallel and elapsed < 300.0
        assert report("tensor-determinism", ok,
                      f"serial {same_serial}, parallel {same_parallel}, "
                      f"{elapsed:.0f}s")


class TestQueryOracle:
    def test_exhaustive_argmax(self):
        rng = np.random.default_rng(2024)
        ok = True
        checked = 0
        for _ in range(1000):
            t = synthetic_tensor(rng=rng)
            phi_now = float(rng.uniform())
            period = t.gaits["A"].period
            best = None
            for pb in range(4):
                for ob in range(4):
                    w = TransitionIndex("A", pb, "B", ob, 4)
                    if t.cell(w).samples == 0:
                        continue
                    q = t.quality(w)
                    if q <= 0.0:
                        continue
                    wait = ((pb + 0.5) / 4 - phi_now) % 1.0 * period
                    key = (-q, wait, ob)
                    if best is None or key < best[0]:
                        best = (key, pb, ob)
            try:
                r = t.query_best("A", phi_now, "B")
                got = (r.phi_bin, r.omega_bin)
            except Exception:
                got = None
            want = None if best is None else (best[1], best[2])
            if got != want:
                ok = False
                break
            checked += 1
        assert report("query-oracle", ok, f"{checked}/1000 tensors")


class TestPairwiseTable:
    def test_tmt_vs_random(self, paired_reports):
        tmt = paired_reports["tmt"]
        rnd = paired_reports["random_phase"]
        min_rate = min(r.success_rate for r in tmt.rows)
        ge_all = all(tmt.row(m, n).success_rate >= rnd.row(m, n).success_rate
                     for (m, n) in ACCEPT_PAIRS)
        strict = sum(tmt.row(m, n).success_rate > rnd.row(m, n).success_rate
                     for (m, n) in ACCEPT_PAIRS)
        ok = min_rate >= 0.90 and ge_all and strict >= 3
        lines = ", ".join(
            f"{m[0]}->{n[0]} {tmt.row(m, n).success_rate:.2f}/{rnd.row(m, n).success_rate:.2f}"
            for (m, n) in ACCEPT_PAIRS)
        assert report("pairwise-table", ok,
                      f"min TMT {min_rate:.2f}, strict {strict}/6; {lines}")


class TestAblation:
    def test_component_ablation(self, paired_reports):
        tmt = paired_reports["tmt"]
        out = paired_reports["outcome_only"]
        stab = paired_reports["stability_only"]
        success_drop = sum(
            out.row(m, n).success_rate < tmt.row(m, n).success_rate
            for (m, n) in ACCEPT_PAIRS)
        effort_rise = sum(
            stab.row(m, n).mean_effort is not None
            and tmt.row(m, n).mean_effort is not None
            and stab.row(m, n).mean_effort > tmt.row(m, n).mean_effort
            for (m, n) in ACCEPT_PAIRS)
        ok = success_drop >= 1 and effort_rise >= 1
        assert report("ablation", ok,
                      f"outcome-only drops success on {success_drop} pairs, "
                      f"stability-only raises effort on {effort_rise} pairs")


class TestGapScenario:
    def test_guided_vs_immediate(self, acceptance_tensor, cfg, gaits):
        gap = DEFAULT_GAP_WIDTH
        tmt_wins = sum(run_gap_scenario(acceptance_tensor, gap, seed, cfg,
                                        gaits, strategy="tmt")[0]
                       for seed in range(10))
        imm_wins = sum(run_gap_scenario(acceptance_tensor, gap, seed, cfg,
                                        gaits, strategy="immediate")[0]
                       for seed in range(10))
        ok = tmt_wins >= 8 and imm_wins <= 5
        assert report("gap-scenario", ok,
                      f"width {gap} m: guided {tmt_wins}/10, "
                      f"immediate {imm_wins}/10")


class TestPersistence:
    def test_roundtrip_and_corruption(self, tmp_path):
        rng = np.random.default_rng(31)
        ok = True
        for i in range(20):
            t = synthetic_tensor(rng=rng, pairs=(("A", "B"), ("B", "A")))
            path = tmp_path / f"p{i}.tensor"
            t.save(path)
            loaded = TransitionTensor.load(path)
            for key, grid in t.cells.items():
                if [c.to_row() for c in grid] != \
                        [c.to_row() for c in loaded.cells[key]]:
                    ok = False
        # corrupted files are rejected
        path = tmp_path / "c.tensor"
        synthetic_tensor(rng=rng).save(path)
        raw = path.read_bytes()
        rejected = 0
        for cut in (10, len(raw) // 2, len(raw) - 3):
            path.write_bytes(raw[:cut])
            try:
                TransitionTensor.load(path)
            except CorruptFileError:
                rejected += 1
        ok &= rejected == 3
        assert report("persistence", ok, f"{rejected}/3 corruptions rejected")


class TestScalability:
    def test_vocabulary_growth_leaves_cells_untouched(self, cfg, gaits,
                                                      tmp_path):
        base = populate(ACCEPT_PAIRS, bins=4, trials=1, sigma=0.02, seed=9,
                        cfg=cfg, gaits=gaits)
        p1 = tmp_path / "before.tensor"
        base.save(p1)
        new_pairs = [("Pace", n) for n in PAIR_NAMES] + \
            [(m, "Pace") for m in PAIR_NAMES]
        extended = populate(new_pairs, bins=4, trials=1, sigma=0.02, seed=9,
                            cfg=cfg, gaits=gaits, base=base)
        p2 = tmp_path / "after.tensor"
        extended.save(p2)
        old_lines = p1.read_text().splitlines()
        new_lines = p2.read_text().splitlines()
        # every pre-existing pair line survives byte-for-byte; the diff is
        # only the header's pair count and the added pair lines
        ok = set(old_lines[1:]) <= set(new_lines[1:])
        added = set(new_lines[1:]) - set(old_lines[1:])
        ok &= len(added) == len(new_pairs)
        h1 = json.loads(old_lines[0])
        h2 = json.loads(new_lines[0])
        h2["pair_count"] = h1["pair_count"]
        ok &= h1 == h2
        for key, grid in base.cells.items():
            if [c.to_row() for c in grid] != \
                    [c.to_row() for c in extended.cells[key]]:
                ok = False
        assert report("scalability", ok,
                      f"{len(new_pairs)} pairs added, "
                      f"{len(old_lines) - 1} original lines intact")
