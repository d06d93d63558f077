"""The transition tensor.

A dense 4-D grid over (source motion, source phase bin, destination
motion, destination phase bin).  Each cell holds the recorded outcomes of
repeated switching trials at that coordinate; consolidation collapses an
outcome to a scalar score, a phase-neighborhood statistic scores the
transition's stability, and queries return the best upcoming switch
window for a motion pair.  Tensors persist to a versioned line-oriented
JSON file and round-trip exactly.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .dynamics import SimConfig, Terrain
from .gaits import GaitSpec
from .measurement import T_MAX, SIGMA_V, TransitionOutcome, run_transition_trial

FORMAT_NAME = "transition-tensor"
FORMAT_VERSION = 1

BETA = 0.015          # weight of outcome variance inside the stability score
E_MIN = 1e-3          # J, clamp for the accuracy/effort division
DEFAULT_BINS = 20
DEFAULT_TRIALS = 5
DEFAULT_SIGMA = 0.02


class TensorError(RuntimeError):
    pass


class ConfigMismatchError(TensorError):
    """A gait lacks a measured limit cycle, or populations disagree."""


class EmptyNeighborhoodError(TensorError):
    """No samples near the queried coordinate; the tensor is under-populated."""


class NoViableTransitionError(TensorError):
    """No transition window for the pair scores above the threshold."""


class VersionMismatchError(TensorError):
    pass


class CorruptFileError(TensorError):
    pass


class ConfigHashMismatchError(TensorError):
    """The tensor was populated under a different config than the one in use."""


@dataclass(frozen=True)
class TransitionIndex:
    """Coordinates into the tensor: (source, phi bin, destination, omega bin)."""

    m: str
    phi_bin: int
    n: str
    omega_bin: int
    bins: int

    def validate(self, allow_self: bool = True) -> None:
        if not (0 <= self.phi_bin < self.bins and 0 <= self.omega_bin < self.bins):
            raise ValueError("bin index out of range")
        if self.m == self.n and not allow_self:
            raise ValueError("self-transitions are not enabled")


@dataclass
class TensorCell:
    """Aggregate of all trials recorded at one tensor coordinate."""

    samples: int = 0
    alive: int = 0
    gammas: list[float] = field(default_factory=list)  # per-sample consolidated score
    mean_duration: float | None = None   # means over alive samples
    mean_effort: float | None = None
    mean_accuracy: float | None = None

    def mean_gamma(self) -> float:
        # dead samples contribute 0 through their stored gamma
        return sum(self.gammas) / len(self.gammas) if self.gammas else 0.0

    def to_row(self) -> list:
        return [self.samples, self.alive, self.gammas,
                self.mean_duration, self.mean_effort, self.mean_accuracy]

    @classmethod
    def from_row(cls, row: list) -> "TensorCell":
        if len(row) != 6:
            raise CorruptFileError("malformed cell row")
        return cls(samples=row[0], alive=row[1], gammas=list(row[2]),
                   mean_duration=row[3], mean_effort=row[4], mean_accuracy=row[5])


@dataclass(frozen=True)
class QualityQueryResult:
    phi_bin: int
    omega_bin: int
    quality: float
    wait_time: float      # s until the switch phase comes up
    switch_phase: float   # bin-center phase at which to fire the switch
    omega: float          # bin-center phase imposed on the destination


def consolidate(outcome: TransitionOutcome, e_min: float = E_MIN) -> float:
    """Collapse one outcome to a scalar: eta * (alpha / effort) * exp(-duration).

    Dead samples score exactly 0; the e_min clamp removes the division
    singularity for near-zero-effort transitions.
    """
    if e_min <= 0.0:
        raise ValueError("e_min must be positive")
    if outcome.eta == 0:
        return 0.0
    return (outcome.accuracy / max(outcome.effort, e_min)) * math.exp(-outcome.duration)


def _gait_digest(name: str) -> int:
    return int.from_bytes(hashlib.sha256(name.encode()).digest()[:8], "big")


def trial_rng(seed: int, m: str, n: str, phi_bin: int, omega_bin: int,
              trial: int) -> np.random.Generator:
    """Deterministic per-trial RNG, independent of execution order."""
    return np.random.default_rng(
        (seed, _gait_digest(m), _gait_digest(n), phi_bin, omega_bin, trial))


def config_digest(cfg: SimConfig, gaits: dict[str, GaitSpec]) -> str:
    doc = {"sim": cfg.to_dict(),
           "gaits": [gaits[k].to_dict() for k in sorted(gaits)]}
    return hashlib.sha256(
        json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


class TransitionTensor:
    """Populated transition grid plus everything needed to reproduce it."""

    def __init__(self, vocabulary: tuple[str, ...], bins: int, seed: int,
                 sigma: float, trials_per_cell: int, cfg: SimConfig,
                 gaits: dict[str, GaitSpec], delta_bins: int = 1,
                 beta: float = BETA, e_min: float = E_MIN,
                 t_max: float = T_MAX, sigma_v: float = SIGMA_V):
        if delta_bins < 1:
            raise ValueError("delta must span at least one whole bin")
        if beta <= 0.0:
            raise ValueError("beta must be positive")
        self.vocabulary = tuple(vocabulary)
        self.bins = bins
        self.seed = seed
        self.sigma = sigma
        self.trials_per_cell = trials_per_cell
        self.delta_bins = delta_bins
        self.beta = beta
        self.e_min = e_min
        self.t_max = t_max
        self.sigma_v = sigma_v
        self.sim = cfg
        self.gaits = dict(gaits)
        self.config_hash = config_digest(cfg, gaits)
        self.config_ok = True
        # (m, n) -> row-major [phi_bin][omega_bin] list of cells
        self.cells: dict[tuple[str, str], list[TensorCell]] = {}

    @property
    def delta(self) -> float:
        return self.delta_bins / self.bins

    def pairs(self) -> list[tuple[str, str]]:
        return sorted(self.cells)

    def cell(self, w: TransitionIndex) -> TensorCell:
        w.validate()
        try:
            grid = self.cells[(w.m, w.n)]
        except KeyError:
            raise ConfigMismatchError(f"pair {w.m}->{w.n} is not populated") from None
        return grid[w.phi_bin * self.bins + w.omega_bin]

    def _require_usable(self) -> None:
        if not self.config_ok:
            raise ConfigHashMismatchError(
                "tensor config hash does not match its contents; "
                "repopulate or load the matching config")

    def require_config(self, cfg: SimConfig, gaits: dict[str, GaitSpec]) -> None:
        """Refuse use against a different simulation config or gait library."""
        self._require_usable()
        if config_digest(cfg, gaits) != self.config_hash:
            raise ConfigHashMismatchError(
                "tensor was populated under a different config")

    def _slice_max_gamma(self, m: str, n: str) -> float:
        grid = self.cells[(m, n)]
        best = 0.0
        for cell in grid:
            if cell.samples:
                g = cell.mean_gamma()
                if g > best:
                    best = g
        return best

    def neighborhood(self, w: TransitionIndex) -> tuple[list[float], int, int]:
        """All per-sample scores in the wrap-around phase neighborhood of w."""
        grid = self.cells.get((w.m, w.n))
        if grid is None:
            raise ConfigMismatchError(f"pair {w.m}->{w.n} is not populated")
        b = self.bins
        r = self.delta_bins
        gammas: list[float] = []
        samples = alive = 0
        for dp in range(-r, r + 1):
            p = (w.phi_bin + dp) % b
            row = p * b
            for do in range(-r, r + 1):
                cell = grid[row + (w.omega_bin + do) % b]
                gammas.extend(cell.gammas)
                samples += cell.samples
                alive += cell.alive
        return gammas, samples, alive

    def stability(self, w: TransitionIndex) -> float:
        """Alive proportion near w, discounted by the local score variance."""
        gammas, samples, alive = self.neighborhood(w)
        if samples == 0:
            raise EmptyNeighborhoodError(f"no samples near {w}")
        zeta = 0.0
        norm = self._slice_max_gamma(w.m, w.n)
        if norm > 0.0:
            zeta = float(np.var(np.asarray(gammas) / norm))
        return (alive / samples) * math.exp(-self.beta * zeta)

    def quality(self, w: TransitionIndex) -> float:
        """Transition quality: stability times the cell's mean score."""
        cell = self.cell(w)
        if cell.samples == 0:
            raise EmptyNeighborhoodError(f"cell {w} has no samples")
        return self.stability(w) * cell.mean_gamma()

    def _metric(self, w: TransitionIndex, metric: str) -> float:
        if metric == "quality":
            return self.quality(w)
        if metric == "outcome":
            return self.cell(w).mean_gamma()
        if metric == "stability":
            return self.stability(w)
        raise ValueError(f"unknown metric {metric!r}")

    def query_best(self, m: str, phi_now: float, n: str, horizon: float = 1.0,
                   q_min: float = 0.0, metric: str = "quality",
                   wait_discount: float = 0.0) -> QualityQueryResult:
        """Best switch window for m->n reachable within `horizon` cycles.

        Ties break toward the smaller wait, then the smaller omega bin.
        Raises NoViableTransitionError when nothing scores above q_min.
        """
        self._require_usable()
        grid = self.cells.get((m, n))
        if grid is None:
            raise ConfigMismatchError(f"pair {m}->{n} is not populated")
        b = self.bins
        gait_m = self.gaits[m]
        period = 0.0 if gait_m.standing else (gait_m.period or 0.0)
        best = None
        best_key = None
        for pb in range(b):
            phi_c = (pb + 0.5) / b
            dist = (phi_c - phi_now) % 1.0
            if dist > horizon:
                continue
            wait = dist * period
            row = pb * b
            for ob in range(b):
                if grid[row + ob].samples == 0:
                    continue
                w = TransitionIndex(m, pb, n, ob, b)
                q = self._metric(w, metric)
                if q <= q_min:
                    continue
                score = q * math.exp(-wait_discount * wait) if wait_discount else q
                key = (-score, wait, ob)
                if best_key is None or key < best_key:
                    best_key = key
                    best = QualityQueryResult(pb, ob, q, wait, phi_c, (ob + 0.5) / b)
        if best is None:
            raise NoViableTransitionError(
                f"no transition window for {m}->{n} scores above {q_min}")
        return best

    def quality_grid(self, m: str, n: str) -> list[list[float]]:
        """Dense B x B quality values for one pair (0 where unpopulated)."""
        b = self.bins
        out = []
        for pb in range(b):
            row = []
            for ob in range(b):
                w = TransitionIndex(m, pb, n, ob, b)
                try:
                    row.append(self.quality(w))
                except EmptyNeighborhoodError:
                    row.append(0.0)
            out.append(row)
        return out

    # ---- persistence ----

    def _header(self) -> dict:
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "vocabulary": list(self.vocabulary),
            "bins": self.bins,
            "delta_bins": self.delta_bins,
            "beta": self.beta,
            "e_min": self.e_min,
            "t_max": self.t_max,
            "sigma_v": self.sigma_v,
            "seed": self.seed,
            "sigma": self.sigma,
            "trials_per_cell": self.trials_per_cell,
            "config_hash": self.config_hash,
            "sim": self.sim.to_dict(),
            "gaits": [self.gaits[k].to_dict() for k in sorted(self.gaits)],
            "pair_count": len(self.cells),
        }

    def save(self, path: str | os.PathLike) -> None:
        """One header line, then one line per populated pair, sorted."""
        lines = [json.dumps(self._header(), sort_keys=True, separators=(",", ":"))]
        for (m, n) in sorted(self.cells):
            doc = {"pair": [m, n],
                   "cells": [c.to_row() for c in self.cells[(m, n)]]}
            lines.append(json.dumps(doc, sort_keys=True, separators=(",", ":")))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | os.PathLike) -> "TransitionTensor":
        try:
            with open(path, encoding="utf-8") as fh:
                lines = fh.read().splitlines()
        except OSError as exc:
            raise CorruptFileError(str(exc)) from exc
        if not lines:
            raise CorruptFileError("empty tensor file")
        try:
            header = json.loads(lines[0])
        except json.JSONDecodeError as exc:
            raise CorruptFileError(f"bad header: {exc}") from exc
        if not isinstance(header, dict) or header.get("format") != FORMAT_NAME:
            raise CorruptFileError("not a transition tensor file")
        if header.get("version") != FORMAT_VERSION:
            raise VersionMismatchError(
                f"unsupported tensor file version {header.get('version')!r}")
        try:
            cfg = SimConfig.from_dict(header["sim"])
            gaits = {d["id"]: GaitSpec.from_dict(d) for d in header["gaits"]}
            tensor = cls(vocabulary=tuple(header["vocabulary"]),
                         bins=header["bins"], seed=header["seed"],
                         sigma=header["sigma"],
                         trials_per_cell=header["trials_per_cell"],
                         cfg=cfg, gaits=gaits,
                         delta_bins=header["delta_bins"], beta=header["beta"],
                         e_min=header["e_min"], t_max=header["t_max"],
                         sigma_v=header["sigma_v"])
            stored_hash = header["config_hash"]
            pair_count = header["pair_count"]
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptFileError(f"bad header: {exc}") from exc
        body = [ln for ln in lines[1:] if ln.strip()]
        if len(body) != pair_count:
            raise CorruptFileError(
                f"expected {pair_count} pair lines, found {len(body)}")
        expected_cells = tensor.bins * tensor.bins
        for ln in body:
            try:
                doc = json.loads(ln)
                m, n = doc["pair"]
                rows = doc["cells"]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise CorruptFileError(f"bad pair line: {exc}") from exc
            if (m, n) in tensor.cells:
                raise CorruptFileError(f"duplicate pair {m}->{n}")
            if len(rows) != expected_cells:
                raise CorruptFileError(
                    f"pair {m}->{n} has {len(rows)} cells, expected {expected_cells}")
            tensor.cells[(m, n)] = [TensorCell.from_row(r) for r in rows]
        # an edited or stale hash leaves the tensor loadable for inspection
        # but refused for queries
        tensor.config_hash = stored_hash
        tensor.config_ok = stored_hash == config_digest(cfg, gaits)
        return tensor

    def export_quality_csv(self, path: str | os.PathLike,
                           pairs: list[tuple[str, str]] | None = None) -> None:
        """Per-pair B x B grids of quality and its factors, as CSV."""
        import csv
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh)
            wr.writerow(["m", "n", "phiBin", "omegaBin", "Q", "psi",
                         "meanGamma", "aliveFrac"])
            for (m, n) in (pairs if pairs is not None else self.pairs()):
                grid = self.cells[(m, n)]
                for pb in range(self.bins):
                    for ob in range(self.bins):
                        cell = grid[pb * self.bins + ob]
                        w = TransitionIndex(m, pb, n, ob, self.bins)
                        try:
                            psi = self.stability(w)
                        except EmptyNeighborhoodError:
                            psi = 0.0
                        mg = cell.mean_gamma()
                        q = psi * mg if cell.samples else 0.0
                        frac = cell.alive / cell.samples if cell.samples else 0.0
                        wr.writerow([m, n, pb, ob, repr(q), repr(psi),
                                     repr(mg), repr(frac)])


def _aggregate(outcomes: list[TransitionOutcome], e_min: float) -> TensorCell:
    cell = TensorCell()
    dur = eff = acc = 0.0
    for o in outcomes:
        cell.samples += 1
        cell.gammas.append(consolidate(o, e_min))
        if o.eta:
            cell.alive += 1
            dur += o.duration
            eff += o.effort
            acc += o.accuracy
    if cell.alive:
        cell.mean_duration = dur / cell.alive
        cell.mean_effort = eff / cell.alive
        cell.mean_accuracy = acc / cell.alive
    return cell


# module-level worker state for process pools (set once per worker)
_WORK: dict = {}


def _pool_init(cfg_dict: dict, gait_dicts: list[dict], terrain_dict: dict,
               params: dict) -> None:
    _WORK["cfg"] = SimConfig.from_dict(cfg_dict)
    _WORK["gaits"] = {d["id"]: GaitSpec.from_dict(d) for d in gait_dicts}
    _WORK["terrain"] = Terrain.from_dict(terrain_dict)
    _WORK["params"] = params


def _pool_cell(task: tuple[str, str, int, int]) -> tuple[tuple[str, str, int, int], list]:
    m, n, pb, ob = task
    p = _WORK["params"]
    cell = _populate_cell(_WORK["gaits"][m], _WORK["gaits"][n], pb, ob,
                          p["bins"], p["trials"], p["sigma"], p["seed"],
                          _WORK["cfg"], _WORK["terrain"], p["t_max"],
                          p["sigma_v"], p["e_min"])
    return task, cell.to_row()


def _populate_cell(gait_m: GaitSpec, gait_n: GaitSpec, phi_bin: int,
                   omega_bin: int, bins: int, trials: int, sigma: float,
                   seed: int, cfg: SimConfig, terrain: Terrain,
                   t_max: float, sigma_v: float, e_min: float) -> TensorCell:
    phi = (phi_bin + 0.5) / bins
    omega = (omega_bin + 0.5) / bins
    if gait_m.standing:
        phi = 0.0
    if gait_n.standing:
        omega = 0.0
    outcomes = []
    for j in range(trials):
        rng = trial_rng(seed, gait_m.id, gait_n.id, phi_bin, omega_bin, j)
        xi = rng.standard_normal(2)
        outcomes.append(run_transition_trial(
            gait_m, gait_n, phi, omega, cfg, terrain, sigma=sigma,
            xi_z=float(xi[0]), xi_v=float(xi[1]), t_max=t_max, sigma_v=sigma_v))
    return _aggregate(outcomes, e_min)


def populate(pairs: list[tuple[str, str]], bins: int, trials: int,
             sigma: float, seed: int, cfg: SimConfig,
             gaits: dict[str, GaitSpec], terrain: Terrain | None = None,
             workers: int = 1, base: TransitionTensor | None = None,
             delta_bins: int = 1, t_max: float = T_MAX,
             sigma_v: float = SIGMA_V, e_min: float = E_MIN,
             progress=None) -> TransitionTensor:
    """Run all switching trials for the given pairs and build the tensor.

    Each trial's RNG derives from (seed, pair names, bins, trial), never
    from execution order, so results are bit-identical at any parallelism,
    and extending an existing tensor (``base``) with new pairs leaves
    every existing cell untouched.  Standing gaits only populate their
    fixed phase: bin 0 on the side where the phase is pinned to 0.
    """
    if trials < 1:
        raise ValueError("need at least one trial per cell")
    if terrain is None:
        terrain = Terrain()
    for name, g in gaits.items():
        if g.nominal_apex is None or (not g.standing and g.period is None):
            raise ConfigMismatchError(
                f"gait {name} has no measured limit cycle; run the cycle finder first")

    if base is not None:
        base._require_usable()
        if (base.bins, base.seed, base.sigma, base.trials_per_cell) != \
                (bins, seed, sigma, trials):
            raise ConfigMismatchError("extension parameters differ from the base tensor")
        if base.config_hash != config_digest(cfg, gaits):
            raise ConfigHashMismatchError("extension config differs from the base tensor")

    tensor = TransitionTensor(vocabulary=tuple(sorted(gaits)), bins=bins,
                              seed=seed, sigma=sigma, trials_per_cell=trials,
                              cfg=cfg, gaits=gaits, delta_bins=delta_bins,
                              t_max=t_max, sigma_v=sigma_v, e_min=e_min)
    if base is not None:
        for key, grid in base.cells.items():
            tensor.cells[key] = list(grid)

    tasks = []
    for (m, n) in pairs:
        if m not in gaits or n not in gaits:
            raise ConfigMismatchError(f"unknown gait in pair {m}->{n}")
        if (m, n) in tensor.cells:
            continue
        tensor.cells[(m, n)] = [None] * (bins * bins)
        for pb in range(bins):
            if gaits[m].standing and pb != 0:
                continue
            for ob in range(bins):
                if gaits[n].standing and ob != 0:
                    continue
                tasks.append((m, n, pb, ob))

    params = {"bins": bins, "trials": trials, "sigma": sigma, "seed": seed,
              "t_max": t_max, "sigma_v": sigma_v, "e_min": e_min}
    if workers > 1 and len(tasks) > 1:
        import multiprocessing as mp
        ctx = mp.get_context("fork")
        init_args = (cfg.to_dict(), [g.to_dict() for g in gaits.values()],
                     terrain.to_dict(), params)
        with ctx.Pool(workers, initializer=_pool_init, initargs=init_args) as pool:
            chunk = max(1, len(tasks) // (workers * 8))
            for i, (task, row) in enumerate(
                    pool.imap(_pool_cell, tasks, chunksize=chunk)):
                m, n, pb, ob = task
                tensor.cells[(m, n)][pb * bins + ob] = TensorCell.from_row(row)
                if progress:
                    progress(i + 1, len(tasks))
    else:
        for i, (m, n, pb, ob) in enumerate(tasks):
            tensor.cells[(m, n)][pb * bins + ob] = _populate_cell(
                gaits[m], gaits[n], pb, ob, bins, trials, sigma, seed,
                cfg, terrain, t_max, sigma_v, e_min)
            if progress:
                progress(i + 1, len(tasks))

    for grid in tensor.cells.values():
        for i, cell in enumerate(grid):
            if cell is None:
                grid[i] = TensorCell()
    return tensor
