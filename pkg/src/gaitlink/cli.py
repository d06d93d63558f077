"""Command-line interface.

Verbs: populate, eval, ablate, scenario, query, export-q, serve.
All outputs are deterministic for a given seed; any listed error exits
nonzero with a message on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import experiments, tensor as tensor_mod
from .config import load_config
from .gaits import measure_gaits
from .tensor import TensorError, TransitionTensor, populate


def _parse_pairs(spec: str) -> list[tuple[str, str]]:
    pairs = []
    for item in spec.split(","):
        parts = item.split(":")
        if len(parts) != 2:
            raise ValueError(f"bad pair {item!r} (expected m:n)")
        pairs.append((parts[0].strip(), parts[1].strip()))
    return pairs


def _progress(label: str):
    def cb(done: int, total: int) -> None:
        if done == total or done % max(1, total // 20) == 0:
            print(f"{label}: {done}/{total}", file=sys.stderr)
    return cb


def cmd_populate(args) -> int:
    cfg, terrain, gaits = load_config(args.config)
    gaits = measure_gaits(gaits, cfg, terrain=None)
    if args.pairs:
        pairs = _parse_pairs(args.pairs)
    else:
        names = [g for g in sorted(gaits) if args.include_stand or not gaits[g].standing]
        pairs = [(m, n) for m in names for n in names if m != n]
    base = TransitionTensor.load(args.extend) if args.extend else None
    t = populate(pairs, bins=args.bins, trials=args.trials, sigma=args.noise,
                 seed=args.seed, cfg=cfg, gaits=gaits, terrain=terrain,
                 workers=args.workers, base=base,
                 progress=_progress("populate") if args.verbose else None)
    t.save(args.out)
    total = sum(c.samples for g in t.cells.values() for c in g)
    print(f"wrote {args.out}: {len(t.cells)} pairs, {total} samples")
    return 0


def cmd_eval(args) -> int:
    t = TransitionTensor.load(args.tensor)
    rep = experiments.eval_pairwise(
        t, args.strategy, args.trials, args.noise, args.seed, t.sim, t.gaits,
        progress=_progress("eval") if args.verbose else None)
    rep.to_csv(args.csv)
    for r in rep.rows:
        rate = "n/a" if r.success_rate is None else f"{r.success_rate:.2f}"
        print(f"{r.m}->{r.n}: success {rate} ({r.successes}/{r.trials})")
    print(f"wrote {args.csv}")
    return 0


def cmd_ablate(args) -> int:
    t = TransitionTensor.load(args.tensor)
    gaits = t.gaits
    reports = experiments.run_ablation(
        t, args.trials, args.noise, args.seed, t.sim, gaits,
        progress=_progress("ablate") if args.verbose else None)
    for strat, rep in reports.items():
        path = args.csv.replace(".csv", f".{strat}.csv")
        rep.to_csv(path)
        print(f"{strat}: wrote {path}")
        for r in rep.rows:
            rate = "n/a" if r.success_rate is None else f"{r.success_rate:.2f}"
            eff = "n/a" if r.mean_effort is None else f"{r.mean_effort:.1f}"
            print(f"  {r.m}->{r.n}: success {rate} effort {eff}")
    return 0


def cmd_scenario(args) -> int:
    t = TransitionTensor.load(args.tensor)
    ok, trace = experiments.run_gap_scenario(
        t, args.gap, args.seed, t.sim, t.gaits, strategy=args.strategy)
    if args.trace_out:
        with open(args.trace_out, "w", encoding="utf-8") as fh:
            for row in trace:
                fh.write(json.dumps(row) + "\n")
        print(f"wrote {args.trace_out} ({len(trace)} frames)")
    print(f"gap={args.gap} seed={args.seed} strategy={args.strategy}: "
          f"{'SUCCESS' if ok else 'FAILURE'}")
    return 0 if ok else 1


def cmd_query(args) -> int:
    t = TransitionTensor.load(args.tensor)
    r = t.query_best(getattr(args, "from"), args.phase, args.to)
    print(json.dumps({"phi_bin": r.phi_bin, "omega_bin": r.omega_bin,
                      "quality": r.quality, "wait_time": r.wait_time,
                      "switch_phase": r.switch_phase, "omega": r.omega}))
    return 0


def cmd_export_q(args) -> int:
    t = TransitionTensor.load(args.tensor)
    pairs = _parse_pairs(args.pair) if args.pair else None
    t.export_quality_csv(args.csv, pairs)
    print(f"wrote {args.csv}")
    return 0


def cmd_serve(args) -> int:
    from .service import serve
    cfg, terrain, gaits = load_config(args.config)
    t = TransitionTensor.load(args.tensor)
    serve(t.sim, t.gaits, t, port=args.port, terrain=terrain,
          timescale=args.timescale)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gaitlink")
    sub = p.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("populate", help="run switching trials and build a tensor")
    sp.add_argument("--bins", type=int, default=tensor_mod.DEFAULT_BINS)
    sp.add_argument("--trials", type=int, default=tensor_mod.DEFAULT_TRIALS)
    sp.add_argument("--noise", type=float, default=tensor_mod.DEFAULT_SIGMA)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--pairs", help="comma list m:n; default all ordered pairs")
    sp.add_argument("--include-stand", action="store_true")
    sp.add_argument("--config")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--extend", help="existing tensor file to add pairs to")
    sp.add_argument("--verbose", action="store_true")
    sp.set_defaults(fn=cmd_populate)

    sp = sub.add_parser("eval", help="pairwise success-rate evaluation")
    sp.add_argument("--tensor", required=True)
    sp.add_argument("--strategy", choices=experiments.STRATEGIES, default="tmt")
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--noise", type=float, default=tensor_mod.DEFAULT_SIGMA)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--csv", required=True)
    sp.add_argument("--verbose", action="store_true")
    sp.set_defaults(fn=cmd_eval)

    sp = sub.add_parser("ablate", help="quality-component ablation")
    sp.add_argument("--tensor", required=True)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--noise", type=float, default=tensor_mod.DEFAULT_SIGMA)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--csv", required=True)
    sp.add_argument("--verbose", action="store_true")
    sp.set_defaults(fn=cmd_ablate)

    sp = sub.add_parser("scenario", help="gap-jumping demonstration")
    sp.add_argument("--tensor", required=True)
    sp.add_argument("--gap", type=float, default=experiments.DEFAULT_GAP_WIDTH)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--strategy", choices=("tmt", "immediate"), default="tmt")
    sp.add_argument("--trace-out")
    sp.set_defaults(fn=cmd_scenario)

    sp = sub.add_parser("query", help="best transition window for a pair")
    sp.add_argument("--tensor", required=True)
    sp.add_argument("--from", required=True)
    sp.add_argument("--phase", type=float, default=0.0)
    sp.add_argument("--to", required=True)
    sp.set_defaults(fn=cmd_query)

    sp = sub.add_parser("export-q", help="quality grids as CSV")
    sp.add_argument("--tensor", required=True)
    sp.add_argument("--pair", help="m:n (default: all populated pairs)")
    sp.add_argument("--csv", required=True)
    sp.set_defaults(fn=cmd_export_q)

    sp = sub.add_parser("serve", help="run the live steering service")
    sp.add_argument("--tensor", required=True)
    sp.add_argument("--port", type=int, default=8720)
    sp.add_argument("--config")
    sp.add_argument("--timescale", type=float, default=1.0)
    sp.set_defaults(fn=cmd_serve)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (TensorError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
