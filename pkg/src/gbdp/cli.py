"""Command line entry point.

    gbdp train    --config c.toml --iters 100 --seed 0 --out-dir runs/a
    gbdp validate --config c.toml --cuts runs/a/cuts.store --samples 1000
    gbdp bounds   --validation runs/a/validation.csv --alpha 0.1 --alpha-e 0.1
    gbdp exact    --config c.toml
    gbdp compare  --config c.toml --cuts runs/a/cuts.store
    gbdp plots    --trace runs/a/trace.csv --validation runs/a/validation.csv

Relative output paths resolve against ``--out-dir`` when given, else the
``GBDP_OUT_DIR`` environment variable, else the working directory.

Exit codes: 0 success, 2 bad configuration, 3 violated precondition,
4 exact-solve budget exceeded.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import report
from .bounds import ALL_BOUNDS, compute_bounds
from .cuts import CutStack
from .errors import BudgetExceeded, ConfigError
from .model import load_instance
from .oracle import DEFAULT_BUDGET, ExactValueTable, solve_exact
from .trainer import OPTIMIZERS, train
from .validator import profit_support, summarize, validate

log = logging.getLogger("gbdp")

OUT_DIR_ENV = "GBDP_OUT_DIR"
SUMMARY_SUFFIX = ".summary.json"


def out_path(args, name) -> Path:
    p = Path(name)
    if p.is_absolute():
        return p
    base = args.out_dir or os.environ.get(OUT_DIR_ENV) or "."
    return Path(base) / p


def positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def summary_path(validation_csv) -> Path:
    p = Path(validation_csv)
    return p.with_name(p.stem + SUMMARY_SUFFIX)


def cmd_train(args):
    inst = load_instance(args.config)
    if args.iters < 1:
        raise ValueError("--iters must be >= 1")

    def progress(i, cuts, trace):
        if i % max(1, args.iters // 10) == 0:
            log.info("iter %d  u=%.6g  l=%.6g  planes=%d", i, trace.u[-1], trace.l[-1],
                     int(cuts.counts[1:].sum()))

    cuts, trace = train(inst, args.iters, seed=args.seed, resample_mode=args.resample_mode,
                        optimizer=args.optimizer, init=args.init, budget=args.budget,
                        callback=progress)
    trace_file = report.write_trace(trace, out_path(args, "trace.csv"))
    store = out_path(args, "cuts.store")
    cuts.save(store)
    print(f"u={trace.u[-1]:.17g} mean_l={np.mean(trace.l):.17g}")
    print(f"wrote {trace_file} and {store}")


def cmd_validate(args):
    inst = load_instance(args.config)
    cuts = CutStack.load(args.cuts)
    summ = validate(cuts, inst, args.samples, seed=args.seed, optimizer=args.optimizer)
    out = out_path(args, args.out)
    report.write_rows(out, ["k", "l_v"],
                      [[k + 1, report.money(v)] for k, v in enumerate(summ.samples)])
    meta = {"k": summ.k, "mean": summ.mean, "std": summ.std,
            "support_lo": summ.support_lo, "support_hi": summ.support_hi}
    summary_path(out).write_text(json.dumps(meta, indent=2) + "\n")
    print(f"mean={summ.mean:.17g} std={summ.std:.17g} "
          f"support=[{summ.support_lo:.17g}, {summ.support_hi:.17g}]")
    print(f"wrote {out}")


def load_validation(path, config=None):
    cols = report.read_columns(path)
    samples = np.array(cols["l_v"], dtype=np.float64)
    side = summary_path(path)
    if config is not None:
        support = profit_support(load_instance(config))
    elif side.exists():
        meta = json.loads(side.read_text())
        support = (meta["support_lo"], meta["support_hi"])
    else:
        raise ValueError(f"no support information: pass --config or keep {side.name} next to the samples")
    return summarize(samples, support)


def parse_bounds(text):
    if text == "all":
        return ALL_BOUNDS
    names = tuple(s.strip() for s in text.split(",") if s.strip())
    bad = [n for n in names if n not in ALL_BOUNDS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown bounds {bad}; choose from {', '.join(ALL_BOUNDS)}")
    return names


def parse_theta_d(text):
    return text if text == "auto" else float(text)


def cmd_bounds(args):
    summ = load_validation(args.validation, args.config)
    reps = compute_bounds(summ.samples, (summ.support_lo, summ.support_hi), alpha=args.alpha,
                          alpha_e=args.alpha_e, names=args.bounds, theta_d=args.theta_d,
                          theta_c=args.theta_c, paper_literal_bernstein=args.paper_bernstein)
    rows = []
    for r in reps:
        params = ";".join(f"{k}={v}" for k, v in r.params.items())
        rows.append([r.name, report.money(r.alpha), report.money(r.value), params, int(r.available)])
        shown = f"{r.value:.6f}" if r.available else f"unavailable ({r.reason})"
        print(f"{r.name:16s} {shown}")
    out = report.write_rows(out_path(args, args.out),
                            ["bound", "alpha", "value", "params", "available"], rows)
    print(f"wrote {out}")


def cmd_exact(args):
    inst = load_instance(args.config)
    table = solve_exact(inst, args.budget)
    out = out_path(args, args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(out)
    print(f"V_1(0)={table.values[0, 0]:.17g}")
    print(f"wrote {out}")


def cmd_compare(args):
    inst = load_instance(args.config)
    cuts = CutStack.load(args.cuts)
    if args.exact:
        table = ExactValueTable.from_csv(args.exact, inst)
    else:
        table = solve_exact(inst, args.budget)
    rep = report.run_compare(table, cuts, inst)
    out = report.write_gaps(rep, out_path(args, args.out))
    print(f"min_gap={rep.min_gap:.17g} max_gap={rep.max_gap:.17g} u_gap={rep.u_gap:.17g}")
    print("upper bound holds" if rep.is_upper_bound else "UPPER BOUND VIOLATED")
    print(f"wrote {out}")
    return 0 if rep.is_upper_bound else 1


def cmd_plots(args):
    if not (args.trace or args.validation):
        raise ValueError("give --trace and/or --validation")
    written = []
    if args.trace:
        written.append(report.converge_table(args.trace, out_path(args, "fig_converge.csv")))
    if args.validation:
        summ = load_validation(args.validation, args.config)
        written.append(report.hist_table(summ.samples, out_path(args, "fig_hist.csv"), args.bins))
        written.append(report.bounds_table(summ.samples, (summ.support_lo, summ.support_hi),
                                           out_path(args, "fig_bounds.csv")))
    for w in written:
        print(f"wrote {w}")


def build_parser():
    p = argparse.ArgumentParser(prog="gbdp", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out-dir", default=None, help=f"output directory (default ${OUT_DIR_ENV} or .)")
        return sp

    sp = common(sub.add_parser("train", help="train cuts"))
    sp.add_argument("--config", required=True)
    sp.add_argument("--iters", type=positive_int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--resample-mode", choices=["off", "oracle"], default="off")
    sp.add_argument("--optimizer", choices=sorted(OPTIMIZERS), default="coordinate")
    sp.add_argument("--init", choices=["fixed_point", "infinity"], default="fixed_point")
    sp.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    sp.set_defaults(func=cmd_train)

    sp = common(sub.add_parser("validate", help="simulate the trained policy"))
    sp.add_argument("--config", required=True)
    sp.add_argument("--cuts", required=True)
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--optimizer", choices=sorted(OPTIMIZERS), default="coordinate")
    sp.add_argument("--out", default="validation.csv")
    sp.set_defaults(func=cmd_validate)

    sp = common(sub.add_parser("bounds", help="profit bounds from validation samples"))
    sp.add_argument("--validation", required=True)
    sp.add_argument("--config", default=None, help="recompute the support from this instance")
    sp.add_argument("--alpha", type=float, default=0.1)
    sp.add_argument("--alpha-e", type=float, default=0.1)
    sp.add_argument("--bounds", type=parse_bounds, default=ALL_BOUNDS)
    sp.add_argument("--theta-d", type=parse_theta_d, default="auto")
    sp.add_argument("--theta-c", type=float, default=0.0)
    sp.add_argument("--paper-bernstein", action="store_true",
                    help="use the std instead of the variance in the Bernstein bound")
    sp.add_argument("--out", default="bounds.csv")
    sp.set_defaults(func=cmd_bounds)

    sp = common(sub.add_parser("exact", help="exact value table for a small instance"))
    sp.add_argument("--config", required=True)
    sp.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    sp.add_argument("--out", default="exact.csv")
    sp.set_defaults(func=cmd_exact)

    sp = common(sub.add_parser("compare", help="gaps between trained cuts and the exact values"))
    sp.add_argument("--config", required=True)
    sp.add_argument("--cuts", required=True)
    sp.add_argument("--exact", default=None, help="exact table CSV (solved if omitted)")
    sp.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    sp.add_argument("--out", default="gaps.csv")
    sp.set_defaults(func=cmd_compare)

    sp = common(sub.add_parser("plots", help="CSV tables for convergence, histogram and bounds figures"))
    sp.add_argument("--trace", default=None)
    sp.add_argument("--validation", default=None)
    sp.add_argument("--config", default=None)
    sp.add_argument("--bins", type=positive_int, default=20)
    sp.set_defaults(func=cmd_plots)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args) or 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return 4
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
