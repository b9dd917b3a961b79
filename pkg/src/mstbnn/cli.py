"""Command-line surface: gen, analyze, schedule, simulate, compare, train.

Exit codes: 0 success, 1 verification failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from mstbnn import baselines, formats, schedule as sched, simulate, train as train_mod
from mstbnn.core import LayerShape, random_activation, random_layer

METHODS = ("standard", "mst", "kmedoid", "hampath")

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


class VerifyError(Exception):
    pass


def _shape_from_args(args) -> LayerShape:
    vals = args.shape
    if len(vals) not in (5, 6):
        raise UsageError("--shape takes c_out c_in m h_in w_in [pad]")
    try:
        return LayerShape(*vals)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_gen(args) -> int:
    shape = _shape_from_args(args)
    layer = random_layer(shape, args.seed)
    formats.write_bwt(layer, args.out)
    print(f"wrote {shape.c_out}x{shape.c_in}x{shape.m}x{shape.m} layer to {args.out}")
    if args.act_out:
        act = random_activation(shape, args.seed + 1)
        formats.write_bac(act, args.act_out)
        print(f"wrote activation map to {args.act_out}")
    return EXIT_OK


def _hampath_allowed(c_out: int) -> bool:
    return c_out <= baselines.HELD_KARP_MAX_VERTICES


def cmd_analyze(args) -> int:
    layer = formats.read_bwt(args.weights)
    methods = args.methods.split(",") if args.methods else list(METHODS)
    for m in methods:
        if m not in METHODS:
            raise UsageError(f"unknown method {m!r}")
    rows = []
    for m in methods:
        if m == "hampath" and not _hampath_allowed(layer.shape.c_out):
            print(f"warning: skipping hampath (c_out={layer.shape.c_out} > "
                  f"{baselines.HELD_KARP_MAX_VERTICES})", file=sys.stderr)
            rows.append(f"hampath,skipped (c_out={layer.shape.c_out} too large),,,,,,")
            continue
        s, dt = sched.make_schedule(layer, m, r=args.centers, seed=args.seed)
        rows.append(sched.cost_report(s, args.adders_per_stage, dt).csv_row())
    text = sched.CostReport.CSV_HEADER + "\n" + "\n".join(rows) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    print(text, end="")
    return EXIT_OK


def cmd_schedule(args) -> int:
    layer = formats.read_bwt(args.weights)
    if args.method == "hampath" and not _hampath_allowed(layer.shape.c_out):
        raise UsageError(
            f"hampath needs c_out <= {baselines.HELD_KARP_MAX_VERTICES}, "
            f"layer has {layer.shape.c_out}"
        )
    s, _ = sched.make_schedule(layer, args.method, r=args.centers, seed=args.seed)
    sched.write_schedule(s, args.out)
    print(f"wrote {args.method} schedule ({sched.params_bits(s)} weight bits, "
          f"depth {sched.schedule_depth(s)}) to {args.out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    layer = formats.read_bwt(args.weights)
    act = formats.read_bac(args.activations)
    s = sched.read_schedule(args.schedule, layer)
    report = simulate.assert_equivalent(layer, act, s)
    for c, d in enumerate(report.max_abs_diff):
        print(f"channel {c}: max deviation {int(d)}")
    if args.out:
        simulate.write_output_map(simulate.reuse_eval(s, act), args.out)
    if report.passed:
        print("PASS")
        return EXIT_OK
    print(f"FAIL at channels {report.failing_channels()}")
    return EXIT_VERIFY


def cmd_compare(args) -> int:
    shape = _shape_from_args(args)
    use_hampath = _hampath_allowed(shape.c_out)
    if not use_hampath:
        print(f"note: hampath skipped (c_out={shape.c_out} > "
              f"{baselines.HELD_KARP_MAX_VERTICES})", file=sys.stderr)
    methods = [m for m in METHODS if use_hampath or m != "hampath"]
    bitops = {m: [] for m in methods}
    times = {m: [] for m in methods}
    violations = 0
    for trial in range(args.trials):
        layer = random_layer(shape, args.seed + trial)
        per = {}
        for m in methods:
            s, dt = sched.make_schedule(layer, m, r=args.centers,
                                        seed=args.seed + trial)
            per[m] = sched.bitops_total(s)
            bitops[m].append(per[m])
            times[m].append(dt)
        if per["mst"] > per["standard"]:
            violations += 1
        if use_hampath and not (per["mst"] <= per["hampath"] <= per["standard"]):
            violations += 1
        if per["mst"] > per["kmedoid"]:
            violations += 1
    print("method,mean_bitops,mean_exploration_seconds")
    for m in methods:
        print(f"{m},{np.mean(bitops[m]):.1f},{np.mean(times[m]):.6f}")
    if violations:
        print(f"FAIL: {violations} ordering violations")
        return EXIT_VERIFY
    print("orderings hold on all trials")
    return EXIT_OK


def cmd_train(args) -> int:
    lams = [float(t) for t in args.sweep.split(",")] if args.sweep else [args.lam]
    rows = []
    for lam in lams:
        config = train_mod.TrainConfig(
            lam=lam, gamma0=args.gamma0, epochs=args.epochs,
            lr0=args.lr0, seed=args.seed,
            n_centers=args.centers if args.centers else 1,
        )
        try:
            result = train_mod.train_toy(config)
        except train_mod.TrainingDiverged as exc:
            print(f"training diverged: {exc}", file=sys.stderr)
            return EXIT_VERIFY
        final = result.final
        rows.append(f"{lam:g},{final.test_acc:.4f},{final.sum_mst_distance},"
                    f"{final.max_depth},{final.params_bits}")
        if args.out:
            train_mod.write_metrics(result.history, args.out)
        for i, layer in enumerate(result.binary_layers()):
            if args.weights_prefix:
                formats.write_bwt(layer, f"{args.weights_prefix}.l{i}.bwt")
    print("lambda,test_acc,sum_mst_distance,max_depth,params_bits")
    for row in rows:
        print(row)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mstbnn")
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--seed", type=int, default=0)

    g = sub.add_parser("gen", help="generate a random binary layer (BWT1)")
    g.add_argument("--shape", type=int, nargs="+", required=True,
                   metavar="DIM", help="c_out c_in m h_in w_in [pad]")
    g.add_argument("--out", required=True)
    g.add_argument("--act-out", help="also write a random activation map (BAC1)")
    add_common(g)
    g.set_defaults(func=cmd_gen)

    a = sub.add_parser("analyze", help="cost report per method")
    a.add_argument("weights")
    a.add_argument("--methods", help="comma list, default all")
    a.add_argument("--centers", type=int, default=2, metavar="R")
    a.add_argument("--adders-per-stage", type=int, default=1)
    a.add_argument("--out")
    add_common(a)
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("schedule", help="write a compute schedule file")
    s.add_argument("weights")
    s.add_argument("--method", choices=METHODS, default="mst")
    s.add_argument("--centers", type=int, default=2, metavar="R")
    s.add_argument("--out", required=True)
    add_common(s)
    s.set_defaults(func=cmd_schedule)

    m = sub.add_parser("simulate", help="check reuse evaluation against direct")
    m.add_argument("weights")
    m.add_argument("activations")
    m.add_argument("schedule")
    m.add_argument("--out", help="write reuse outputs as structured text")
    add_common(m)
    m.set_defaults(func=cmd_simulate)

    c = sub.add_parser("compare", help="cross-method orderings on random layers")
    c.add_argument("--shape", type=int, nargs="+", default=[16, 16, 3, 32, 32],
                   metavar="DIM")
    c.add_argument("--trials", type=int, default=10)
    c.add_argument("--centers", type=int, default=2, metavar="R")
    add_common(c)
    c.set_defaults(func=cmd_compare)

    t = sub.add_parser("train", help="toy training with the distance regularizer")
    t.add_argument("--lambda", dest="lam", type=float, default=1e-4)
    t.add_argument("--sweep", help="comma list of lambda values")
    t.add_argument("--gamma0", type=float, default=1.0)
    t.add_argument("--epochs", type=int, default=20)
    t.add_argument("--lr0", type=float, default=0.05)
    t.add_argument("--centers", type=int, default=1, metavar="N")
    t.add_argument("--out", help="metrics CSV path")
    t.add_argument("--weights-prefix", help="write final binary layers as BWT1")
    add_common(t)
    t.set_defaults(func=cmd_train)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (formats.FormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
