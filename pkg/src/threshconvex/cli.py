"""Command-line entry point: ``threshconvex <subcommand> ...``.

Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import io
from .arrangements import deep_construct, enumerate_exact, sample_arrangements
from .data import read_csv_dataset, representation_transform
from .errors import ThreshConvexError, ValidationError
from .experiment import ExperimentSpec, prepend_layer, run_experiment
from .model import RegularizedObjective, canonicalize, forward, objective
from .reconstruction import build_from_delta, build_two_layer
from .solvers import LassoProblem, closed_form_solve, critical_width, kkt_check, lasso_solve
from .ste import SURROGATES, SteConfig, multi_trial

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2


def _data_args(p):
    p.add_argument("data", help="numeric CSV with a header row")
    p.add_argument("--label-column", default="label")
    p.add_argument("--bias", action="store_true", help="append a ones column to the features")


def _load(args, labels=True):
    return read_csv_dataset(args.data, args.label_column if labels else None, bias=args.bias)


def _maybe_labels(args):
    # enumeration only needs features; tolerate files without the label column
    try:
        return _load(args)
    except ValidationError as err:
        if "label column" in str(err):
            return _load(args, labels=False)
        raise


def cmd_enumerate(args):
    data = _maybe_labels(args)
    if args.samples:
        arr = sample_arrangements(data, args.samples, args.seed)
    else:
        arr = enumerate_exact(data)
    for _ in range(args.deep_layers):
        arr = deep_construct(arr, args.width, sample_subsets=args.sample_subsets, seed=args.seed)
    io.write_arrangements(arr, args.out)
    print(f"layer {arr.layer}: {arr.P} patterns on n={arr.n} -> {args.out}")
    return EXIT_OK


def cmd_train_convex(args):
    data = _load(args)
    if args.method == "closed-form":
        if args.loss != "squared":
            raise ValidationError("closed-form method is defined for squared loss only")
        sol = closed_form_solve(data.labels, args.beta)
        io.save_solution(sol, args.out)
        print(f"objective {sol.objective_value:.12g}  dual residual {sol.kkt_residual:.3e} -> {args.out}")
        return EXIT_OK if sol.kkt_residual <= args.kkt_tol else EXIT_NUMERICAL
    if args.arrangements:
        arr = io.read_arrangements(args.arrangements)
    elif args.method == "exact":
        arr = enumerate_exact(data)
    else:
        arr = sample_arrangements(data, args.samples, args.seed)
    prob = LassoProblem(arr, data.labels, args.beta, args.loss)
    sol = lasso_solve(prob, hinge_solver=args.loss == "hinge")
    io.save_solution(sol, args.out)
    if args.arrangements_out:
        io.write_arrangements(arr, args.arrangements_out)
    print(f"patterns {arr.P}  objective {sol.objective_value:.12g}  support {len(sol.support)}  converged {sol.converged}")
    if args.loss == "hinge":
        return EXIT_OK if sol.converged else EXIT_NUMERICAL
    report = kkt_check(prob, sol, args.kkt_tol)
    print(report)
    if sol.converged:
        print(f"critical width {critical_width(sol)}")
    return EXIT_OK if report.passed and sol.converged else EXIT_NUMERICAL


def cmd_train_ste(args):
    data = _load(args)
    cfg = SteConfig(
        surrogate=args.surrogate,
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        beta=args.beta,
        seed=args.seed,
    )
    res = multi_trial(data, args.widths, cfg, args.trials)
    for i, t in enumerate(res.traces):
        flag = "  DIVERGED" if t.diverged else ""
        print(f"trial {i} seed {t.seed}: final objective {t.final_objective:.12g}{flag}")
    if args.out:
        io.dump_json(io.trace_to_dict(res.best), args.out)
    return EXIT_NUMERICAL if all(t.diverged for t in res.traces) else EXIT_OK


def cmd_reconstruct(args):
    data = _load(args)
    sol = io.load_solution(args.solution)
    if sol.is_closed_form:
        if args.representation_dim:
            rep_data, rep = representation_transform(data, args.representation_dim, args.seed)
            last = build_from_delta(rep_data, sol, method=args.method, seed=args.seed)
            net = prepend_layer(last, rep.as_layer(), data.d)
        else:
            net = build_from_delta(data, sol, method=args.method, seed=args.seed)
    else:
        if not args.arrangements:
            raise ValidationError("a Lasso solution needs --arrangements (the design it was solved on)")
        arr = io.read_arrangements(args.arrangements)
        net = build_two_layer(data, sol, arr, args.method, seed=args.seed)
    io.save_network(net, args.out)
    print(f"{net.num_neurons} neurons -> {args.out}")
    return EXIT_OK


def cmd_experiment(args):
    spec = ExperimentSpec.from_json(args.spec)
    if args.output_dir:
        doc = spec.to_dict()
        doc["output_dir"] = args.output_dir
        spec = ExperimentSpec.from_dict(doc)
    rows = run_experiment(spec)
    for r in rows:
        err = f"  ERROR {r.error}" if r.error else ""
        print(f"{r.method:14s} seed {r.seed}: objective {r.train_objective:.6g}  train acc {r.train_accuracy:.3f}{err}")
    print(f"results in {spec.output_dir}")
    return EXIT_NUMERICAL if any(r.error for r in rows) else EXIT_OK


def cmd_verify(args):
    data = _load(args)
    net = io.load_network(args.network)
    wd = objective(net, data, RegularizedObjective(args.beta, args.loss, "weight_decay"))
    l1 = objective(canonicalize(net), data, RegularizedObjective(args.beta, args.loss, "l1_canonical"))
    pred = forward(net, data)
    acc = float(np.mean(np.where(pred >= 0, 1, -1) == np.where(data.labels >= 0, 1, -1)))
    print(f"weight-decay objective {wd:.12g}")
    print(f"canonical l1 objective {l1:.12g}")
    print(f"sign accuracy {acc:.4f}  neurons {net.num_neurons}")
    code = EXIT_OK
    if args.solution:
        sol = io.load_solution(args.solution)
        gap = abs(l1 - sol.objective_value)
        ok = gap <= args.tol * max(1.0, abs(sol.objective_value))
        print(f"convex objective {sol.objective_value:.12g}  gap {gap:.3e}  {'MATCH' if ok else 'MISMATCH'}")
        code = EXIT_OK if ok else EXIT_NUMERICAL
        if args.arrangements and not sol.is_closed_form:
            arr = io.read_arrangements(args.arrangements)
            report = kkt_check(LassoProblem(arr, data.labels, sol.beta, sol.loss), sol, args.tol)
            print(report)
            if not report.passed:
                code = EXIT_NUMERICAL
    return code


def build_parser():
    parser = argparse.ArgumentParser(prog="threshconvex", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", help="data -> arrangement file")
    _data_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--samples", type=int, default=0, help="sample this many random directions instead of exact enumeration")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--deep-layers", type=int, default=0, help="apply the width-subset construction this many times")
    p.add_argument("--width", type=int, default=2)
    p.add_argument("--sample-subsets", type=int, default=None)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("train-convex", help="solve the convex program")
    _data_args(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--method", choices=("exact", "sampled", "closed-form"), default="exact")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--loss", choices=("squared", "logistic", "hinge"), default="squared")
    p.add_argument("--arrangements", help="reuse this arrangement file as the design")
    p.add_argument("--arrangements-out", help="also write the design used")
    p.add_argument("--kkt-tol", type=float, default=1e-6)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_convex)

    p = sub.add_parser("train-ste", help="straight-through estimator baseline")
    _data_args(p)
    p.add_argument("--surrogate", choices=SURROGATES, default="identity")
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--widths", type=int, nargs="+", default=[50])
    p.add_argument("--beta", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the best trace as JSON")
    p.set_defaults(func=cmd_train_ste)

    p = sub.add_parser("reconstruct", help="solution + data -> network JSON")
    p.add_argument("solution")
    _data_args(p)
    p.add_argument("--arrangements")
    p.add_argument("--method", choices=("witness", "pinv", "svm"), default="witness")
    p.add_argument("--representation-dim", type=int, default=0, help="closed form only: random threshold features first")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("experiment", help="spec JSON -> output directory")
    p.add_argument("spec")
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("verify", help="network JSON + data -> objective / KKT report")
    p.add_argument("network")
    _data_args(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--loss", choices=("squared", "logistic", "hinge"), default="squared")
    p.add_argument("--solution")
    p.add_argument("--arrangements")
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ThreshConvexError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.exit_code
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
