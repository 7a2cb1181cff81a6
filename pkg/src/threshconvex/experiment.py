"""Method x seed experiment runner writing metrics.csv, timings.csv, curves.csv and JSON artifacts."""
from __future__ import annotations

import csv
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import io
from .arrangements import enumerate_exact, sample_arrangements
from .data import gen_synthetic, load_csv, representation_transform, toy_csv_path
from .errors import ThreshConvexError, ValidationError
from .model import Dataset, Subnetwork, ThresholdNetwork, forward
from .reconstruction import build_from_delta, build_two_layer
from .solvers import LassoProblem, closed_form_solve, kkt_check, lasso_solve
from .ste import SURROGATES, SteConfig, ste_train

log = logging.getLogger(__name__)

CONVEX_METHODS = ("convex-lasso", "convex-exact", "convex-pi", "convex-svm")
DATASET_SOURCES = ("csv", "synthetic", "one_d")
WORKERS_ENV = "THRESHCONVEX_WORKERS"
KKT_TOL = 1e-6
_STE_KEYS = {f.name for f in fields(SteConfig)} - {"surrogate", "beta", "seed", "loss_kind"}


def _check_method(m):
    if m in CONVEX_METHODS:
        return
    if m.startswith("ste:") and m[4:] in SURROGATES:
        return
    raise ValidationError(
        f"unknown method {m!r}; expected one of {CONVEX_METHODS} or ste:<{'|'.join(SURROGATES)}>"
    )


@dataclass(frozen=True)
class ExperimentSpec:
    """What to run.

    ``dataset`` is one of
    ``{"source": "csv", "path": ..., "label_column": ...}``,
    ``{"source": "synthetic", "kind": ..., "n": ..., "d": ..., "seed": ..., "n_test": ..., "bias": ...}``
    or ``{"source": "one_d"}``.  ``ste`` holds SteConfig overrides
    (learning_rate, epochs, batch_size, ...).
    """

    name: str
    dataset: dict
    methods: tuple
    beta: float
    widths: tuple
    seeds: tuple
    output_dir: str
    split_ratio: float = 0.8
    loss: str = "squared"
    ste: dict = field(default_factory=dict)
    representation_dim: int = 1000
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.methods:
            raise ValidationError("experiment needs at least one method")
        for m in self.methods:
            _check_method(m)
        if len(set(self.methods)) != len(self.methods):
            raise ValidationError("duplicate methods in experiment spec")
        if not self.seeds:
            raise ValidationError("experiment needs at least one seed")
        if not self.widths or any(w < 1 for w in self.widths):
            raise ValidationError("widths must list at least one positive layer size")
        if not 0 < self.split_ratio < 1:
            raise ValidationError(f"split_ratio must lie in (0, 1), got {self.split_ratio}")
        if not self.beta >= 0:
            raise ValidationError("beta must be nonnegative")
        if self.loss not in ("squared", "logistic"):
            raise ValidationError(f"experiment loss must be squared or logistic, got {self.loss!r}")
        if self.representation_dim < 1 or self.workers < 1:
            raise ValidationError("representation_dim and workers must be positive")
        unknown = set(self.ste) - _STE_KEYS
        if unknown:
            raise ValidationError(f"unknown ste options {sorted(unknown)}; allowed {sorted(_STE_KEYS)}")
        src = self.dataset.get("source")
        if src not in DATASET_SOURCES:
            raise ValidationError(f"dataset source must be one of {DATASET_SOURCES}, got {src!r}")
        if src == "csv" and "path" not in self.dataset:
            raise ValidationError("csv dataset needs a 'path'")
        if src == "synthetic" and "kind" not in self.dataset:
            raise ValidationError("synthetic dataset needs a 'kind'")

    @classmethod
    def from_dict(cls, doc: dict, base_dir=None) -> "ExperimentSpec":
        allowed = {f.name for f in fields(cls)}
        unknown = set(doc) - allowed
        if unknown:
            raise ValidationError(f"unknown experiment fields {sorted(unknown)}")
        missing = {"name", "dataset", "methods", "beta", "widths", "seeds"} - set(doc)
        if missing:
            raise ValidationError(f"experiment spec is missing {sorted(missing)}")
        doc = dict(doc)
        doc.setdefault("output_dir", doc["name"])
        ds = dict(doc["dataset"])
        if base_dir is not None:
            # relative paths are resolved against the spec file's directory
            if ds.get("source") == "csv" and ds.get("path") not in (None, "toy"):
                ds["path"] = str(Path(base_dir) / ds["path"])
            doc["output_dir"] = str(Path(base_dir) / doc["output_dir"])
        doc["dataset"] = ds
        return cls(**doc)

    @classmethod
    def from_json(cls, path) -> "ExperimentSpec":
        path = Path(path)
        return cls.from_dict(io.load_json(path), base_dir=path.parent)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("methods", "widths", "seeds"):
            d[k] = list(d[k])
        return d


@dataclass
class MetricsRow:
    method: str
    seed: int
    train_objective: float = float("nan")
    train_accuracy: float = float("nan")
    test_accuracy: float = float("nan")
    wall_seconds: float = 0.0
    converged: bool = False
    kkt_passed: bool = False
    error: str = ""


METRIC_COLUMNS = ("method", "seed", "train_objective", "train_accuracy", "test_accuracy", "converged", "kkt_passed", "error")


def accuracy(pred, labels) -> float:
    """Sign agreement with the labels (0 counts as +1)."""
    if len(labels) == 0:
        return float("nan")
    return float(np.mean(np.where(pred >= 0, 1.0, -1.0) == np.where(labels >= 0, 1.0, -1.0)))


def load_data(spec: ExperimentSpec, seed: int):
    """(train, test) for one seed; test is None when the source has no held-out rows."""
    ds = spec.dataset
    src = ds["source"]
    if src == "csv":
        path = toy_csv_path() if ds["path"] == "toy" else ds["path"]
        return load_csv(path, ds.get("label_column", "label"), spec.split_ratio, seed)
    if src == "one_d":
        data = gen_synthetic("one_d", seed=int(ds.get("seed", seed)))
        return data, None
    n = int(ds.get("n", 20))
    n_test = int(ds.get("n_test", 0))
    full = gen_synthetic(ds["kind"], n + n_test, int(ds.get("d", 5)), int(ds.get("seed", seed)), bool(ds.get("bias", False)))
    X, y = full.features, full.labels
    test = Dataset(X[n:], y[n:], full.has_bias) if n_test > 0 else None
    return Dataset(X[:n], y[:n], full.has_bias), test


def _run_convex(spec, method, seed, train):
    beta = spec.beta
    if method in ("convex-lasso", "convex-exact"):
        if method == "convex-lasso":
            arr = sample_arrangements(train, spec.widths[0], seed)
        else:
            arr = enumerate_exact(train)
        prob = LassoProblem(arr, train.labels, beta, spec.loss)
        sol = lasso_solve(prob)
        kkt = kkt_check(prob, sol, KKT_TOL)
        net = build_two_layer(train, sol, arr, "witness", seed=seed)
        return sol, net, kkt.passed, {"patterns": arr.P, "kkt_max_violation": kkt.max_violation}
    if spec.loss != "squared":
        raise ValidationError(f"{method} solves the closed form, which is defined for squared loss only")
    rep_data, rep = representation_transform(train, spec.representation_dim, seed)
    sol = closed_form_solve(train.labels, beta)
    realize = "pinv" if method == "convex-pi" else "svm"
    last = build_from_delta(rep_data, sol, method=realize, seed=seed)
    net = prepend_layer(last, rep.as_layer(), train.d)
    return sol, net, sol.kkt_residual <= KKT_TOL, {"representation_dim": spec.representation_dim}


def prepend_layer(net, layer, d):
    subs = tuple(Subnetwork((layer,) + sub.layers, sub.output) for sub in net.subnetworks)
    return ThresholdNetwork(d, subs)


def _run_cell(spec: ExperimentSpec, method: str, seed: int, out: Path):
    row = MetricsRow(method, seed)
    artifact = {"spec": spec.to_dict(), "method": method, "seed": seed}
    curve = None
    start = time.perf_counter()
    try:
        train, test = load_data(spec, seed)
        if method.startswith("ste:"):
            cfg = SteConfig(surrogate=method[4:], beta=spec.beta, seed=seed, loss_kind=spec.loss, **spec.ste)
            trace = ste_train(train, spec.widths, cfg)
            net = trace.network
            row.train_objective = trace.final_objective
            row.converged = not trace.diverged
            curve = list(trace.objectives)
            artifact["trace"] = io.trace_to_dict(trace)
        else:
            sol, net, passed, extra = _run_convex(spec, method, seed, train)
            row.train_objective = sol.objective_value
            row.converged = bool(sol.converged)
            row.kkt_passed = bool(passed)
            artifact["solution"] = io.solution_to_dict(sol)
            artifact["details"] = extra
            artifact["network"] = io.network_to_dict(net)
        row.train_accuracy = accuracy(forward(net, train), train.labels)
        if test is not None:
            row.test_accuracy = accuracy(forward(net, test), test.labels)
    except (ThreshConvexError, np.linalg.LinAlgError, FloatingPointError) as err:
        row.error = f"{type(err).__name__}: {err}"
        log.warning("cell %s seed %d failed: %s", method, seed, row.error)
    row.wall_seconds = time.perf_counter() - start
    artifact["metrics"] = asdict(row)
    io.dump_json(artifact, out / "runs" / f"{method.replace(':', '-')}_seed{seed}.json")
    return row, curve


def worker_count(spec: ExperimentSpec) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env is None:
        return spec.workers
    try:
        cap = int(env)
    except ValueError:
        raise ValidationError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
    if cap < 1:
        raise ValidationError(f"{WORKERS_ENV} must be >= 1")
    return min(spec.workers, cap) if spec.workers > 1 else cap


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return "%.12g" % v
    return str(v)


def run_experiment(spec: ExperimentSpec):
    """Run every method x seed cell; returns MetricsRows in (method, seed) order."""
    out = Path(spec.output_dir)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    io.dump_json(spec.to_dict(), out / "spec.json")
    cells = [(m, s) for m in spec.methods for s in spec.seeds]
    workers = worker_count(spec)
    if workers == 1:
        results = [_run_cell(spec, m, s, out) for m, s in cells]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: _run_cell(spec, c[0], c[1], out), cells))
    rows = [r for r, _ in results]

    with (out / "metrics.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) for c in METRIC_COLUMNS])
    with (out / "timings.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("method", "seed", "wall_seconds"))
        for r in rows:
            w.writerow([r.method, r.seed, "%.6f" % r.wall_seconds])

    # horizontal reference: best certified convex objective per seed
    reference = {}
    for r in rows:
        if r.method in CONVEX_METHODS and r.kkt_passed and not r.error:
            reference[r.seed] = min(reference.get(r.seed, np.inf), r.train_objective)
    with (out / "curves.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("method", "seed", "epoch", "objective", "convex_optimum"))
        for r, curve in results:
            if curve is None:
                continue
            ref = _fmt(float(reference[r.seed])) if r.seed in reference else ""
            for epoch, v in enumerate(curve, start=1):
                w.writerow([r.method, r.seed, epoch, _fmt(float(v)), ref])
    return rows
