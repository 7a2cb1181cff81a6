"""File formats: arrangement text files, JSON for solutions, networks and traces.

JSON floats are written with ``repr`` precision, so arrays round-trip bit-exactly.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .arrangements import ArrangementMatrix, ArrangementPattern
from .errors import ValidationError
from .model import Layer, Subnetwork, ThresholdNetwork
from .solvers import ConvexSolution
from .ste import TrainTrace

FORMAT_VERSION = 1


def _witness_path(path):
    path = Path(path)
    return path.with_name(path.name + ".witness.csv")


def write_arrangements(arr: ArrangementMatrix, path, witnesses: bool = True):
    """Header ``n P layer`` then one 0/1 string per pattern; witnesses go to a CSV sidecar."""
    path = Path(path)
    lines = [f"{arr.n} {arr.P} {arr.layer}"] + arr.bit_strings()
    path.write_text("\n".join(lines) + "\n")
    if witnesses and arr.P and all(p.witness is not None for p in arr.patterns):
        lengths = {p.witness.shape[0] for p in arr.patterns}
        if len(lengths) == 1:
            with _witness_path(path).open("w", newline="") as fh:
                writer = csv.writer(fh)
                for p in arr.patterns:
                    writer.writerow([repr(float(x)) for x in p.witness])


def read_arrangements(path) -> ArrangementMatrix:
    path = Path(path)
    lines = [ln.strip() for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        raise ValidationError(f"{path}: empty arrangement file")
    try:
        n, P, layer = (int(t) for t in lines[0].split())
    except ValueError:
        raise ValidationError(f"{path}: header must be 'n P layer', got {lines[0]!r}") from None
    body = lines[1:]
    if len(body) != P:
        raise ValidationError(f"{path}: header announces {P} patterns, found {len(body)}")
    wit = None
    side = _witness_path(path)
    if side.exists():
        with side.open(newline="") as fh:
            wit = [np.array([float(x) for x in row]) for row in csv.reader(fh) if row]
        if len(wit) != P:
            raise ValidationError(f"{side}: {len(wit)} witness rows for {P} patterns")
    pats = []
    for i, s in enumerate(body):
        if len(s) != n or set(s) - {"0", "1"}:
            raise ValidationError(f"{path}: line {i + 2} is not a 0/1 string of length {n}")
        bits = np.frombuffer(s.encode(), dtype=np.uint8) - ord("0")
        pats.append(ArrangementPattern.from_bits(bits, None if wit is None else wit[i]))
    return ArrangementMatrix(tuple(pats), n, layer)


def _list(a):
    return None if a is None else np.asarray(a, dtype=float).tolist()


def solution_to_dict(sol: ConvexSolution) -> dict:
    doc = {
        "objective": sol.objective_value,
        "beta": sol.beta,
        "loss": sol.loss,
        "support": list(sol.support),
        "kkt_residual": sol.kkt_residual,
        "iterations": sol.iterations,
        "converged": sol.converged,
    }
    if sol.delta is not None:
        doc["delta"] = _list(sol.delta)
    else:
        doc["coefficients"] = _list(sol.coefficients)
    return doc


def solution_from_dict(doc: dict) -> ConvexSolution:
    try:
        coef = doc.get("coefficients")
        delta = doc.get("delta")
        if (coef is None) == (delta is None):
            raise ValidationError("solution needs exactly one of 'coefficients' or 'delta'")
        return ConvexSolution(
            objective_value=float(doc["objective"]),
            beta=float(doc["beta"]),
            loss=str(doc["loss"]),
            coefficients=None if coef is None else np.array(coef, dtype=float),
            delta=None if delta is None else np.array(delta, dtype=float),
            support=tuple(int(i) for i in doc["support"]),
            kkt_residual=float(doc["kkt_residual"]),
            iterations=int(doc["iterations"]),
            converged=bool(doc["converged"]),
        )
    except KeyError as err:
        raise ValidationError(f"solution document is missing field {err}") from None


def network_to_dict(net: ThresholdNetwork) -> dict:
    return {
        "version": FORMAT_VERSION,
        "input_dim": net.input_dim,
        "subnetworks": [
            {
                "layers": [
                    {
                        "weights": layer.weights.tolist(),
                        "amplitudes": layer.amplitudes.tolist(),
                        "shifts": layer.shifts.tolist(),
                    }
                    for layer in sub.layers
                ],
                "output": sub.output.tolist(),
            }
            for sub in net.subnetworks
        ],
    }


def network_from_dict(doc: dict) -> ThresholdNetwork:
    try:
        d = int(doc["input_dim"])
        subs = []
        for s in doc["subnetworks"]:
            layers = []
            for layer in s["layers"]:
                W = np.array(layer["weights"], dtype=float).reshape(-1, len(layer["amplitudes"]))
                layers.append(Layer(W, layer["amplitudes"], layer.get("shifts")))
            subs.append(Subnetwork(tuple(layers), s["output"]))
    except (KeyError, TypeError) as err:
        raise ValidationError(f"malformed network document: {err}") from None
    return ThresholdNetwork(d, tuple(subs))


def trace_to_dict(trace: TrainTrace) -> dict:
    return {
        "objectives": list(trace.objectives),
        "learning_rates": list(trace.learning_rates),
        "seconds": trace.seconds,
        "seed": trace.seed,
        "diverged": trace.diverged,
        "config": trace.config,
        "network": network_to_dict(trace.network),
    }


def trace_from_dict(doc: dict) -> TrainTrace:
    return TrainTrace(
        objectives=[float(v) for v in doc["objectives"]],
        network=network_from_dict(doc["network"]),
        seconds=float(doc["seconds"]),
        seed=int(doc["seed"]),
        diverged=bool(doc["diverged"]),
        learning_rates=[float(v) for v in doc.get("learning_rates", [])],
        config=dict(doc.get("config", {})),
    )


def dump_json(doc, path):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_json(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ValidationError(f"{path}: invalid JSON ({err})") from None


def save_network(net, path):
    dump_json(network_to_dict(net), path)


def load_network(path) -> ThresholdNetwork:
    return network_from_dict(load_json(path))


def save_solution(sol, path):
    dump_json(solution_to_dict(sol), path)


def load_solution(path) -> ConvexSolution:
    return solution_from_dict(load_json(path))
