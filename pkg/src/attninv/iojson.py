"""File formats: JSON matrices, problem specs, and JSONL run logs.

Floats are written with 17 significant decimal digits, which round-trips
every finite double bit-exactly and keeps artifacts byte-reproducible.
Run records are persisted without the wallclock field: timing is real
measurement and would break byte-identity of repeated runs.
"""
from __future__ import annotations

import json

import numpy as np

from .model import ProblemSpec
from .solver import RunRecord


def format_float(x: float) -> str:
    if not np.isfinite(x):
        raise ValueError("artifacts may only contain finite numbers")
    return format(float(x), ".17g")


def matrix_to_json(M: np.ndarray) -> str:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    data = ", ".join(format_float(v) for v in M.reshape(-1))
    return f'{{"rows": {M.shape[0]}, "cols": {M.shape[1]}, "data": [{data}]}}'


def matrix_from_obj(obj) -> np.ndarray:
    rows, cols = int(obj["rows"]), int(obj["cols"])
    data = np.asarray(obj["data"], dtype=float)
    if data.size != rows * cols:
        raise ValueError(f"matrix data length {data.size} != {rows}*{cols}")
    return data.reshape(rows, cols)


def write_matrix(M: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        fh.write(matrix_to_json(M) + "\n")


def read_matrix(path) -> np.ndarray:
    with open(path) as fh:
        return matrix_from_obj(json.load(fh))


def problem_to_json(spec: ProblemSpec) -> str:
    parts = [
        f'"n": {spec.n}',
        f'"d": {spec.d}',
        f'"W": {matrix_to_json(spec.W)}',
        f'"V": {matrix_to_json(spec.V)}',
        f'"B": {matrix_to_json(spec.B)}',
        f'"gamma": {format_float(spec.gamma)}',
    ]
    return "{" + ", ".join(parts) + "}"


def write_problem(spec: ProblemSpec, path) -> None:
    with open(path, "w") as fh:
        fh.write(problem_to_json(spec) + "\n")


def read_problem(path) -> ProblemSpec:
    with open(path) as fh:
        obj = json.load(fh)
    return ProblemSpec(
        n=int(obj["n"]),
        d=int(obj["d"]),
        W=matrix_from_obj(obj["W"]),
        V=matrix_from_obj(obj["V"]),
        B=matrix_from_obj(obj["B"]),
        gamma=float(obj["gamma"]),
    )


def record_to_json(rec: RunRecord) -> str:
    parts = [
        f'"iter": {rec.iter}',
        f'"loss": {format_float(rec.loss)}',
        f'"grad_norm": {format_float(rec.grad_norm)}',
        f'"step_norm": {format_float(rec.step_norm)}',
        f'"damping_used": {format_float(rec.damping_used)}',
    ]
    return "{" + ", ".join(parts) + "}"


def write_run_log(path, records, meta: dict | None = None) -> None:
    """JSONL run log: an optional leading meta object, then one record per
    iteration."""
    with open(path, "w") as fh:
        if meta is not None:
            fh.write(json.dumps({"meta": meta}, sort_keys=True) + "\n")
        for rec in records:
            fh.write(record_to_json(rec) + "\n")


def read_run_log(path):
    """Parse a run log into (meta, records, skipped) where records are
    dicts and skipped counts malformed lines."""
    meta = {}
    records = []
    skipped = 0
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                skipped += 1
                continue
            if "meta" in obj:
                meta = obj["meta"]
            elif "iter" in obj:
                records.append(obj)
            else:
                skipped += 1
    return meta, records, skipped
