"""Serialization: matrix JSON fixtures and CSV/JSON experiment reports."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from schatten_lab.linalg import as_matrix


def matrix_to_dict(X) -> dict:
    X = as_matrix(X)
    if X.shape[0] != X.shape[1]:
        raise ValueError("matrix JSON format stores square matrices")
    return {"n": int(X.shape[0]), "re": X.real.tolist(), "im": X.imag.tolist()}


def matrix_from_dict(d: dict) -> np.ndarray:
    try:
        n = int(d["n"])
        re = np.asarray(d["re"], dtype=float)
        im = np.asarray(d.get("im", np.zeros((n, n))), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed matrix JSON: {exc}") from exc
    if re.shape != (n, n) or im.shape != (n, n):
        raise ValueError(f"malformed matrix JSON: expected {n}x{n} 're' and 'im' arrays")
    return as_matrix(re + 1j * im)


def dumps(obj) -> str:
    # json writes floats with repr, i.e. the shortest string that round-trips (<= 17 digits).
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def write_matrix(path: Path, X) -> None:
    Path(path).write_text(dumps(matrix_to_dict(X)))


def read_matrix(path: Path) -> np.ndarray:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed matrix JSON in {path}: {exc}") from exc
    return matrix_from_dict(data)


def params_hash(params: dict) -> str:
    return hashlib.sha256(json.dumps(params, sort_keys=True).encode()).hexdigest()[:12]


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (dict, list)):
        return json.dumps(v, sort_keys=True)
    return str(v)


def write_rows_csv(path: Path, rows: list[dict]) -> None:
    columns: list[str] = []
    for r in rows:
        for k in r:
            if k not in columns:
                columns.append(k)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r.get(c)) for c in columns])


def write_report(out_dir: Path, experiment_id: str, parameters: dict, rows: list[dict], summary: dict) -> tuple[Path, Path]:
    """Write ``<id>-<hash>.csv`` (one row per record) and ``<id>-<hash>.json`` (summary)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{experiment_id}-{params_hash(parameters)}"
    csv_path, json_path = out_dir / f"{stem}.csv", out_dir / f"{stem}.json"
    write_rows_csv(csv_path, rows)
    json_path.write_text(dumps({"experiment_id": experiment_id, "parameters": parameters, "summary": summary}))
    return csv_path, json_path
