"""Plain-text, JSON and CSV encodings shared by the modules and the CLI.

Floats are written with 17 significant digits so that doubles survive a
write/read cycle unchanged.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

FLOAT_FMT = "%.17g"


def fmt(v: float) -> str:
    return FLOAT_FMT % v


def matrix_to_text(M) -> str:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return "\n".join(" ".join(fmt(v) for v in row) for row in M) + "\n"


def matrix_from_text(text: str) -> np.ndarray:
    rows = [line.split() for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
    if not rows:
        raise ValueError("empty matrix text")
    width = {len(r) for r in rows}
    if len(width) != 1:
        raise ValueError("ragged matrix rows")
    return np.array([[float(v) for v in r] for r in rows])


def matrix_to_json(M) -> dict:
    M = np.asarray(M, dtype=float)
    return {"n": int(M.shape[0]), "entries": M.tolist()}


def matrix_from_json(obj) -> np.ndarray:
    if isinstance(obj, str):
        obj = json.loads(obj)
    M = np.array(obj["entries"], dtype=float)
    if M.ndim != 2 or M.shape[0] != int(obj["n"]):
        raise ValueError(f"declared n={obj['n']} does not match entries of shape {M.shape}")
    return M


def to_jsonable(obj):
    """Recursively convert numpy containers and complex numbers for json.dump."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def dump_json(obj, path=None) -> str:
    text = json.dumps(to_jsonable(obj), indent=2, sort_keys=False, allow_nan=True)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


def write_csv(path, header, rows) -> None:
    """Write rows of numbers/strings; floats use 17 significant digits."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    Path(path).write_text(buf.getvalue())


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = np.array([[float(v) for v in row] for row in r])
    return header, data
