"""File formats: CSV, JSON and Matrix Market, all bit-stable.

Floats are written with ``repr`` (shortest string that round-trips), no
timestamps or environment data enter any data file, and JSON keys are
sorted.  Non-finite values become ``nan``/``inf`` in CSV and ``null`` in JSON.
"""

import csv
import json
import math
import os
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import StiffKrylovError, ValidationError
from .model import DaeSystem

FORMATS = ("csv", "json", "matrix-market")
ERROR_GRID_HEADER = ("h", "m", "abs_error", "variant")


class OutputError(StiffKrylovError, OSError):
    """Reading or writing a file failed; ``path`` names the file."""

    def __init__(self, path, detail):
        self.path = str(path)
        super().__init__(f"{path}: {detail}")


def fmt(x):
    """Shortest round-trip text for a scalar."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return [_jsonable(obj.real), _jsonable(obj.imag)]
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "as_dict"):
        return _jsonable(obj.as_dict())
    return str(obj)


def _open(path, mode="w"):
    try:
        parent = Path(path).parent
        if mode.startswith("w"):
            parent.mkdir(parents=True, exist_ok=True)
        return open(path, mode, encoding="utf-8", newline="")
    except OSError as exc:
        raise OutputError(path, exc.strerror or str(exc)) from exc


def write_csv(path, header, rows):
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return Path(path)


def read_csv(path):
    """Header and rows (as strings) of a CSV file."""
    with _open(path, "r") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise OutputError(path, "empty CSV file")
    return rows[0], rows[1:]


def write_json(path, obj):
    text = json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False)
    with _open(path) as fh:
        fh.write(text + "\n")
    return Path(path)


def dumps_json(obj):
    return json.dumps(_jsonable(obj), sort_keys=True, allow_nan=False)


def write_matrix_market(path, A, comment=None):
    """Coordinate Matrix Market file (real, general) with round-trip values.

    Entries are listed column by column with ascending rows.  Explicit zeros
    are dropped.
    """
    A = sp.coo_matrix(A)
    A.sum_duplicates()
    keep = A.data != 0
    r, c, v = A.row[keep], A.col[keep], A.data[keep]
    order = np.lexsort((r, c))
    with _open(path) as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        if comment:
            for line in str(comment).splitlines():
                fh.write(f"% {line}\n")
        fh.write(f"{A.shape[0]} {A.shape[1]} {order.size}\n")
        for k in order:
            fh.write(f"{r[k] + 1} {c[k] + 1} {fmt(v[k])}\n")
    return Path(path)


def read_matrix_market(path):
    try:
        A = scipy.io.mmread(str(path))
    except (OSError, ValueError) as exc:
        raise OutputError(path, str(exc)) from exc
    return sp.csr_matrix(A, dtype=float)


def write_vector_csv(path, v, name="value"):
    return write_csv(path, [name], ([x] for x in np.asarray(v).reshape(-1)))


def read_vector_csv(path):
    """Single-column CSV, with or without a one-word header."""
    with _open(path, "r") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    try:
        if lines and not _is_number(lines[0]):
            lines = lines[1:]
        return np.array([float(ln.split(",")[0]) for ln in lines])
    except ValueError as exc:
        raise OutputError(path, f"not a numeric column: {exc}") from exc


def _is_number(text):
    try:
        float(text.split(",")[0])
    except ValueError:
        return False
    return True


def write_system(directory, system):
    """``C.mtx``, ``G.mtx`` and ``u0.csv``, ``u1.csv``, ``x0.csv`` in a directory."""
    d = Path(directory)
    write_matrix_market(d / "C.mtx", system.C)
    write_matrix_market(d / "G.mtx", system.G)
    for name in ("u0", "u1", "x0"):
        write_vector_csv(d / f"{name}.csv", getattr(system, name), name)
    return d


def read_system(directory):
    """Inverse of :func:`write_system`; missing vectors default to zero."""
    d = Path(directory)
    for name in ("C.mtx", "G.mtx"):
        if not (d / name).exists():
            raise ValidationError(f"{d / name} not found")
    C = read_matrix_market(d / "C.mtx")
    G = read_matrix_market(d / "G.mtx")
    vecs = {}
    for name in ("u0", "u1", "x0"):
        p = d / f"{name}.csv"
        vecs[name] = read_vector_csv(p) if p.exists() else None
    return DaeSystem(C=C, G=G, **vecs)


def error_grid_rows(records, with_bound=False):
    """Rows of an error grid sorted by ``h``, then ``m``, then input order."""
    indexed = sorted(enumerate(records), key=lambda ir: (ir[1]["h"], ir[1]["m"], ir[0]))
    cols = ERROR_GRID_HEADER + (("bound",) if with_bound else ())
    return cols, [[rec.get(c, float("nan")) for c in cols] for _, rec in indexed]


def write_error_grid(path, records, fmt_name="csv", with_bound=False):
    """Error grid with header ``h,m,abs_error,variant`` (plus ``bound``)."""
    cols, rows = error_grid_rows(records, with_bound)
    if fmt_name == "csv":
        return write_csv(path, cols, rows)
    if fmt_name == "json":
        return write_json(path, [dict(zip(cols, r)) for r in rows])
    raise ValueError(f"error grids are written as csv or json, not {fmt_name!r}")


def sort_by_magnitude(eigs):
    eigs = np.asarray(eigs, dtype=complex).reshape(-1)
    return eigs[np.lexsort((eigs.imag, eigs.real, np.abs(eigs)))]


def write_eigenvalues(path, eigs, fmt_name="csv"):
    """Eigenvalues as ``re,im`` rows sorted by magnitude."""
    z = sort_by_magnitude(eigs)
    if fmt_name == "csv":
        return write_csv(path, ("re", "im"), zip(z.real, z.imag))
    if fmt_name == "json":
        return write_json(path, {"re": z.real, "im": z.imag})
    raise ValueError(f"eigenvalues are written as csv or json, not {fmt_name!r}")


def write_points(path, points, fmt_name="csv"):
    """Complex sample points as ``re,im`` rows in sample order."""
    z = np.asarray(points, dtype=complex)
    if fmt_name == "csv":
        return write_csv(path, ("re", "im"), zip(z.real, z.imag))
    return write_json(path, {"re": z.real, "im": z.imag})


def dump_krylov(directory, K):
    """``H.csv``, ``W.mtx`` and ``meta.json`` for a Krylov decomposition."""
    d = Path(directory)
    H = np.asarray(K.H)
    write_csv(d / "H.csv", [f"c{j}" for j in range(H.shape[1])], H.tolist())
    write_matrix_market(d / "W.mtx", sp.coo_matrix(np.asarray(K.W)))
    meta = {"gamma": K.gamma, "m": K.m, "beta0": K.beta0, "breakdown": K.breakdown,
            "h_tail": K.h_tail, "inner": K.inner}
    write_json(d / "meta.json", meta)
    return d


def write_outputs(result, path, fmt_name="csv"):
    """Write a result object in the requested format.

    ``result`` may be a sparse or dense matrix (``matrix-market``), a list of
    error-grid records (``csv``/``json``), or anything with ``as_dict``
    (``json``; ``csv`` writes one ``key,value`` row per scalar entry).
    """
    if fmt_name not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {fmt_name!r}")
    path = Path(path)
    if fmt_name == "matrix-market":
        return write_matrix_market(path, result)
    if isinstance(result, list) and result and isinstance(result[0], dict) and "h" in result[0]:
        return write_error_grid(path, result, fmt_name, with_bound="bound" in result[0])
    data = result.as_dict() if hasattr(result, "as_dict") else result
    if fmt_name == "json":
        return write_json(path, data)
    if not isinstance(data, dict):
        raise ValueError("csv output needs a mapping or an error grid")
    rows = [(k, v) for k, v in sorted(data.items()) if np.ndim(v) == 0 and not isinstance(v, dict)]
    return write_csv(path, ("key", "value"), rows)


def write_step_result(directory, res, fmt_name="json"):
    """Step result as ``step.json`` or ``state.csv`` plus ``step_meta.json``."""
    d = Path(directory)
    if fmt_name == "json":
        return write_json(d / "step.json", res.as_dict())
    meta = res.as_dict()
    for key in ("x_r", "x_n", "x_full"):
        meta.pop(key)
    write_json(d / "step_meta.json", meta)
    return write_csv(d / "state.csv", ("x_r", "x_n", "x_full"),
                     zip(res.x_r, res.x_n, res.x_full))


def ensure_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise OutputError(path, exc.strerror or str(exc)) from exc
    return Path(path)
