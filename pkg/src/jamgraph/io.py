"""CSV / JSON readers and writers used by the command line."""
import csv
import json
import math
from pathlib import Path

import numpy as np

from .basis import DataMatrix
from .errors import DataParseError, DimensionMismatch
from .solver import EDGE_TOL, Graph

UNDIRECTED_HEADER = ("a", "b")
DIRECTED_HEADER = ("src", "dst")


def read_data(path):
    """Read a numeric CSV with a header row of variable names."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataParseError(path, 1, 1, "empty file") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise DataParseError(path, 1, 1, "duplicate column names")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DataParseError(path, lineno, min(len(row), len(header)) + 1,
                                     f"expected {len(header)} fields, found {len(row)}")
            vals = []
            for col, cell in enumerate(row, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataParseError(path, lineno, col, f"non-numeric value {cell!r}") from None
                if not math.isfinite(v):
                    raise DataParseError(path, lineno, col, f"non-finite value {cell!r}")
                vals.append(v)
            rows.append(vals)
    if len(rows) < 2:
        raise DataParseError(path, len(rows) + 2, 1, "need at least two data rows")
    return DataMatrix(np.array(rows), tuple(header))


def write_data(path, X):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(X.names)
        for row in X.values:
            w.writerow([repr(float(v)) for v in row])


def write_rows(path, rows, columns=None):
    """Write a list of dicts (or a structured array) as CSV."""
    if isinstance(rows, np.ndarray):
        columns = columns or rows.dtype.names
        rows = [{c: r[c].item() for c in columns} for r in rows]
    columns = columns or (list(rows[0]) if rows else [])
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({c: _fmt(row[c]) for c in columns})


def read_rows(path):
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_edges(path, graph, names):
    header = DIRECTED_HEADER if graph.directed else UNDIRECTED_HEADER
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for a, b in graph.sorted_edges():
            w.writerow([names[a], names[b]])


def read_edges(path, names):
    """Read an edge list; the header decides directedness (``a,b`` or ``src,dst``)."""
    path = Path(path)
    index = {name: i for i, name in enumerate(names)}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(h.strip() for h in next(reader, ()))
        if header not in (UNDIRECTED_HEADER, DIRECTED_HEADER):
            raise DataParseError(path, 1, 1, f"edge list header must be a,b or src,dst, got {header}")
        edges = set()
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DataParseError(path, lineno, 1, "edge rows need two fields")
            try:
                edges.add((index[row[0].strip()], index[row[1].strip()]))
            except KeyError as exc:
                raise DimensionMismatch(f"{path}: unknown variable {exc.args[0]!r}") from None
    return Graph(len(names), edges, header == DIRECTED_HEADER, tuple(names))


def write_path_edges(path, fits, names, tol=EDGE_TOL):
    """All edges of every fit along a path, tagged with the grid index."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        directed = bool(fits) and fits[0].directed
        w.writerow(("lambda_index",) + (DIRECTED_HEADER if directed else UNDIRECTED_HEADER))
        for i, f in enumerate(fits):
            for a, b in f.graph(tol).sorted_edges():
                w.writerow([i, names[a], names[b]])


def read_path_edges(path, names, count):
    """Inverse of :func:`write_path_edges`; returns ``count`` graphs."""
    path = Path(path)
    index = {name: i for i, name in enumerate(names)}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(h.strip() for h in next(reader, ()))
        directed = header[1:] == DIRECTED_HEADER
        sets = [set() for _ in range(count)]
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                sets[int(row[0])].add((index[row[1]], index[row[2]]))
            except (ValueError, IndexError):
                raise DataParseError(path, lineno, 1, "bad path edge row") from None
            except KeyError as exc:
                raise DimensionMismatch(f"{path}: unknown variable {exc.args[0]!r}") from None
    return [Graph(len(names), s, directed, tuple(names)) for s in sets]


def read_ordering(path, names):
    """Causal ordering from CSV or JSON: variable names or 1-based indices."""
    path = Path(path)
    text = path.read_text().strip()
    if path.suffix.lower() == ".json" or text.startswith("["):
        items = json.loads(text)
        if isinstance(items, dict):
            items = items.get("order", items.get("ordering"))
    else:
        items = [tok.strip() for line in text.splitlines() for tok in line.split(",") if tok.strip()]
        if items and items[0].lower() in ("order", "variable", "name", "ordering"):
            items = items[1:]
    index = {name: i for i, name in enumerate(names)}
    order = []
    for item in items:
        if isinstance(item, str) and item in index:
            order.append(index[item])
        else:
            try:
                k = int(item) - 1
            except (TypeError, ValueError):
                raise DimensionMismatch(f"{path}: unknown variable {item!r}") from None
            if not 0 <= k < len(names):
                raise DimensionMismatch(f"{path}: index {item} out of range 1..{len(names)}")
            order.append(k)
    if sorted(order) != list(range(len(names))):
        raise DimensionMismatch(f"{path}: ordering is not a permutation of the data columns")
    return order


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n")


def coefficients_json(design, X, fit_result, tol=EDGE_TOL):
    """Nonzero components mapped back to polynomial coefficients.

    Each entry gives ``intercept`` and ``coefficients`` of
    ``f(x) = intercept + sum_t c_t * x**degrees[t]`` where ``x`` is the
    standardized regressor ``(raw - center) / scale``.
    """
    beta = np.asarray(fit_result.coefficients)
    names = X.names
    out = []
    d = beta.shape[0]
    for j in range(d):
        for k in range(d):
            if j == k or beta[j, k] @ beta[j, k] <= 0:
                continue
            intercept, coefs = design.raw_coefficients(k, beta[j, k])
            out.append({
                "response": names[j],
                "regressor": names[k],
                "intercept": float(intercept),
                "coefficients": [float(c) for c in coefs],
                "basis_coefficients": [float(c) for c in beta[j, k]],
            })
    return {
        "lambda": float(fit_result.lam),
        "degrees": list(design.spec.degrees),
        "variables": list(names),
        "standardization": {
            "applied": bool(X.standardized),
            "center": [float(v) for v in X.center],
            "scale": [float(v) for v in X.scale],
        },
        "directed": bool(fit_result.directed),
        "components": out,
    }
