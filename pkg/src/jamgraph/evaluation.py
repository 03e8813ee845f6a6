"""Edge-recovery scoring against a known graph."""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .solver import EDGE_TOL

ROC_COLUMNS = ("lambda_index", "lambda_mean", "tp_mean", "fp_mean", "edges_mean")


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn


def confusion(est, truth, ordering=None):
    """Pair-level confusion counts between two graphs on the same vertices.

    Undirected graphs are compared over all ``d(d-1)/2`` unordered pairs.
    Directed graphs are compared over ordered pairs: the ``d(d-1)/2`` pairs
    consistent with ``ordering`` when given, otherwise all ``d(d-1)``.
    """
    if est.d != truth.d:
        raise DimensionMismatch(f"graphs have {est.d} and {truth.d} vertices")
    if est.directed != truth.directed:
        raise DimensionMismatch("cannot compare a directed with an undirected graph")
    d = est.d
    tp = len(est.edges & truth.edges)
    fp = len(est.edges - truth.edges)
    fn = len(truth.edges - est.edges)
    if not est.directed:
        universe = d * (d - 1) // 2
    elif ordering is not None:
        pos = np.empty(d, dtype=np.int64)
        pos[list(ordering)] = np.arange(d)
        for a, b in est.edges | truth.edges:
            if pos[a] >= pos[b]:
                raise DimensionMismatch(f"edge ({a}, {b}) violates the ordering")
        universe = d * (d - 1) // 2
    else:
        universe = d * (d - 1)
    return Confusion(tp, fp, fn, universe - tp - fp - fn)


def roc_table(path, truth, tol=EDGE_TOL):
    """One row per penalty: ``(lambda, tp, fp, edge_count, bic_total)``.

    Returned as a structured numpy array.
    """
    rows = []
    for lam, f, b in zip(path.lambdas, path.fits, path.bic_total):
        g = f.graph(tol)
        if not truth.directed and g.directed:
            g = g.undirected()
        c = confusion(g, truth)
        rows.append((float(lam), c.tp, c.fp, len(g), float(b)))
    return np.array(rows, dtype=[("lambda", "f8"), ("tp", "i8"), ("fp", "i8"),
                                 ("edge_count", "i8"), ("bic_total", "f8")])


def aggregate(tables):
    """Average replicate tables pointwise by grid index.

    Returns a structured array with :data:`ROC_COLUMNS`.
    """
    if not tables:
        raise ValueError("no tables to aggregate")
    L = len(tables[0])
    if any(len(t) != L for t in tables):
        raise DimensionMismatch("replicate tables have different lengths")
    stack = lambda key: np.stack([np.asarray(t[key], dtype=np.float64) for t in tables])
    out = np.zeros(L, dtype=[(c, "i8" if c == "lambda_index" else "f8") for c in ROC_COLUMNS])
    out["lambda_index"] = np.arange(L)
    out["lambda_mean"] = stack("lambda").mean(axis=0)
    out["tp_mean"] = stack("tp").mean(axis=0)
    out["fp_mean"] = stack("fp").mean(axis=0)
    out["edges_mean"] = stack("edge_count").mean(axis=0)
    return out


def tp_at_fp(tp, fp, target):
    """Linearly interpolate a (tp, fp) curve at ``fp = target``.

    Points are sorted by fp; the curve is clamped at its ends.
    """
    fp = np.asarray(fp, dtype=np.float64)
    tp = np.asarray(tp, dtype=np.float64)
    order = np.argsort(fp, kind="stable")
    fp, tp = fp[order], tp[order]
    # for repeated fp values keep the best tp so the curve is a function
    ufp, start = np.unique(fp, return_index=True)
    utp = np.maximum.reduceat(tp, start)
    return float(np.interp(target, ufp, utp))


def aggregate_interpolated(tables, fp_grid):
    """Alternative aggregation: average tp of each replicate at common fp values."""
    fp_grid = np.asarray(fp_grid, dtype=np.float64)
    tps = np.array([[tp_at_fp(t["tp"], t["fp"], x) for x in fp_grid] for t in tables])
    return np.rec.fromarrays([fp_grid, tps.mean(axis=0)], names="fp,tp_mean")


def roc_svg(curves, width=480, height=360, margin=40):
    """Minimal SVG line plot of tp versus fp.

    ``curves`` maps a label to ``(fp, tp)`` sequences.
    """
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    allfp = np.concatenate([np.asarray(v[0], float) for v in curves.values()] + [[0.0]])
    alltp = np.concatenate([np.asarray(v[1], float) for v in curves.values()] + [[0.0]])
    xmax = max(allfp.max(), 1.0)
    ymax = max(alltp.max(), 1.0)
    sx = lambda v: margin + (width - 2 * margin) * v / xmax
    sy = lambda v: height - margin - (height - 2 * margin) * v / ymax
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
        f'<text x="{width / 2}" y="{height - 8}" text-anchor="middle" font-size="12">incorrect edges ({xmax:g})</text>',
        f'<text x="12" y="{height / 2}" font-size="12" transform="rotate(-90 12 {height / 2})" '
        f'text-anchor="middle">correct edges ({ymax:g})</text>',
    ]
    for i, (label, (fp, tp)) in enumerate(curves.items()):
        color = colors[i % len(colors)]
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(fp, tp))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        parts.append(f'<text x="{width - margin - 4}" y="{margin + 14 * (i + 1)}" font-size="11" '
                     f'text-anchor="end" fill="{color}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
