"""Synthetic non-Gaussian data from random DAGs with additive structural equations.

Randomness is drawn from independent ``numpy`` PCG64 substreams derived from
one integer seed through ``SeedSequence`` spawn keys::

    (0,)          edge selection
    (1, k, j)     coefficients of the edge k -> j
    (2, j)        noise of node j

so an edge's coefficients depend only on the seed and the edge itself, not
on d, on the number of edges or on the traversal order.
"""
import math
from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter

import numpy as np

from .basis import DataMatrix
from .errors import DegenerateComponent, TooManyEdges
from .solver import Graph

SCHEMES = ("linear", "cubic")
COEF_SD = (1.0, math.sqrt(0.5), math.sqrt(0.5))
MIN_VAR = 1e-12


def substream(seed, *key):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass(frozen=True)
class DagSpec:
    """Ground-truth DAG with per-edge polynomial coefficients (b1, b2, b3).

    Edges are 0-based ``(parent, child)`` tuples; ``coeffs`` maps each edge
    to its coefficient triple and is empty until :func:`gen_coeffs` runs.
    """

    d: int
    edges: tuple
    scheme: str = "cubic"
    coeffs: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        edges = tuple(sorted({(int(a), int(b)) for a, b in self.edges}))
        for a, b in edges:
            if a == b or not (0 <= a < self.d and 0 <= b < self.d):
                raise ValueError(f"invalid edge ({a}, {b})")
        object.__setattr__(self, "edges", edges)
        self.topological_order()

    def parents(self, j):
        return [a for a, b in self.edges if b == j]

    def topological_order(self):
        ts = TopologicalSorter({j: [] for j in range(self.d)})
        for a, b in self.edges:
            ts.add(b, a)
        try:
            return list(ts.static_order())
        except CycleError as exc:
            raise ValueError("edge set contains a cycle") from exc

    def graph(self):
        return Graph(self.d, set(self.edges), directed=True)

    def to_json(self):
        return {
            "d": self.d,
            "edges": [[a + 1, b + 1] for a, b in self.edges],
            "scheme": self.scheme,
            "coefficients": [[a + 1, b + 1, *map(float, self.coeffs[(a, b)])]
                             for a, b in self.edges if (a, b) in self.coeffs],
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj):
        edges = [(a - 1, b - 1) for a, b in obj["edges"]]
        coeffs = {(row[0] - 1, row[1] - 1): tuple(row[2:5]) for row in obj.get("coefficients", [])}
        return cls(obj["d"], edges, obj.get("scheme", "cubic"), coeffs, obj.get("seed", 0))


def random_dag(d, m, seed=0, scheme="cubic"):
    """Choose ``m`` of the ``d(d-1)/2`` pairs uniformly, oriented low -> high."""
    total = d * (d - 1) // 2
    if not 0 <= m <= total:
        raise TooManyEdges(f"cannot place {m} edges on {d} nodes (max {total})")
    rng = substream(seed, 0)
    picks = np.sort(rng.choice(total, size=m, replace=False)) if m else np.zeros(0, int)
    lo, hi = np.triu_indices(d, 1)
    edges = list(zip(lo[picks].tolist(), hi[picks].tolist()))
    return DagSpec(d, tuple(edges), scheme, {}, seed)


def gen_coeffs(spec, seed=None):
    """Attach coefficients: (1, 0, 0) for linear, Gaussian draws for cubic."""
    seed = spec.seed if seed is None else seed
    coeffs = {}
    for a, b in spec.edges:
        if spec.scheme == "linear":
            coeffs[(a, b)] = (1.0, 0.0, 0.0)
        else:
            coeffs[(a, b)] = tuple(float(v) for v in substream(seed, 1, a, b).normal(0.0, COEF_SD))
    return DagSpec(spec.d, spec.edges, spec.scheme, coeffs, seed)


def component(x, coefs):
    b1, b2, b3 = coefs
    return b1 * x + b2 * x**2 + b3 * x**3


def sample(spec, n, seed=None, names=None):
    """Draw ``n`` observations in topological order.

    Each realized parent contribution is divided by its sample standard
    deviation (``ddof=0``) before being added, and the noise is N(0, 1).
    """
    if len(spec.coeffs) != len(spec.edges):
        raise ValueError("DagSpec has no coefficients; call gen_coeffs first")
    seed = spec.seed if seed is None else seed
    X = np.zeros((n, spec.d))
    parents = {j: [] for j in range(spec.d)}
    for a, b in spec.edges:
        parents[b].append(a)
    for j in spec.topological_order():
        col = substream(seed, 2, j).standard_normal(n)
        for k in parents[j]:
            f = component(X[:, k], spec.coeffs[(k, j)])
            sd = f.std()
            if not sd**2 >= MIN_VAR:
                raise DegenerateComponent(k, j)
            col += f / sd
        X[:, j] = col
    if names is None:
        names = tuple(f"x{j + 1}" for j in range(spec.d))
    return DataMatrix(X, names)


def moralize(spec):
    """Undirected moral graph: skeleton plus edges between co-parents."""
    edges = set()
    parents = {j: [] for j in range(spec.d)}
    for a, b in spec.edges:
        edges.add((min(a, b), max(a, b)))
        parents[b].append(a)
    for ps in parents.values():
        for i, a in enumerate(ps):
            for b in ps[i + 1:]:
                edges.add((min(a, b), max(a, b)))
    return Graph(spec.d, edges)


def replicate_blocks(spec, copies, clone_coeffs=False):
    """Disjoint union of ``copies`` shifted copies of ``spec``.

    Coefficients are redrawn per block from the per-edge substreams unless
    ``clone_coeffs`` is set, in which case every block reuses the original.
    """
    d = spec.d
    edges = [(a + c * d, b + c * d) for c in range(copies) for a, b in spec.edges]
    big = DagSpec(d * copies, tuple(edges), spec.scheme, {}, spec.seed)
    if not clone_coeffs:
        return gen_coeffs(big)
    coeffs = {(a + c * d, b + c * d): spec.coeffs[(a, b)]
              for c in range(copies) for a, b in spec.edges}
    return DagSpec(big.d, big.edges, big.scheme, coeffs, spec.seed)


def simulate(d=100, m=80, n=50, scheme="cubic", seed=0):
    """Convenience: random DAG, coefficients and one data set."""
    spec = gen_coeffs(random_dag(d, m, seed, scheme))
    return spec, sample(spec, n)
