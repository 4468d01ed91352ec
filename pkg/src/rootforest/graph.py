"""Weighted directed graphs, Markov generators, killing plans, and spanning forests.

Vertices are dense integer indices 0..n-1; any external labels ride along in a
symbol table and never enter the algorithms.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import (
    DuplicateEdge,
    GeometryMismatch,
    NonPositiveRate,
    NotStronglyConnected,
    SizeCap,
)

DENSE_CAP = 4096


class Graph:
    """Immutable weighted digraph with strictly positive rates and no self-loops.

    Holds both a rate lookup and a flattened adjacency (cumulative weights per
    row) so samplers can walk it with O(degree) work per jump.
    """

    __slots__ = (
        "n", "labels", "_rates", "out_rate", "indptr", "nbr", "cum",
        "_exact", "__weakref__",
    )

    def __init__(self, n, rates, labels=None):
        self.n = n
        self.labels = tuple(labels) if labels is not None else None
        self._rates = dict(rates)
        self._exact = all(isinstance(r, (int, Fraction)) for r in self._rates.values())
        # flattened row-major adjacency with per-row cumulative weights
        indptr = [0]
        nbr = []
        cum = []
        out_rate = []
        by_src = {}
        for (x, y), r in self._rates.items():
            by_src.setdefault(x, []).append((y, float(r)))
        for x in range(n):
            acc = 0.0
            for y, r in sorted(by_src.get(x, ())):
                acc += r
                nbr.append(y)
                cum.append(acc)
            out_rate.append(acc)
            indptr.append(len(nbr))
        self.indptr = indptr
        self.nbr = nbr
        self.cum = cum
        self.out_rate = out_rate

    # -- queries ------------------------------------------------------------

    def rate(self, x, y):
        """Rate w(x, y), 0 when the edge is absent."""
        return float(self._rates.get((x, y), 0.0))

    def exact_rate(self, x, y):
        """Rate as an exact Fraction (requires integer or Fraction input rates)."""
        if not self._exact:
            raise ValueError("graph was built with non-exact rates")
        return Fraction(self._rates.get((x, y), 0))

    @property
    def has_exact_rates(self):
        return self._exact

    def edges(self):
        """Iterate (x, y, rate) with float rates."""
        for (x, y), r in self._rates.items():
            yield x, y, float(r)

    def n_edges(self):
        return len(self._rates)

    def neighbors(self, x):
        """Outgoing (neighbor, rate) pairs of x in ascending neighbor order."""
        a, b = self.indptr[x], self.indptr[x + 1]
        prev = 0.0
        out = []
        for j in range(a, b):
            out.append((self.nbr[j], self.cum[j] - prev))
            prev = self.cum[j]
        return out

    def __repr__(self):
        return f"Graph(n={self.n}, edges={self.n_edges()})"


def _check_strongly_connected(n, rates):
    """One forward and one backward reachability pass from vertex 0."""
    if n == 1:
        return
    fwd = [[] for _ in range(n)]
    bwd = [[] for _ in range(n)]
    for (x, y) in rates:
        fwd[x].append(y)
        bwd[y].append(x)
    for adj, backward in ((fwd, False), (bwd, True)):
        seen = bytearray(n)
        seen[0] = 1
        stack = [0]
        while stack:
            v = stack.pop()
            for u in adj[v]:
                if not seen[u]:
                    seen[u] = 1
                    stack.append(u)
        for v in range(n):
            if not seen[v]:
                if backward:
                    raise NotStronglyConnected(v, 0)
                raise NotStronglyConnected(0, v)


def build_graph(vertex_count, edge_list, labels=None):
    """Validate and build a Graph from (x, y, rate) triples.

    Rates must be strictly positive, loops (x == x) are rejected, and a
    duplicate (x, y) pair is an error rather than being summed silently.
    Raises NotStronglyConnected naming an unreachable ordered pair when the
    digraph is not irreducible.
    """
    n = int(vertex_count)
    if n < 1:
        raise ValueError("vertex_count must be >= 1")
    rates = {}
    for x, y, r in edge_list:
        x, y = int(x), int(y)
        if not (0 <= x < n and 0 <= y < n):
            raise ValueError(f"edge ({x},{y}) out of range for n={n}")
        if x == y:
            raise NonPositiveRate(f"self-loop ({x},{x}) not allowed")
        if isinstance(r, float) and not math.isfinite(r):
            raise NonPositiveRate(f"rate for edge ({x},{y}) is not finite")
        if r <= 0:
            raise NonPositiveRate(f"rate {r} for edge ({x},{y}) must be > 0")
        if (x, y) in rates:
            raise DuplicateEdge(f"edge ({x},{y}) given twice")
        rates[(x, y)] = r
    _check_strongly_connected(n, rates)
    return Graph(n, rates, labels)


_DRIFT_OFFSETS = {"north": (-1, 0), "south": (1, 0), "west": (0, -1), "east": (0, 1)}


def grid_graph(width, height, topology="torus", drift=None):
    """Nearest-neighbour grid with unit rates, as a torus or open rectangle.

    Vertex (row, col) has index row*width + col; row 0 is the north side.
    `drift`, when given as (direction, rate), replaces the unit rate toward
    that direction.  Wrap-around duplicates (e.g. on a 2-wide torus) are summed
    into a single edge.
    """
    if width < 1 or height < 1:
        raise ValueError("grid dimensions must be >= 1")
    if drift is not None:
        direction, drift_rate = drift
        if direction not in _DRIFT_OFFSETS:
            raise ValueError(f"unknown drift direction {direction!r}")
        if drift_rate <= 0:
            raise NonPositiveRate("drift rate must be > 0")
    rates = {}
    for r in range(height):
        for c in range(width):
            v = r * width + c
            for direction, (dr, dc) in _DRIFT_OFFSETS.items():
                rr, cc = r + dr, c + dc
                if topology == "torus":
                    rr %= height
                    cc %= width
                elif not (0 <= rr < height and 0 <= cc < width):
                    continue
                u = rr * width + cc
                if u == v:
                    continue
                w = 1.0
                if drift is not None and direction == drift[0]:
                    w = float(drift[1])
                rates[(v, u)] = rates.get((v, u), 0.0) + w
    n = width * height
    _check_strongly_connected(n, rates)
    return Graph(n, rates)


def brownian_sheet_potential(width, height, seed):
    """Discrete Brownian-sheet surface, zero on the north row and west column.

    Realized as the two-dimensional cumulative sum of i.i.d. standard
    Gaussians, each increment scaled by 1/sqrt(width*height) so the surface
    roughness is resolution-stable.
    """
    rng = np.random.default_rng(seed)
    v = np.zeros((height, width))
    if height > 1 and width > 1:
        g = rng.standard_normal((height - 1, width - 1)) / math.sqrt(width * height)
        v[1:, 1:] = g.cumsum(axis=0).cumsum(axis=1)
    return v


def brownian_sheet_metropolis(width, height, beta, seed):
    """Metropolis rates exp(-beta*[V(y)-V(x)]_+) in a Brownian-sheet potential V.

    The rectangle topology of grid_graph with beta=0 is recovered edge for
    edge.  Deterministic for a fixed seed.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    v = brownian_sheet_potential(width, height, seed)
    rates = {}
    for r in range(height):
        for c in range(width):
            x = r * width + c
            for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                rr, cc = r + dr, c + dc
                if not (0 <= rr < height and 0 <= cc < width):
                    continue
                y = rr * width + cc
                rates[(x, y)] = math.exp(-beta * max(v[rr, cc] - v[r, c], 0.0))
    n = width * height
    _check_strongly_connected(n, rates)
    return Graph(n, rates)


def generator_matrix(graph, cap=DENSE_CAP):
    """Dense generator L with L[x,y]=w(x,y) and diagonal the negated row sum."""
    if graph.n > cap:
        raise SizeCap(f"n={graph.n} exceeds dense-matrix cap {cap}")
    L = np.zeros((graph.n, graph.n))
    for x, y, r in graph.edges():
        L[x, y] = r
    np.fill_diagonal(L, 0.0)
    np.fill_diagonal(L, -L.sum(axis=1))
    return L


def exact_generator(graph):
    """Generator as nested lists of Fractions (integer/Fraction rates only)."""
    n = graph.n
    L = [[Fraction(0) for _ in range(n)] for _ in range(n)]
    for (x, y), r in graph._rates.items():
        L[x][y] = Fraction(r)
    for x in range(n):
        L[x][x] = -sum(L[x][y] for y in range(n) if y != x)
    return L


def stationary_measure(graph):
    """The unique probability vector with mu L = 0."""
    if graph.n == 1:
        return np.ones(1)
    L = generator_matrix(graph, cap=max(DENSE_CAP, graph.n))
    A = L.T.copy()
    A[-1, :] = 1.0
    b = np.zeros(graph.n)
    b[-1] = 1.0
    mu = np.linalg.solve(A, b)
    return mu


def check_reversible(graph, rel_tol=1e-9):
    """Return the stationary measure mu when the chain is reversible, else None.

    Reversibility is decided by solving mu L = 0 and testing detailed balance
    mu(x) w(x,y) = mu(y) w(y,x) on every edge to the given relative tolerance
    (this is equivalent to Kolmogorov's cycle criterion and avoids walking
    cycles).
    """
    mu = stationary_measure(graph)
    if np.any(mu <= 0):
        return None
    scale = 0.0
    fluxes = []
    for x, y, r in graph.edges():
        f = mu[x] * r
        g = mu[y] * graph.rate(y, x)
        fluxes.append(abs(f - g))
        scale = max(scale, abs(f), abs(g))
    if scale == 0.0:
        return mu  # single vertex
    if max(fluxes) > rel_tol * scale:
        return None
    return mu


# -- spanning rooted oriented forests ----------------------------------------


@dataclass(frozen=True)
class Forest:
    """A spanning rooted oriented forest: parent edge per non-root vertex.

    parent[x] is the vertex x points to, or None exactly when x is a root.
    tree_id[x] indexes the tree covering x; ids are assigned in ascending
    root order.
    """

    parent: tuple
    roots: frozenset = field(compare=False)
    tree_id: tuple = field(compare=False)

    @property
    def n(self):
        return len(self.parent)

    @property
    def n_trees(self):
        return len(self.roots)

    @property
    def edge_set(self):
        return frozenset((x, p) for x, p in enumerate(self.parent) if p is not None)

    def tree_members(self):
        """List of vertex lists, one per tree, indexed by tree_id."""
        groups = [[] for _ in range(self.n_trees)]
        for v, t in enumerate(self.tree_id):
            groups[t].append(v)
        return groups

    def root_of(self, x):
        while self.parent[x] is not None:
            x = self.parent[x]
        return x

    def weight(self, graph):
        """Product of edge rates, w(forest)."""
        w = 1.0
        for x, p in enumerate(self.parent):
            if p is not None:
                w *= graph.rate(x, p)
        return w

    def exact_weight(self, graph):
        w = Fraction(1)
        for x, p in enumerate(self.parent):
            if p is not None:
                w *= graph.exact_rate(x, p)
        return w


def forest_from_parent(parent, graph=None):
    """Build a validated Forest from a parent array (None marks roots)."""
    n = len(parent)
    parent = tuple(None if p is None else int(p) for p in parent)
    roots = []
    tree_id = [-1] * n
    for x, p in enumerate(parent):
        if p is None:
            roots.append(x)
        else:
            if not (0 <= p < n) or p == x:
                raise GeometryMismatch(f"bad parent {p} for vertex {x}")
            if graph is not None and graph.rate(x, p) <= 0:
                raise GeometryMismatch(f"forest edge ({x},{p}) missing from graph")
    for t, r in enumerate(sorted(roots)):
        tree_id[r] = t
    for x in range(n):
        trail = []
        v = x
        while tree_id[v] < 0:
            trail.append(v)
            v = parent[v]
            if v in trail:
                raise GeometryMismatch(f"cycle through vertex {v}")
        for u in trail:
            tree_id[u] = tree_id[v]
    return Forest(parent, frozenset(roots), tuple(tree_id))


def all_roots_forest(n):
    return Forest(tuple([None] * n), frozenset(range(n)), tuple(range(n)))


# -- killing plans ------------------------------------------------------------


class KillingPlan:
    """Per-vertex killing rates q(x) in [0, +inf]; infinite rates force roots.

    kind is "uniform" for q(x) = q > 0 everywhere, "set_restricted" for the
    (q, R) plans with q(x) = +inf on R and q >= 0 elsewhere, and "general"
    otherwise.
    """

    __slots__ = ("q_of", "S", "kind", "_exact_q")

    def __init__(self, q_of, exact_q=None):
        q_of = tuple(float(q) for q in q_of)
        if any(q < 0 or math.isnan(q) for q in q_of):
            raise NonPositiveRate("killing rates must lie in [0, +inf]")
        if not any(q > 0 for q in q_of):
            raise NonPositiveRate("at least one vertex needs q(x) > 0")
        self.q_of = q_of
        self.S = frozenset(x for x, q in enumerate(q_of) if math.isinf(q))
        finite = [q for q in q_of if not math.isinf(q)]
        if not self.S and len(set(q_of)) == 1:
            self.kind = "uniform"
        elif len(set(finite)) <= 1:
            self.kind = "set_restricted"
        else:
            self.kind = "general"
        self._exact_q = exact_q

    @classmethod
    def uniform(cls, n, q):
        if q <= 0:
            raise NonPositiveRate("uniform killing needs q > 0")
        exact = q if isinstance(q, (int, Fraction)) else None
        return cls([q] * n, exact_q=exact)

    @classmethod
    def set_restricted(cls, n, q, R):
        """q(x) = +inf on R, q >= 0 off R (q > 0 required when R is empty)."""
        R = frozenset(R)
        if q < 0:
            raise NonPositiveRate("off-set rate must be >= 0")
        if not R and q <= 0:
            raise NonPositiveRate("empty R requires q > 0")
        exact = q if isinstance(q, (int, Fraction)) else None
        return cls([math.inf if x in R else q for x in range(n)], exact_q=exact)

    @classmethod
    def general(cls, q_of):
        return cls(q_of)

    @property
    def n(self):
        return len(self.q_of)

    def q(self, x):
        return self.q_of[x]

    def exact_q_value(self):
        """The single finite rate as a Fraction, for exact-arithmetic checks."""
        if self._exact_q is None:
            raise ValueError("plan was not built from an exact uniform rate")
        return Fraction(self._exact_q)

    def finite_support(self):
        """Vertices with finite killing rate, ascending."""
        return [x for x in range(self.n) if x not in self.S]

    def __repr__(self):
        return f"KillingPlan(kind={self.kind}, |S|={len(self.S)})"


# -- JSON interchange ----------------------------------------------------------


def graph_to_json(graph):
    doc = {"n": graph.n, "edges": [[x, y, r] for x, y, r in sorted(graph.edges())]}
    if graph.labels is not None:
        doc["labels"] = list(graph.labels)
    return json.dumps(doc)


def graph_from_json(text):
    doc = json.loads(text)
    return build_graph(doc["n"], doc["edges"], labels=doc.get("labels"))
