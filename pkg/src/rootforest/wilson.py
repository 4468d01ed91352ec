"""Wilson's algorithm with killing: loop-erased walks, exact forest sampling,
and root-count targeting.

The walk simulation follows the continuous-time embedded chain directly
(killing folded into each vertex's total rate); a uniformized constant-clock
skeleton with lazy self-loops is available behind `skeleton="uniformized"`
for cross-checks.  Loop erasure is done by cycle popping on a growing path
with a per-vertex position index, O(1) per step.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .errors import ComplexSpectrum, DivergesToInfinity, Exhausted, IterationCap
from .graph import Forest, KillingPlan, forest_from_parent
from .linalg import det_sub
from .rng import RngStream

_BUF = 1 << 14


@dataclass(frozen=True)
class LerwPath:
    """A loop-erased trajectory: self-avoiding points, last one absorbing.

    `killed` marks trajectories that ended by a killing jump out of
    points[-1] rather than by entering the absorbing set.
    """

    points: tuple
    killed: bool
    time: float | None = None

    @property
    def length(self):
        """Number of jumps along the erased path (the killing jump counts)."""
        return len(self.points) - 1 + (1 if self.killed else 0)


@dataclass(frozen=True)
class SampleReport:
    forest: Forest
    q_used: float | None
    n_roots: int
    steps_walked: int
    wilson_time: float | None


class _Walker:
    """Shared state for the loop-erased walks of one Wilson run."""

    def __init__(self, graph, plan, rng, skeleton="direct", track_time=False):
        self.graph = graph
        self.rng = rng
        self.track_time = track_time
        n = graph.n
        wsum = graph.out_rate
        if plan is None:
            q_of = [0.0] * n
        else:
            q_of = plan.q_of
        total = [0.0] * n
        for x in range(n):
            total[x] = wsum[x] if math.isinf(q_of[x]) else wsum[x] + q_of[x]
        self.total = total
        self.kill_cut = wsum  # u*scale >= wsum[x] means "not a graph jump"
        if skeleton == "direct":
            self.scale = None
        elif skeleton == "uniformized":
            finite = [total[x] for x in range(n) if not math.isinf(q_of[x])]
            self.scale = max(finite) if finite else 1.0
        else:
            raise ValueError(f"unknown skeleton {skeleton!r}")
        self.q_of = q_of
        self.in_forest = bytearray(n)
        self.parent = [None] * n
        self.pos = [-1] * n
        self.path = []
        self.steps = 0
        self.time = 0.0
        self._ubuf = []
        self._ui = 0
        self._ebuf = []
        self._ei = 0

    def _fill_u(self):
        self._ubuf = self.rng.random(_BUF).tolist()
        self._ui = 0

    def _fill_e(self):
        self._ebuf = self.rng.standard_exponential(_BUF).tolist()
        self._ei = 0

    def walk(self, start):
        """One loop-erased walk from `start` to the current structure.

        Freezes the erased path into self.parent/in_forest and returns the
        path points plus whether it ended by killing.
        """
        indptr = self.graph.indptr
        nbr = self.graph.nbr
        cum = self.graph.cum
        total = self.total
        kill_cut = self.kill_cut
        in_forest = self.in_forest
        pos = self.pos
        path = self.path
        scale = self.scale
        track = self.track_time
        ubuf, ui = self._ubuf, self._ui
        x = start
        path.append(x)
        pos[x] = 0
        killed = False
        steps = 0
        while True:
            if ui == len(ubuf):
                self._fill_u()
                ubuf, ui = self._ubuf, self._ui
            u = ubuf[ui]
            ui += 1
            steps += 1
            row_scale = total[x] if scale is None else scale
            if track:
                if self._ei == len(self._ebuf):
                    self._fill_e()
                self.time += self._ebuf[self._ei] / row_scale
                self._ei += 1
            t = u * row_scale
            if t >= kill_cut[x]:
                if t < total[x] or scale is None:
                    killed = True
                    break
                continue  # lazy self-loop of the uniformized clock
            j = indptr[x]
            while cum[j] < t:
                j += 1
            y = nbr[j]
            if in_forest[y]:
                path.append(y)
                break
            p = pos[y]
            if p >= 0:
                for k in range(p + 1, len(path)):
                    pos[path[k]] = -1
                del path[p + 1:]
                x = y
            else:
                pos[y] = len(path)
                path.append(y)
                x = y
        self._ui = ui
        self.steps += steps
        parent = self.parent
        for i in range(len(path) - 1):
            parent[path[i]] = path[i + 1]
        for v in path:
            if pos[v] >= 0:
                pos[v] = -1
            in_forest[v] = 1
        points = tuple(path)
        path.clear()
        return points, killed


def lerw(graph, start, stream, absorbing=None, plan=None, skeleton="direct",
         track_time=False):
    """Loop erasure of the walk from `start`, stopped at `absorbing` or killed.

    At least one of `absorbing` (a vertex set) and `plan` (a KillingPlan)
    must be given; vertices with infinite killing rate absorb too.
    """
    if absorbing is None and plan is None:
        raise ValueError("need an absorbing set or a killing plan")
    w = _Walker(graph, plan, stream.generator(), skeleton, track_time)
    if absorbing:
        for b in absorbing:
            w.in_forest[b] = 1
    if plan is not None:
        for s in plan.S:
            w.in_forest[s] = 1
    if w.in_forest[start]:
        raise ValueError("start lies in the absorbing set")
    points, killed = w.walk(start)
    return LerwPath(points, killed, w.time if track_time else None)


def lerw_law(graph, path, absorbing=None, plan=None):
    """Exact probability of a given loop-erased trajectory.

    The path probability is the product of its jump rates times a ratio of
    principal minors of the killed generator; computed with `det_sub`.
    """
    from .graph import generator_matrix

    pts = list(path.points) if isinstance(path, LerwPath) else list(path)
    killed = path.killed if isinstance(path, LerwPath) else False
    absorbing = frozenset(absorbing or ())
    S = plan.S if plan is not None else frozenset()
    blocked = absorbing | S
    n = graph.n
    active = [x for x in range(n) if x not in blocked]
    index = {x: i for i, x in enumerate(active)}
    m = len(active)
    L = generator_matrix(graph, cap=max(4096, n))
    M = [[0.0] * m for _ in range(m)]
    for i, x in enumerate(active):
        for j, y in enumerate(active):
            M[i][j] = -L[x, y]
        if plan is not None:
            M[i][i] += plan.q(x)
    factors = 1.0
    for a, b in zip(pts, pts[1:]):
        factors *= graph.rate(a, b)
    if killed:
        last = pts[-1]
        if last in blocked:
            raise ValueError("killed path cannot end inside the absorbing set")
        factors *= plan.q(last)
        erased = pts
    else:
        if pts[-1] not in blocked:
            raise ValueError("absorbed path must end in the absorbing set")
        erased = pts[:-1]
    interior = set(erased)
    import numpy as np

    Ma = np.array(M)
    rest = [index[x] for x in active if x not in interior]
    return factors * det_sub(Ma, rest) / det_sub(Ma, range(m))


def sample_forest(graph, plan, stream, skeleton="direct", track_time=False,
                  order=None):
    """One exact draw from the forest measure of (graph, plan).

    Vertices with infinite killing rate are forced roots.  Walks start from
    the lowest uncovered index (or follow the order given); the resulting law
    does not depend on that choice.
    """
    w = _Walker(graph, plan, stream.generator(), skeleton, track_time)
    for s in plan.S:
        w.in_forest[s] = 1
    seq = range(graph.n) if order is None else order
    for start in seq:
        if not w.in_forest[start]:
            w.walk(start)
    forest = forest_from_parent(w.parent)
    finite = [q for q in plan.q_of if not math.isinf(q)]
    q_used = finite[0] if finite and len(set(finite)) == 1 else None
    return SampleReport(forest, q_used, forest.n_trees, w.steps,
                        w.time if track_time else None)


def sample_forest_batch(graph, plan, stream, count, skeleton="direct",
                        track_time=False):
    """Independent samples fanned over child streams, in stream order.

    ROOTFOREST_THREADS caps the worker pool (default 1: plain loop).
    """
    streams = [stream.child(i) for i in range(count)]
    threads = int(os.environ.get("ROOTFOREST_THREADS", "1"))
    if threads <= 1:
        return [sample_forest(graph, plan, s, skeleton, track_time) for s in streams]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(
            lambda s: sample_forest(graph, plan, s, skeleton, track_time), streams))


def sample_conditioned(graph, q, m, stream, max_tries=100000):
    """Rejection-sample the uniform-killing measure conditioned on m roots.

    Raises Exhausted with the observed root-count histogram when no draw with
    exactly m roots shows up within max_tries.
    """
    if not 1 <= m <= graph.n:
        raise ValueError("m out of range")
    plan = KillingPlan.uniform(graph.n, q)
    histogram = {}
    for i in range(max_tries):
        rep = sample_forest(graph, plan, stream.child(i))
        histogram[rep.n_roots] = histogram.get(rep.n_roots, 0) + 1
        if rep.n_roots == m:
            return rep.forest
    raise Exhausted(max_tries, histogram)


def expected_roots(spectrum, q):
    """Mean root count under uniform killing rate q: sum of q/(q+lambda_i)."""
    lam = spectrum.real()
    if q <= 0:
        raise ValueError("q must be > 0")
    return float(sum(q / (q + l) for l in lam))


def solve_target(spectrum, m, q0=1.0, rel_tol=1e-10, max_iters=200):
    """Rate q whose expected root count is m, by the fixed point q <- q*m/E(q).

    Requires a real spectrum.  m = n has no finite solution (all Bernoulli
    parameters would need to be 1) and m <= 1 only the q = 0 boundary, both
    rejected.
    """
    lam = spectrum.real()
    n = len(lam)
    if m >= n:
        raise DivergesToInfinity(f"expected root count reaches {n} only as q -> inf")
    if m <= 1:
        raise ValueError("m <= 1 is attained only at the q = 0 boundary")
    q = float(q0)
    for _ in range(max_iters):
        e = sum(q / (q + l) for l in lam)
        q_next = q * m / e
        if abs(q_next - q) <= rel_tol * q_next:
            return float(q_next)
        q = q_next
    from .errors import NoConvergence

    raise NoConvergence(f"fixed point did not settle after {max_iters} iterations")


def target_root_count(graph, m, q0, stream, max_iters=100, skeleton="direct"):
    """Resample with q <- q*m/r until the root count lands in m +/- 2*sqrt(m).

    Returns (forest, q_final, iterations); raises IterationCap carrying the
    (q, roots) trace after max_iters samples.
    """
    if not 1 <= m <= graph.n:
        raise ValueError("m out of range")
    if q0 <= 0:
        raise ValueError("q0 must be > 0")
    q = float(q0)
    lo, hi = m - 2 * math.sqrt(m), m + 2 * math.sqrt(m)
    trace = []
    for it in range(1, max_iters + 1):
        plan = KillingPlan.uniform(graph.n, q)
        rep = sample_forest(graph, plan, stream.child(it - 1), skeleton=skeleton)
        r = rep.n_roots
        trace.append((q, r))
        if lo <= r <= hi:
            return rep.forest, q, it
        q = q * m / r
    raise IterationCap(trace)


# -- forest JSON interchange -----------------------------------------------------


def forest_to_json(forest, q=None, seed=None):
    doc = {
        "n": forest.n,
        "parent": [p if p is not None else None for p in forest.parent],
        "roots": sorted(forest.roots),
        "q": q,
        "seed": seed,
    }
    return json.dumps(doc)


def forest_from_json(text, graph=None):
    doc = json.loads(text)
    parent = doc["parent"]
    if len(parent) != doc["n"]:
        raise ValueError("parent array length disagrees with n")
    return forest_from_parent(parent, graph)
