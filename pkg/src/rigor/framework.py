"""Planar bar-joint frameworks, truncation chains and comparison predicates.

An infinite framework is only ever handled through a :class:`FrameworkFamily`,
a rule producing the finite members of a nested chain of truncations.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

Edge = Tuple[int, int]

DEFAULT_TOL = 1e-9


class FrameworkError(ValueError):
    """Base class for framework validation failures."""


class BadIndexError(FrameworkError):
    pass


class SelfLoopError(FrameworkError):
    pass


class DuplicateEdgeError(FrameworkError):
    pass


class ZeroLengthEdgeError(FrameworkError):
    pass


class DisconnectedError(FrameworkError):
    pass


class GraphMismatchError(FrameworkError):
    pass


def _canonical(edge: Sequence[int]) -> Edge:
    i, j = int(edge[0]), int(edge[1])
    return (i, j) if i < j else (j, i)


def _is_connected(n: int, edges: Sequence[Edge]) -> bool:
    if n <= 1:
        return True
    adj: List[List[int]] = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = [False] * n
    seen[0] = True
    queue = deque([0])
    count = 1
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if not seen[w]:
                seen[w] = True
                count += 1
                queue.append(w)
    return count == n


@dataclass(frozen=True, eq=False)
class Framework:
    """A finite framework (G, p) in the plane.

    Edges keep the order they were given in (rows of the rigidity matrix
    follow it) but are stored with ``i < j``.
    """

    positions: np.ndarray
    edges: Tuple[Edge, ...]
    labels: Optional[Tuple[str, ...]] = None
    family: Optional[Dict[str, object]] = None
    dimension: int = field(default=2, init=False)

    def __post_init__(self) -> None:
        pos = np.array(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise FrameworkError(f"positions must have shape (n, 2), got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise FrameworkError("positions must be finite")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        n = pos.shape[0]

        seen = set()
        edges = []
        for e in self.edges:
            i, j = int(e[0]), int(e[1])
            if not (0 <= i < n and 0 <= j < n):
                raise BadIndexError(f"edge {(i, j)} references a vertex outside 0..{n - 1}")
            if i == j:
                raise SelfLoopError(f"self-loop at vertex {i}")
            ce = _canonical((i, j))
            if ce in seen:
                raise DuplicateEdgeError(f"duplicate edge {ce}")
            seen.add(ce)
            edges.append(ce)
        object.__setattr__(self, "edges", tuple(edges))

        if edges:
            idx = np.array(edges)
            lengths = np.linalg.norm(pos[idx[:, 0]] - pos[idx[:, 1]], axis=1)
            bad = np.flatnonzero(lengths <= 0.0)
            if bad.size:
                raise ZeroLengthEdgeError(f"edge {edges[bad[0]]} has zero length")
        else:
            lengths = np.zeros(0)
        lengths.setflags(write=False)
        object.__setattr__(self, "_lengths", lengths)

        if not _is_connected(n, edges):
            raise DisconnectedError("the abstract graph is not connected")
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != n:
                raise FrameworkError("labels must have one entry per vertex")
            object.__setattr__(self, "labels", labels)

    @property
    def n_vertices(self) -> int:
        return self.positions.shape[0]

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def lengths(self) -> np.ndarray:
        """Edge lengths, in edge order."""
        return self._lengths  # type: ignore[attr-defined]

    @property
    def edge_array(self) -> np.ndarray:
        return np.array(self.edges, dtype=int).reshape(-1, 2)

    def degree(self) -> np.ndarray:
        deg = np.zeros(self.n_vertices, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def has_edge(self, i: int, j: int) -> bool:
        return _canonical((i, j)) in set(self.edges)

    def with_positions(self, positions: np.ndarray) -> "Framework":
        return Framework(positions, self.edges, self.labels, self.family)

    def distance_matrix(self) -> np.ndarray:
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        return np.linalg.norm(diff, axis=-1)


def build_framework(positions, edges, labels=None, family=None) -> Framework:
    """Validate raw positions and index pairs and return a :class:`Framework`."""
    return Framework(np.asarray(positions, dtype=float), tuple(tuple(e) for e in edges), labels, family)


@dataclass(frozen=True)
class EdgeStats:
    lengths: np.ndarray
    vertex_min: np.ndarray
    vertex_max: np.ndarray
    global_min: float
    global_max: float


def edge_stats(f: Framework) -> EdgeStats:
    """Edge lengths plus the local scales m_i = min_j d_ij and M_i = max_j d_ij.

    Isolated vertices (only possible for a one-vertex framework) get NaN.
    """
    n = f.n_vertices
    vmin = np.full(n, np.inf)
    vmax = np.full(n, -np.inf)
    for (i, j), d in zip(f.edges, f.lengths):
        vmin[i] = min(vmin[i], d)
        vmin[j] = min(vmin[j], d)
        vmax[i] = max(vmax[i], d)
        vmax[j] = max(vmax[j], d)
    vmin[np.isinf(vmin)] = np.nan
    vmax[np.isinf(vmax)] = np.nan
    gmin = float(f.lengths.min()) if f.n_edges else math.nan
    gmax = float(f.lengths.max()) if f.n_edges else math.nan
    return EdgeStats(f.lengths.copy(), vmin, vmax, gmin, gmax)


FLAG_NAMES = ("regular", "edge_vanishing", "edge_unbounded", "bounded", "locally_finite", "pointed")


@dataclass(frozen=True)
class FrameworkFamily:
    """A standard chain of truncations standing in for an infinite framework.

    ``truncation(r)`` must return a framework whose vertices are a prefix of
    those of ``truncation(r + 1)``.  ``vertex_group`` maps a vertex index to
    its distance-from-base bucket (bay, level, ...) for growth profiles.
    """

    name: str
    truncation: Callable[[int], Framework]
    flags: Dict[str, Optional[bool]] = field(default_factory=dict)
    params: Dict[str, object] = field(default_factory=dict)
    base_edge: Edge = (0, 1)
    pair: Optional[Edge] = None
    vertex_group: Optional[Callable[[int], int]] = None
    min_rank: int = 1

    def __call__(self, r: int) -> Framework:
        return self.truncation(r)


def check_nesting(small: Framework, big: Framework) -> None:
    """Raise if ``small`` is not a vertex-induced prefix subframework of ``big``."""
    n = small.n_vertices
    if big.n_vertices < n:
        raise FrameworkError("larger truncation has fewer vertices")
    if not np.array_equal(small.positions, big.positions[:n]):
        raise FrameworkError("shared vertex positions differ between ranks")
    induced = {e for e in big.edges if e[0] < n and e[1] < n}
    if induced != set(small.edges):
        raise FrameworkError("truncation is not vertex induced in its successor")


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log y against log x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


@dataclass(frozen=True)
class Classification:
    regular: bool
    edge_vanishing: bool
    edge_unbounded: bool
    bounded: bool
    locally_finite: bool
    probe_depth: int
    evidence: Dict[str, object]


TREND_THRESHOLD = 0.1


def classify(fam: FrameworkFamily, probe_depth: int) -> Classification:
    """Classify a family from trends over its first ``probe_depth`` truncations.

    Trends are log-log slopes over the last half of the probed ranks.  A
    finite probe never settles a limit property, so declared analytic flags
    take precedence; disagreements are listed under ``evidence["discrepancies"]``.
    """
    if probe_depth < 1:
        raise ValueError("probe_depth must be >= 1")
    ranks = list(range(fam.min_rank, fam.min_rank + probe_depth))
    mins, maxs, norms, degs = [], [], [], []
    for r in ranks:
        f = fam(r)
        st = edge_stats(f)
        mins.append(st.global_min)
        maxs.append(st.global_max)
        norms.append(float(np.abs(f.positions).max()))
        degs.append(int(f.degree().max()))
    tail = slice(len(ranks) // 2, None)
    rr = ranks[tail]
    slopes = {
        "min_edge": loglog_slope(rr, mins[tail]),
        "max_edge": loglog_slope(rr, maxs[tail]),
        "max_norm": loglog_slope(rr, norms[tail]),
        "max_degree": loglog_slope(rr, degs[tail]),
    }

    def trend(key: str, sign: int) -> Optional[bool]:
        s = slopes[key]
        if math.isnan(s):
            return None
        return bool(sign * s > TREND_THRESHOLD)

    empirical = {
        "edge_vanishing": trend("min_edge", -1),
        "edge_unbounded": trend("max_edge", +1),
        "bounded": None if math.isnan(slopes["max_norm"]) else not trend("max_norm", +1),
        "locally_finite": None if math.isnan(slopes["max_degree"]) else not trend("max_degree", +1),
    }
    if empirical["edge_vanishing"] is not None and empirical["edge_unbounded"] is not None:
        empirical["regular"] = not (empirical["edge_vanishing"] or empirical["edge_unbounded"])
    else:
        empirical["regular"] = None

    final: Dict[str, bool] = {}
    discrepancies = []
    for key in ("edge_vanishing", "edge_unbounded", "bounded", "locally_finite", "regular"):
        declared = fam.flags.get(key)
        seen = empirical[key]
        if declared is not None and seen is not None and declared != seen:
            discrepancies.append(key)
        value = declared if declared is not None else seen
        final[key] = bool(value) if value is not None else False
    if final["edge_vanishing"] or final["edge_unbounded"]:
        final["regular"] = False

    evidence = {
        "ranks": ranks,
        "min_edge": mins,
        "max_edge": maxs,
        "max_norm": norms,
        "max_degree": degs,
        "slopes": slopes,
        "empirical": empirical,
        "discrepancies": discrepancies,
    }
    return Classification(probe_depth=probe_depth, evidence=evidence, **final)


def _rotation_to_x(v: np.ndarray) -> np.ndarray:
    d = math.hypot(v[0], v[1])
    c, s = v[0] / d, v[1] / d
    return np.array([[c, s], [-s, c]])


def normalise(f: Framework, base_edge: Edge) -> Framework:
    """Rigidly move ``f`` so the base edge starts at the origin and points along +x."""
    a, b = int(base_edge[0]), int(base_edge[1])
    if not f.has_edge(a, b):
        raise FrameworkError(f"base edge {(a, b)} is not an edge of the framework")
    shifted = f.positions - f.positions[a]
    rot = _rotation_to_x(shifted[b])
    out = shifted @ rot.T
    out[a] = 0.0
    out[b, 1] = 0.0
    return f.with_positions(out)


def are_equivalent(f: Framework, g: Framework, tol: float = DEFAULT_TOL) -> bool:
    """True when corresponding edges (identity correspondence) agree in length."""
    if f.n_vertices != g.n_vertices or set(f.edges) != set(g.edges):
        raise GraphMismatchError("frameworks do not share the same abstract graph")
    g_len = dict(zip(g.edges, g.lengths))
    return all(abs(d - g_len[e]) <= tol for e, d in zip(f.edges, f.lengths))


def best_isometry(p: np.ndarray, q: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
    """Least-squares isometry x -> R x + t carrying points ``p`` onto ``q``.

    Both the proper rotation and the reflected branch are solved in closed
    form; the one with the smaller worst-point residual wins.
    Returns ``(max_residual, R, t)``.
    """
    pc = p.mean(axis=0)
    qc = q.mean(axis=0)
    P = p - pc
    Q = q - qc
    best = (math.inf, np.eye(2), np.zeros(2))
    for flip in (np.eye(2), np.diag([1.0, -1.0])):
        Pf = P @ flip.T
        dot = float(np.sum(Pf * Q))
        cross = float(np.sum(Pf[:, 0] * Q[:, 1] - Pf[:, 1] * Q[:, 0]))
        theta = math.atan2(cross, dot)
        c, s = math.cos(theta), math.sin(theta)
        R = np.array([[c, -s], [s, c]]) @ flip
        t = qc - R @ pc
        res = float(np.max(np.linalg.norm(p @ R.T + t - q, axis=1))) if len(p) else 0.0
        if res < best[0]:
            best = (res, R, t)
    return best


def are_congruent(f: Framework, g: Framework, tol: float = DEFAULT_TOL) -> bool:
    """True when a plane isometry maps each p_i onto p'_i to within ``tol``."""
    if f.n_vertices != g.n_vertices:
        raise GraphMismatchError("frameworks have different vertex counts")
    res, _, _ = best_isometry(f.positions, g.positions)
    return res <= tol


MAX_ENUMERATION = 20


def count_congruence_classes(n: int, tol: float = DEFAULT_TOL) -> int:
    """Number of congruence classes among the 2**n sign flips of the n-edge harmonic chain."""
    from itertools import product

    from .generators import harmonic_chain

    if n < 1:
        raise ValueError("n must be >= 1")
    if n > MAX_ENUMERATION:
        raise ValueError(f"n={n} exceeds the enumeration limit {MAX_ENUMERATION}")
    # congruent frameworks share their distance matrix, so only frameworks in
    # the same rounded-distance bucket need the isometry test
    buckets: Dict[bytes, List[Framework]] = {}
    count = 0
    for signs in product((1, -1), repeat=n):
        f = harmonic_chain(n, signs)
        key = np.round(f.distance_matrix(), 6).tobytes()
        reps = buckets.setdefault(key, [])
        if not any(are_congruent(f, g, tol) for g in reps):
            reps.append(f)
            count += 1
    return count
