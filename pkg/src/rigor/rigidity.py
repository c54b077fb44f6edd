"""Rigidity matrices, infinitesimal flex spaces and approximate flexibility.

Coordinates are interleaved: column ``2*i`` is x_i and ``2*i + 1`` is y_i.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy import sparse

from .framework import Framework, FrameworkFamily, loglog_slope, TREND_THRESHOLD

NULL_TOL = 1e-9
MAX_COLUMNS = 4000
COLLINEAR_TOL = 1e-9


class TooLargeError(ValueError):
    pass


def rigidity_matrix(f: Framework) -> sparse.csr_matrix:
    """Sparse |E| x 2|V| rigidity matrix R(G, p).

    Row e = (i, j) holds p_i - p_j in the columns of vertex i and p_j - p_i
    in those of vertex j, i.e. half the Jacobian of the squared edge lengths.
    """
    m, n = f.n_edges, f.n_vertices
    if m == 0:
        return sparse.csr_matrix((0, 2 * n))
    e = f.edge_array
    d = f.positions[e[:, 0]] - f.positions[e[:, 1]]
    rows = np.repeat(np.arange(m), 4)
    cols = np.column_stack([2 * e[:, 0], 2 * e[:, 0] + 1, 2 * e[:, 1], 2 * e[:, 1] + 1]).ravel()
    vals = np.column_stack([d[:, 0], d[:, 1], -d[:, 0], -d[:, 1]]).ravel()
    return sparse.csr_matrix((vals, (rows, cols)), shape=(m, 2 * n))


def dense_rigidity(positions: np.ndarray, edges: np.ndarray) -> np.ndarray:
    n = positions.shape[0]
    m = edges.shape[0]
    R = np.zeros((m, 2 * n))
    d = positions[edges[:, 0]] - positions[edges[:, 1]]
    r = np.arange(m)
    R[r, 2 * edges[:, 0]] = d[:, 0]
    R[r, 2 * edges[:, 0] + 1] = d[:, 1]
    R[r, 2 * edges[:, 1]] = -d[:, 0]
    R[r, 2 * edges[:, 1] + 1] = -d[:, 1]
    return R


def _check_size(f: Framework) -> None:
    if 2 * f.n_vertices > MAX_COLUMNS:
        raise TooLargeError(
            f"{2 * f.n_vertices} coordinates exceeds the dense SVD limit of {MAX_COLUMNS}; "
            "analyse a lower truncation rank"
        )


def is_collinear(f: Framework, tol: float = COLLINEAR_TOL) -> bool:
    p = f.positions - f.positions.mean(axis=0)
    if len(p) < 3:
        return True
    s = np.linalg.svd(p, compute_uv=False)
    scale = max(1.0, float(np.abs(f.positions).max()))
    return bool(s[1] <= tol * scale * math.sqrt(len(p)))


def trivial_flex_basis(f: Framework) -> np.ndarray:
    """Orthonormal 3 x 2|V| basis of the translations and the rotation about the centroid."""
    p = f.positions
    if p.shape[0] < 2 or np.ptp(p, axis=0).max() == 0.0:
        raise ValueError("need at least two distinct points")
    n = p.shape[0]
    c = p - p.mean(axis=0)
    tx = np.tile([1.0, 0.0], n)
    ty = np.tile([0.0, 1.0], n)
    rot = np.column_stack([-c[:, 1], c[:, 0]]).ravel()
    q, _ = np.linalg.qr(np.column_stack([tx, ty, rot]))
    return q.T


def trivial_complement(f: Framework) -> np.ndarray:
    """2|V| x (2|V| - 3) orthonormal basis of the complement of the trivial flexes."""
    T = trivial_flex_basis(f)
    q, _ = np.linalg.qr(T.T, mode="complete")
    return q[:, 3:]


@dataclass
class FlexSpaceReport:
    nullity: int
    basis: np.ndarray
    proper_basis: np.ndarray
    singular_values: np.ndarray
    smallest_nontrivial_sv: float
    tol: float
    trivial_dim: int = 3
    flags: List[str] = field(default_factory=list)

    @property
    def proper_dim(self) -> int:
        return self.nullity - self.trivial_dim

    @property
    def rank(self) -> int:
        return len(self.singular_values) - self.nullity

    @property
    def infinitesimally_rigid(self) -> bool:
        return self.proper_dim == 0

    def to_dict(self) -> Dict[str, object]:
        return {
            "nullity": self.nullity,
            "trivial_dim": self.trivial_dim,
            "proper_dim": self.proper_dim,
            "rank": self.rank,
            "tol": self.tol,
            "singular_values": [float(s) for s in self.singular_values],
            "smallest_nontrivial_sv": float(self.smallest_nontrivial_sv),
            "flags": list(self.flags),
            "proper_flexes": [u.reshape(-1, 2).tolist() for u in self.proper_basis],
        }


def _all_singular(R: np.ndarray) -> tuple:
    """Singular values (ascending, padded with zeros to the column count) and right vectors."""
    m, ncol = R.shape
    if m == 0:
        return np.zeros(ncol), np.eye(ncol)
    _, s, vt = np.linalg.svd(R, full_matrices=True)
    s_full = np.zeros(ncol)
    s_full[: len(s)] = s
    order = np.argsort(s_full, kind="stable")
    return s_full[order], vt[order]


def null_count(s: np.ndarray, tol: float) -> int:
    smax = float(s.max()) if s.size else 0.0
    if smax == 0.0:
        smax = 1.0
    return int(np.sum(s < tol * smax))


def flex_space(f: Framework, tol: float = NULL_TOL) -> FlexSpaceReport:
    """Numerical null space of R(G, p) from a full SVD.

    A singular value counts as zero below ``tol * sigma_max``.
    """
    _check_size(f)
    R = rigidity_matrix(f).toarray()
    s, vt = _all_singular(R)
    nullity = null_count(s, tol)
    basis = vt[:nullity]

    flags = []
    if is_collinear(f):
        flags.append("degenerate_geometry")
    Q = trivial_complement(f)
    RQ = R @ Q
    sq, vq = _all_singular(RQ)
    k_proper = null_count(np.concatenate([sq, [s.max() if s.size else 0.0]]), tol)
    k_proper = min(k_proper, max(nullity - 3, 0))
    proper = (Q @ vq[:k_proper].T).T if k_proper else np.zeros((0, R.shape[1]))
    smallest = float(sq[0]) if sq.size else 0.0
    return FlexSpaceReport(nullity, basis, proper, s, smallest, tol, flags=flags)


def canonical_flex(basis: np.ndarray, eps: float = 1e-8) -> Optional[np.ndarray]:
    """The unit vector of span(basis) with the largest value in the first coordinate it can move.

    This is the projection of that coordinate axis onto the subspace, so it
    does not depend on which orthonormal basis was handed in.
    """
    if basis.shape[0] == 0:
        return None
    weight = np.sqrt(np.sum(basis**2, axis=0))
    hits = np.flatnonzero(weight > eps)
    if hits.size == 0:
        return None
    c = int(hits[0])
    u = basis.T @ basis[:, c]
    return u / np.linalg.norm(u)


def proper_flex(f: Framework, tol: float = NULL_TOL) -> Optional[np.ndarray]:
    """A deterministic unit proper infinitesimal flex, or None if infinitesimally rigid."""
    rep = flex_space(f, tol)
    if rep.proper_dim < 1:
        return None
    return canonical_flex(rep.proper_basis)


def pinned_null_space(f: Framework, pins: Sequence[int], tol: float = NULL_TOL) -> np.ndarray:
    """Basis (rows, full length 2|V|) of flexes that vanish on the pinned vertices."""
    R = rigidity_matrix(f).toarray()
    keep = np.ones(R.shape[1], dtype=bool)
    for v in pins:
        keep[2 * v : 2 * v + 2] = False
    s, vt = _all_singular(R[:, keep])
    k = null_count(np.concatenate([s, [np.abs(R).max()]]), tol)
    out = np.zeros((k, R.shape[1]))
    out[:, keep] = vt[:k]
    return out


# -- growth profiles -------------------------------------------------------------

def classify_trend(slope: float, threshold: float = TREND_THRESHOLD) -> str:
    if math.isnan(slope):
        return "unknown"
    if slope > threshold:
        return "growing"
    if slope < -threshold:
        return "decaying"
    return "bounded"


@dataclass
class RankProfile:
    rank: int
    proper_dim: int
    flex: Optional[np.ndarray]
    groups: List[int]
    magnitude: List[float]
    relative: List[float]
    sup_norm: float
    slope: float
    relative_slope: float

    @property
    def trend(self) -> str:
        return classify_trend(self.slope)

    @property
    def relative_trend(self) -> str:
        return classify_trend(self.relative_slope)


def select_base_flex(f: Framework, pins: Sequence[int], base_vertices: Sequence[int], tol: float = NULL_TOL) -> Optional[np.ndarray]:
    """Pinned flex concentrated as much as possible on ``base_vertices``.

    Among flexes vanishing on ``pins`` it maximises |u_base| / |u| and is
    scaled so the largest base-vertex speed is 1 (or the largest speed, if
    the base does not move).
    """
    N = pinned_null_space(f, pins, tol)
    if N.shape[0] == 0:
        return None
    mask = np.zeros(N.shape[1], dtype=bool)
    for v in base_vertices:
        mask[2 * v : 2 * v + 2] = True
    B = N[:, mask]
    w, vecs = np.linalg.eigh(B @ B.T)
    u = N.T @ vecs[:, -1]
    speeds = np.linalg.norm(u.reshape(-1, 2), axis=1)
    ref = speeds[list(base_vertices)].max() if len(base_vertices) else 0.0
    if ref <= 1e-12 * max(1.0, speeds.max()):
        ref = speeds.max()
    u = u / ref
    first = np.flatnonzero(np.abs(u) > 1e-9)
    if first.size and u[first[0]] < 0:
        u = -u
    return u


def flex_growth_profile(fam: FrameworkFamily, r_max: int, tol: float = NULL_TOL) -> List[RankProfile]:
    """Per-rank profile of the base-normalised proper flex against distance from the base.

    ``magnitude[g]`` is the largest vertex speed |u_i| in group g and
    ``relative[g]`` the largest relative edge rate |u_i - u_j| / d_ij over
    edges touching group g.  Slopes are log-log fits against g + 1.
    """
    if r_max < 2:
        raise ValueError("r_max must be >= 2")
    group_of = fam.vertex_group or (lambda v: v)
    out = []
    for r in range(fam.min_rank, r_max + 1):
        f = fam(r)
        groups = np.array([group_of(v) for v in range(f.n_vertices)])
        g0 = int(groups.min())
        base = [v for v in range(f.n_vertices) if groups[v] == g0 and v not in fam.base_edge]
        u = select_base_flex(f, fam.base_edge, base, tol)
        if u is None:
            out.append(RankProfile(r, 0, None, [], [], [], 0.0, math.nan, math.nan))
            continue
        speeds = np.linalg.norm(u.reshape(-1, 2), axis=1)
        U = u.reshape(-1, 2)
        ids = sorted(set(groups.tolist()))
        mag = [float(speeds[groups == g].max()) for g in ids]
        rel = [0.0] * len(ids)
        pos = {g: k for k, g in enumerate(ids)}
        for (i, j), d in zip(f.edges, f.lengths):
            rate = float(np.linalg.norm(U[i] - U[j]) / d)
            for g in (groups[i], groups[j]):
                rel[pos[g]] = max(rel[pos[g]], rate)
        x = [g - g0 + 1 for g in ids]
        proper_dim = flex_space(f, tol).proper_dim
        out.append(
            RankProfile(
                r, proper_dim, u, ids, mag, rel, float(speeds.max()), loglog_slope(x, mag), loglog_slope(x, rel)
            )
        )
    return out


# -- approximate flexibility --------------------------------------------------------

def edge_ratios(f: Framework, u: np.ndarray) -> np.ndarray:
    """|(u_i - u_j).(p_i - p_j)| / ((|u_i| + |u_j|) |p_i - p_j|) for every edge.

    Edges whose ends are both still contribute 0, or inf if (impossibly)
    the numerator is nonzero.
    """
    U = np.asarray(u, dtype=float).reshape(-1, 2)
    e = f.edge_array
    dp = f.positions[e[:, 0]] - f.positions[e[:, 1]]
    num = np.abs(np.sum((U[e[:, 0]] - U[e[:, 1]]) * dp, axis=1))
    den = (np.linalg.norm(U[e[:, 0]], axis=1) + np.linalg.norm(U[e[:, 1]], axis=1)) * f.lengths
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, np.inf, 0.0))
    return out


def _max_ratio_grad(f: Framework, u: np.ndarray) -> tuple:
    r = edge_ratios(f, u)
    k = int(np.argmax(r))
    i, j = f.edges[k]
    U = u.reshape(-1, 2)
    dp = f.positions[i] - f.positions[j]
    a = float(np.dot(U[i] - U[j], dp))
    ni, nj = np.linalg.norm(U[i]), np.linalg.norm(U[j])
    b = ni + nj
    d = f.lengths[k]
    g = np.zeros_like(U)
    if b == 0:
        return float(r[k]), g.ravel()
    sgn = math.copysign(1.0, a)
    g[i] += sgn * dp / (b * d)
    g[j] -= sgn * dp / (b * d)
    if ni > 0:
        g[i] -= abs(a) / (b * b * d) * U[i] / ni
    if nj > 0:
        g[j] -= abs(a) / (b * b * d) * U[j] / nj
    return float(r[k]), g.ravel()


@dataclass
class MarginResult:
    margin: float
    witness: np.ndarray
    exact: bool


def approx_flex_margin(f: Framework, k: int = 5, iters: int = 50, tol: float = NULL_TOL) -> MarginResult:
    """Upper bound on the smallest epsilon admitted by a proper flex.

    Candidates are the right singular vectors of R restricted to the
    complement of the trivial flexes, for its ``k`` smallest singular
    values; each is refined by projected subgradient descent on the
    max-over-edges ratio with step halving.
    """
    if f.n_edges == 0:
        raise ValueError("framework has no edges")
    rep = flex_space(f, tol)
    if rep.proper_dim >= 1:
        u = canonical_flex(rep.proper_basis)
        return MarginResult(float(edge_ratios(f, u).max()), u, True)
    Q = trivial_complement(f)
    RQ = rigidity_matrix(f).toarray() @ Q
    _, vq = _all_singular(RQ)
    best = MarginResult(math.inf, np.zeros(2 * f.n_vertices), False)
    for z in vq[: min(k, vq.shape[0])]:
        z = z / np.linalg.norm(z)
        val, g = _max_ratio_grad(f, Q @ z)
        step = 0.1
        for _ in range(iters):
            gz = Q.T @ g
            gn = np.linalg.norm(gz)
            if gn == 0:
                break
            accepted = False
            for _ in range(40):
                trial = z - step * gz / gn
                trial /= np.linalg.norm(trial)
                tval, tg = _max_ratio_grad(f, Q @ trial)
                if tval < val:
                    z, val, g = trial, tval, tg
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                break
            step *= 2.0
        if val < best.margin:
            best = MarginResult(val, Q @ z, False)
    return best
