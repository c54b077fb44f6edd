"""Continuous flexes by arc-length continuation on the edge-length manifold."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .framework import Framework, FrameworkFamily, loglog_slope, normalise, TREND_THRESHOLD
from .rigidity import NULL_TOL, canonical_flex, dense_rigidity, null_count

PROJ_TOL = 1e-12
C_THRESHOLD = 1e-4


class ProjectionError(RuntimeError):
    def __init__(self, msg, residual=math.nan):
        super().__init__(f"{msg} (residual {residual:.3e})")
        self.residual = residual


class BranchPointError(RuntimeError):
    def __init__(self, step, before, after, trajectory=None, detail=None):
        msg = detail or f"null space dimension changed from {before} to {after}"
        super().__init__(f"{msg} at step {step}")
        self.step = step
        self.before, self.after = before, after
        self.trajectory = trajectory


def _residual(pos, edges, target):
    d = np.linalg.norm(pos[edges[:, 0]] - pos[edges[:, 1]], axis=1)
    return np.abs(d - target)


def _free_mask(n, pins):
    keep = np.ones(2 * n, dtype=bool)
    for v in pins:
        keep[2 * v : 2 * v + 2] = False
    return keep


def project_to_manifold(positions, edges, target_lengths, pins, tol=PROJ_TOL, max_iter=50, info=None):
    """Gauss-Newton projection onto the configurations with the given edge lengths.

    Pinned coordinates are frozen.  Each step is the minimum-norm least
    squares correction, so rank-deficient Jacobians are handled (and flagged
    in ``info["regularized"]``).

    Raises
    ------
    ProjectionError
        If the residual is not below ``tol`` after ``max_iter`` iterations.
    """
    pos = np.array(positions, dtype=float)
    edges = np.asarray(edges, dtype=int).reshape(-1, 2)
    target = np.asarray(target_lengths, dtype=float)
    if len(pins) < 2:
        raise ValueError("need at least two pinned vertices")
    if np.linalg.norm(pos[pins[0]] - pos[pins[1]]) == 0:
        raise ValueError("pinned base edge is degenerate")
    res = _residual(pos, edges, target)
    if not np.all(np.isfinite(res)):
        raise ProjectionError("non-finite initial residual")
    keep = _free_mask(len(pos), pins)
    regularized = False
    it = 0
    while res.max(initial=0.0) > tol:
        if it >= max_iter:
            raise ProjectionError(f"no convergence in {max_iter} iterations", float(res.max()))
        diff = pos[edges[:, 0]] - pos[edges[:, 1]]
        d = np.linalg.norm(diff, axis=1)
        J = dense_rigidity(pos, edges) / d[:, None]
        sol, _, rank, _ = np.linalg.lstsq(J[:, keep], -(d - target), rcond=None)
        regularized |= rank < min(J.shape[0], int(keep.sum()))
        step = np.zeros(2 * len(pos))
        step[keep] = sol
        pos = pos + step.reshape(-1, 2)
        res = _residual(pos, edges, target)
        if not np.all(np.isfinite(res)) or res.max() > 1e6:
            raise ProjectionError("divergence", float(res.max()))
        it += 1
    if info is not None:
        info["iterations"] = it
        info["regularized"] = bool(regularized)
        info["residual"] = float(res.max(initial=0.0))
    return pos


def _pinned_null(pos, edges, keep, tol):
    R = dense_rigidity(pos, edges)[:, keep]
    if R.shape[0] == 0:
        return np.eye(R.shape[1])
    _, s, vt = np.linalg.svd(R, full_matrices=True)
    s_full = np.zeros(R.shape[1])
    s_full[: len(s)] = s
    order = np.argsort(s_full, kind="stable")
    k = null_count(np.concatenate([s_full, [np.abs(R).max()]]), tol)
    return vt[order[:k]]


def self_stresses(pos, edges, tol=NULL_TOL) -> np.ndarray:
    """Rows spanning the left null space of the rigidity matrix."""
    R = dense_rigidity(pos, edges)
    if R.shape[0] == 0:
        return np.zeros((0, 0))
    u, s, _ = np.linalg.svd(R, full_matrices=True)
    s_full = np.zeros(R.shape[0])
    s_full[: len(s)] = s
    order = np.argsort(s_full, kind="stable")
    k = null_count(np.concatenate([s_full, [np.abs(R).max()]]), tol)
    return u[:, order[:k]].T


def _stress_forms(pos, edges, N, W):
    """Quadratic forms c -> sum_e w_e |u_i - u_j|^2 for u = N^T c."""
    k = N.shape[0]
    Nv = N.T.reshape(-1, 2, k)
    D = Nv[edges[:, 0]] - Nv[edges[:, 1]]
    A = np.einsum("eak,eal->ekl", D, D)
    return np.einsum("se,ekl->skl", W, A)


def second_order_directions(f: Framework, pins, tol: float = NULL_TOL, eps: float = 1e-9) -> np.ndarray:
    """Unit pinned flexes that pass the second-order (prestress) test.

    An infinitesimal flex u extends to second order iff every self-stress w
    has sum_e w_e |u_i - u_j|^2 = 0.  Solutions are found by least squares
    from deterministic starts; rows are unique up to sign, best first.
    """
    from scipy.optimize import least_squares

    edges = f.edge_array
    keep = _free_mask(f.n_vertices, pins)
    Nr = _pinned_null(f.positions, edges, keep, tol)
    k = Nr.shape[0]
    if k == 0:
        return np.zeros((0, 2 * f.n_vertices))
    N = np.zeros((k, 2 * f.n_vertices))
    N[:, keep] = Nr
    W = self_stresses(f.positions, edges, tol)
    if W.shape[0] == 0:
        u = np.zeros(2 * f.n_vertices)
        u[keep] = canonical_flex(Nr)
        return u[None]
    Q = _stress_forms(f.positions, edges, N, W)

    def fun(c):
        return np.concatenate([np.einsum("k,skl,l->s", c, Q, c), [c @ c - 1.0]])

    starts = list(np.eye(k))
    rng = np.random.default_rng(0)
    starts += list(rng.standard_normal((4 * k, k)))
    found = []
    for c0 in starts:
        sol = least_squares(fun, c0 / np.linalg.norm(c0), xtol=1e-15, ftol=1e-15, gtol=1e-15)
        if np.abs(sol.fun).max() > eps:
            continue
        c = sol.x / np.linalg.norm(sol.x)
        if any(abs(abs(c @ g) - 1.0) < 1e-6 for g in found):
            continue
        found.append(c)
    if not found:
        return np.zeros((0, 2 * f.n_vertices))
    ref = canonical_flex(Nr)
    ref_c = Nr @ ref
    found.sort(key=lambda c: -abs(c @ ref_c))
    out = []
    for c in found:
        u = N.T @ c
        first = np.flatnonzero(np.abs(u) > 1e-9)
        if first.size and u[first[0]] < 0:
            u = -u
        out.append(u / np.linalg.norm(u))
    return np.array(out)


def initial_tangent(f: Framework, pins, tol: float = NULL_TOL) -> Optional[np.ndarray]:
    """Deterministic starting direction: the canonical pinned flex, or the
    nearest second-order flex when the canonical one is obstructed."""
    edges = f.edge_array
    keep = _free_mask(f.n_vertices, pins)
    Nr = _pinned_null(f.positions, edges, keep, tol)
    if Nr.shape[0] == 0:
        return None
    u = np.zeros(2 * f.n_vertices)
    u[keep] = canonical_flex(Nr)
    W = self_stresses(f.positions, edges, tol)
    if W.shape[0] and Nr.shape[0] > 1:
        U = u.reshape(-1, 2)
        q = np.sum((U[edges[:, 0]] - U[edges[:, 1]]) ** 2, axis=1)
        if np.abs(W @ q).max() > 1e-9:
            cands = second_order_directions(f, pins, tol)
            if len(cands):
                return cands[0]
    return u


@dataclass(frozen=True)
class FlexTrajectory:
    """Samples of a continuous flex, parametrised by normalised arc length."""

    times: np.ndarray
    positions: np.ndarray
    edges: tuple
    lengths: np.ndarray
    pinned: tuple
    arc_step: float
    max_constraint_residual: float
    rigid: bool = False
    proper: bool = True
    stop_reason: str = "steps"
    null_dims: tuple = ()

    @property
    def n_samples(self) -> int:
        return len(self.times)

    def distance(self, i: int, j: int) -> np.ndarray:
        return np.linalg.norm(self.positions[:, i] - self.positions[:, j], axis=1)

    def displacement(self) -> np.ndarray:
        """Per-vertex max displacement from p(0)."""
        return np.linalg.norm(self.positions - self.positions[0], axis=2).max(axis=0)

    @property
    def M_estimate(self) -> float:
        return smoothness_report(self).M_estimate


def _gauge_norm(t, gauge_cols):
    if gauge_cols is None:
        return float(np.linalg.norm(t))
    return float(np.linalg.norm(t[gauge_cols]))


def simulate_flex(
    f: Framework,
    pins=(0, 1),
    steps: int = 100,
    arc_step: float = 0.01,
    seed_direction=None,
    tol: float = NULL_TOL,
    proj_tol: float = PROJ_TOL,
    gauge: Optional[Sequence[int]] = None,
    stop: Optional[Callable[[np.ndarray], bool]] = None,
    max_step: Optional[float] = None,
) -> FlexTrajectory:
    """Trace a continuous flex of ``f`` with ``pins`` held fixed.

    Each step moves ``arc_step`` along the unit tangent (measured on the
    ``gauge`` vertices if given) and projects back to the manifold.  The
    tangent is the previous one projected onto the current pinned null
    space.  ``stop(positions)`` may end the path early.  ``max_step`` caps
    the full-vector length of a step, which matters near folds where the
    gauge vertices barely move.

    Raises
    ------
    BranchPointError
        If the pinned null-space dimension changes along the path; the
        partial trajectory is attached.
    """
    pins = tuple(int(v) for v in pins)
    if len(pins) != 2 or pins[0] == pins[1]:
        raise ValueError("pins must be two distinct vertices")
    n = f.n_vertices
    edges = f.edge_array
    target = f.lengths
    keep = _free_mask(n, pins)
    gauge_cols = None
    if gauge is not None:
        g = np.zeros(2 * n, dtype=bool)
        for v in gauge:
            g[2 * v : 2 * v + 2] = True
        gauge_cols = g

    p = f.positions.copy()
    N = _pinned_null(p, edges, keep, tol)
    if N.shape[0] == 0:
        pos = np.repeat(p[None], steps + 1, axis=0)
        return FlexTrajectory(np.linspace(0, 1, steps + 1), pos, f.edges, target, pins, arc_step, 0.0, rigid=True, proper=False, stop_reason="rigid", null_dims=(0,))

    def full(v):
        out = np.zeros(2 * n)
        out[keep] = v
        return out

    if seed_direction is not None:
        seed = np.asarray(seed_direction, dtype=float).ravel()[keep]
        t = N.T @ (N @ seed)
        if np.linalg.norm(t) < 1e-12:
            raise ValueError("seed direction has no component in the pinned flex space")
        t = full(t)
    else:
        t = initial_tangent(f, pins, tol)
    scale = _gauge_norm(t, gauge_cols)
    if scale < 1e-12:
        gauge_cols, scale = None, float(np.linalg.norm(t))
    t /= scale

    samples = [p.copy()]
    arcs = [0.0]
    dims = [N.shape[0]]
    worst = float(_residual(p, edges, target).max(initial=0.0))
    reason = "steps"
    ref_dim = None

    def build(reason_):
        pos = np.array(samples)
        s = np.array(arcs)
        times = s / s[-1] if s[-1] > 0 else np.linspace(0, 1, len(s))
        disp = np.linalg.norm(pos - pos[0], axis=2).max()
        return FlexTrajectory(times, pos, f.edges, target, pins, arc_step, worst, proper=bool(disp > 10 * proj_tol), stop_reason=reason_, null_dims=tuple(dims))

    for k in range(steps):
        h = arc_step
        if max_step is not None:
            h = min(h, max_step / float(np.linalg.norm(t)))
        pred = p + h * t.reshape(-1, 2)
        try:
            q = project_to_manifold(pred, edges, target, pins, proj_tol)
        except ProjectionError:
            reason = f"projection failed at step {k + 1}"
            break
        if np.linalg.norm(q - p) < 1e-3 * h * float(np.linalg.norm(t)):
            # projection undid the step: no continuous motion this way
            reason = f"stalled at step {k + 1}"
            break
        N = _pinned_null(q, edges, keep, tol)
        dims.append(N.shape[0])
        if ref_dim is None:
            ref_dim = N.shape[0]
        if N.shape[0] != ref_dim or N.shape[0] == 0:
            raise BranchPointError(k + 1, dims[0], N.shape[0], build("branch point"))
        secant = (q - p).ravel()
        tn = full(N.T @ (N @ secant[keep]))
        if _gauge_norm(tn, gauge_cols) < 1e-12:
            raise BranchPointError(k + 1, ref_dim, N.shape[0], build("branch point"), detail="tangent vanished")
        t = tn / _gauge_norm(tn, gauge_cols)
        arcs.append(arcs[-1] + _gauge_norm(secant, gauge_cols))
        p = q
        samples.append(p.copy())
        worst = max(worst, float(_residual(p, edges, target).max(initial=0.0)))
        if stop is not None and stop(p):
            reason = "stop condition"
            break
    return build(reason)


# -- smoothness ---------------------------------------------------------------------

@dataclass
class SmoothnessReport:
    M_estimate: float
    pair_max: np.ndarray
    max_jump: float
    differentiable: bool

    def restricted(self, vertices: Sequence[int]) -> float:
        idx = np.asarray(list(vertices), dtype=int)
        return float(self.pair_max[np.ix_(idx, idx)].max(initial=0.0))


def smoothness_report(traj: FlexTrajectory) -> SmoothnessReport:
    """Central-difference bounds on |d_ij'(t)| over all vertex pairs.

    ``differentiable`` is False when the derivative jumps by more than half
    of M between consecutive samples, which signals a kink in the path.
    """
    if traj.n_samples < 3:
        raise ValueError("need at least three samples")
    P = traj.positions
    n = P.shape[1]
    if np.all(P == P[0]):
        z = np.zeros((n, n))
        return SmoothnessReport(0.0, z, 0.0, True)
    D = np.linalg.norm(P[:, :, None, :] - P[:, None, :, :], axis=3)
    dD = np.gradient(D, traj.times, axis=0, edge_order=2)
    pair_max = np.abs(dD).max(axis=0)
    M = float(pair_max.max())
    jump = float(np.abs(np.diff(dD, axis=0)).max())
    return SmoothnessReport(M, pair_max, jump, bool(jump <= 0.5 * M + 1e-12))


# -- chain protocol -----------------------------------------------------------------

VERDICT_OK = "hypotheses satisfied"
VERDICT_DELTA = "hypotheses fail: Δ_r → 0"
VERDICT_M = "hypotheses fail: M_r unbounded"


@dataclass
class ProtocolRow:
    rank: int
    delta: float
    M: float
    M_all: float
    residual: float
    stop_reason: str
    error: str = ""


@dataclass
class ProtocolResult:
    family: str
    pair: tuple
    rows: List[ProtocolRow]
    delta_slope: float
    M_slope: float
    c: float
    M: float
    verdict: str
    c_threshold: float = C_THRESHOLD

    @property
    def ranks(self) -> List[int]:
        return [r.rank for r in self.rows]

    @property
    def deltas(self) -> np.ndarray:
        return np.array([r.delta for r in self.rows])

    @property
    def Ms(self) -> np.ndarray:
        return np.array([r.M for r in self.rows])

    @property
    def satisfied(self) -> bool:
        return self.verdict.startswith(VERDICT_OK)


def _range_stop(i, j, d0, cap):
    state = {"best": 0.0}

    def stop(p):
        dev = abs(float(np.linalg.norm(p[i] - p[j])) - d0)
        if dev >= cap:
            return True
        if dev < state["best"] - 1e-12 * max(1.0, d0):
            return True
        state["best"] = max(state["best"], dev)
        return False

    return stop


def _one_direction(f, fam, i, j, sign, steps, arc_step, cap, gauge, tol, proj_tol, max_step=None):
    d0 = float(np.linalg.norm(f.positions[i] - f.positions[j]))
    t0 = initial_tangent(f, fam.base_edge, tol)
    if t0 is None:
        return None
    seed = sign * t0
    try:
        traj = simulate_flex(f, fam.base_edge, steps, arc_step, seed, tol, proj_tol, gauge, _range_stop(i, j, d0, cap * d0), max_step)
    except BranchPointError as e:
        traj = e.trajectory
    return traj


def chain_flex_protocol(
    fam: FrameworkFamily,
    i: Optional[int] = None,
    j: Optional[int] = None,
    r_max: int = 8,
    steps: int = 2000,
    arc_step: float = 0.01,
    cap: float = 0.5,
    step_cap: float = 10.0,
    c_threshold: float = C_THRESHOLD,
    tol: float = NULL_TOL,
    proj_tol: float = PROJ_TOL,
    threads: int = 1,
) -> ProtocolResult:
    """Flex every truncation up to ``r_max`` and track the separation of v_i, v_j.

    Each rank is normalised on its base edge, flexed in both directions of
    the deterministic proper flex until d_ij turns back (the flex range is
    exhausted), |d_ij - d_ij(0)| reaches ``cap * d_ij(0)``, a branch point
    is hit, or the step budget runs out.  Step length is measured on the
    vertices of the first truncation so ranks are comparable, with the full
    step capped at ``step_cap * arc_step``.  ``delta`` is the larger of the two excursions and ``M`` the
    largest |d'| over pairs of first-truncation vertices; ``M_all`` is the
    all-pairs bound.  ``threads`` > 1 runs ranks concurrently.
    """
    if r_max < 2:
        raise ValueError("r_max must be >= 2")
    if i is None or j is None:
        if fam.pair is None:
            raise ValueError("family has no default vertex pair")
        i, j = fam.pair
    g1 = list(range(fam(fam.min_rank).n_vertices))
    if i not in g1 or j not in g1:
        raise ValueError("v_i and v_j must belong to the first truncation")
    def one_rank(r):
        f = normalise(fam(r), fam.base_edge)
        best = None
        err = ""
        for sign in (1.0, -1.0):
            try:
                traj = _one_direction(f, fam, i, j, sign, steps, arc_step, cap, g1, tol, proj_tol, step_cap * arc_step)
            except Exception as e:  # recorded, protocol continues
                err = f"{type(e).__name__}: {e}"
                continue
            if traj is None:
                break
            d = traj.distance(i, j)
            delta = abs(float(d[-1] - d[0]))
            if best is None or delta > best[0]:
                best = (delta, traj)
        if best is None:
            return ProtocolRow(r, 0.0, 0.0, 0.0, 0.0, "rigid" if not err else "failed", err)
        delta, traj = best
        if traj.n_samples >= 3:
            rep = smoothness_report(traj)
            M, M_all = rep.restricted(g1), rep.M_estimate
        else:
            M = M_all = 0.0
        return ProtocolRow(r, delta, M, M_all, traj.max_constraint_residual, traj.stop_reason, err)

    ranks_todo = range(fam.min_rank, r_max + 1)
    if threads > 1:
        # ranks are independent; map keeps rank order so output is unchanged
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(one_rank, ranks_todo))
    else:
        rows = [one_rank(r) for r in ranks_todo]

    ranks = np.array([row.rank for row in rows], dtype=float)
    deltas = np.array([row.delta for row in rows])
    Ms = np.array([row.M for row in rows])
    half = slice(len(rows) // 2, None)
    ok_d = deltas[half] > 0
    d_slope = loglog_slope(ranks[half][ok_d], deltas[half][ok_d]) if ok_d.sum() >= 2 else math.nan
    ok_m = Ms[half] > 0
    m_slope = loglog_slope(ranks[half][ok_m], Ms[half][ok_m]) if ok_m.sum() >= 2 else math.nan
    c = float(deltas.min())
    M = float(Ms.max())
    if c < c_threshold or (not math.isnan(d_slope) and d_slope < -TREND_THRESHOLD):
        verdict = VERDICT_DELTA
    elif not math.isnan(m_slope) and m_slope > TREND_THRESHOLD:
        verdict = VERDICT_M
    else:
        verdict = f"{VERDICT_OK} at depth {r_max} with c = {c:.6g}, M = {M:.6g}"
    return ProtocolResult(fam.name, (i, j), rows, d_slope, m_slope, c, M, verdict, c_threshold)
