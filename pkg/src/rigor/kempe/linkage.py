"""Term linkages, curve assembly, Fourier linkages and tracing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..framework import Framework
from .builder import DEFAULT_RANGE, AngleBar, Builder, ConstructionError
from .drive import Mechanism, angle_of, sweep
from .expand import MultiAngleForm, Term, form_from_terms
from .gadgets import GADGET_TOL, GadgetError, make_gadget

TAIL_TERMS = 10**6


class LinkageError(ValueError):
    pass


class TraceError(RuntimeError):
    pass


@dataclass(frozen=True)
class GadgetRecord:
    kind: str
    vertex_indices: tuple
    tolerance: float = GADGET_TOL


@dataclass
class Linkage:
    """A driven framework: driver (v1, v2, v3), tracer and operating range.

    The driver vertex v1 coincides with the hub and has exactly the two
    bars v1-v2 (the theta crank) and v1-v3 (phi crank, or the ground
    anchor for one-variable linkages).  The traced value is
    ``x(tracer) + constant``.
    """

    framework: Framework
    driver: Tuple[int, int, int]
    tracer: int
    operating_range: Tuple[float, float]
    ground: Tuple[int, ...]
    inputs: Dict[str, Tuple[int, float]]
    reference: Dict[str, float]
    gadgets: Tuple[GadgetRecord, ...] = ()
    phi_range: Optional[Tuple[float, float]] = None
    form: Optional[MultiAngleForm] = None
    constant: float = 0.0
    closed_at: Optional[float] = None
    chain: Tuple[int, ...] = ()
    report: dict = field(default_factory=dict)
    free_inputs: Dict[str, int] = field(default_factory=dict)

    @property
    def tolerance(self) -> float:
        return float(sum(g.tolerance for g in self.gadgets))

    @property
    def mechanism(self) -> Mechanism:
        f = self.framework
        fixed = tuple(self.ground) + (self.driver[0],)
        return Mechanism(f.edge_array, f.lengths, fixed, dict(self.inputs), hub=0)

    @property
    def chain_lengths(self) -> List[float]:
        """Bar lengths of the term chain from the hub outwards."""
        p = self.framework.positions
        pts = [0] + list(self.chain)
        return [float(np.linalg.norm(p[b] - p[a])) for a, b in zip(pts, pts[1:])]

    def g(self, pos: np.ndarray) -> float:
        v1, v2, v3 = self.driver
        return float(np.dot(pos[v2] - pos[v1], pos[v3] - pos[v1]))

    def value(self, pos: np.ndarray) -> float:
        return float(pos[self.tracer, 0]) + self.constant


# -- construction helpers --------------------------------------------------------

def _builder(form_terms, theta_range, phi_range):
    two = any(t.s != 0 for t in form_terms)
    th0 = 0.5 * (theta_range[0] + theta_range[1])
    ph0 = 0.5 * (phi_range[0] + phi_range[1]) if two else None
    b = Builder(th0, ph0, theta_range, phi_range if two else (0.0, 0.0))
    b.add_input("theta")
    if two:
        b.add_input("phi")
    return b, two


def _certify_used(b: Builder, uses):
    """Certify each gadget kind on the ranges it is used over."""
    for kind, params, ranges in uses:
        try:
            make_gadget(kind, ranges=ranges, **params)
        except GadgetError as e:
            raise LinkageError(f"uncertified gadget: {e}") from None


class _Angles:
    """Shared multiplier cascades for +-theta and +-phi."""

    def __init__(self, b: Builder):
        self.b = b
        self.cascades: Dict[Tuple[str, int], List[AngleBar]] = {}
        self.uses = []

    def source(self, name, sign):
        key = (name, sign)
        if key not in self.cascades:
            ab = self.b.inputs[name]
            if sign < 0:
                rng = self.b.angle_range(ab)
                self.uses.append(("reversor", {}, {"theta": rng}))
                ab = self.b.reverse(ab)
            self.cascades[key] = [ab]
        return self.cascades[key]

    def prepare(self, terms):
        need: Dict[Tuple[str, int], int] = {}
        for t in terms:
            for name, c in (("theta", t.r), ("phi", t.s)):
                if c:
                    key = (name, 1 if c > 0 else -1)
                    need[key] = max(need.get(key, 0), abs(c))
        for (name, sign), k in sorted(need.items()):
            base = self.source(name, sign)[0]
            if k > 1:
                self.uses.append(("multiplier", {"k": k}, {"theta": self.b.angle_range(base)}))
            self.cascades[(name, sign)] = self.b.multiples(base, k)

    def bar(self, r, s):
        parts = []
        for name, c in (("theta", r), ("phi", s)):
            if c:
                parts.append(self.cascades[(name, 1 if c > 0 else -1)][abs(c) - 1])
        if not parts:
            raise LinkageError("term with r = s = 0 is a constant; fold it into the constant")
        if len(parts) == 1:
            return parts[0]
        self.uses.append(("additor", {}, {"theta": self.b.angle_range(parts[0]), "phi": self.b.angle_range(parts[1])}))
        return self.b.add(parts[0], parts[1])


def _finish(b: Builder, two: bool, tracer: int, chain, form, constant, theta_range, phi_range, closed_at=None, report=None, close=False) -> Linkage:
    v1 = b.vertex(b.pos[b.hub], "driver")
    v2 = b.inputs["theta"].vertex
    v3 = b.inputs["phi"].vertex if two and not close else b.anchor
    b.bar(v1, v2)
    b.bar(v1, v3)
    inputs = {"theta": (v2, b.inputs["theta"].radius)}
    if two and not close:
        inputs["phi"] = (v3, b.inputs["phi"].radius)
    reference = {"theta": b.theta0}
    if two:
        reference["phi"] = b.phi0
    records = []
    for kind, verts in b.gadgets:
        records.append(GadgetRecord(kind, tuple(verts)))
    return Linkage(
        b.framework(),
        (v1, v2, v3),
        tracer,
        tuple(theta_range),
        tuple(b.ground),
        inputs,
        reference,
        tuple(records),
        tuple(phi_range) if two else None,
        form,
        float(constant),
        closed_at,
        tuple(chain),
        dict(report or {}),
        {"phi": b.inputs["phi"].vertex} if two and close else {},
    )


def _term_bar(b: Builder, ab: AngleBar, term: Term) -> AngleBar:
    # target angle r theta + s phi + t, turned by pi for negative amplitudes
    off = term.t + (math.pi if term.A < 0 else 0.0)
    return b.bar_on(ab, abs(term.A), off, "term")


def term_linkage(A: float, r: int, s: int = 0, t: float = 0.0, theta_range=DEFAULT_RANGE, phi_range=DEFAULT_RANGE) -> Linkage:
    """Linkage whose tracer has x = A cos(r theta + s phi + t).

    The phase is applied by turning the output bar rigidly; the bar has
    length |A|.
    """
    if A == 0 or not math.isfinite(A):
        raise LinkageError("amplitude must be finite and nonzero")
    form = form_from_terms([(A, r, s, t)])
    b, two = _builder(form.terms, theta_range, phi_range)
    ang = _Angles(b)
    try:
        ang.prepare(form.terms)
        bar = _term_bar(b, ang.bar(r, s), form.terms[0])
    except ConstructionError as e:
        raise LinkageError(f"gadget composition failure: {e}") from None
    _certify_used(b, ang.uses)
    return _finish(b, two, bar.vertex, [bar.vertex], form, 0.0, theta_range, phi_range)


def assemble_curve_linkage(form: MultiAngleForm, theta_range=DEFAULT_RANGE, phi_range=DEFAULT_RANGE, close: bool = False, tolerance: Optional[float] = None, line_scale: Optional[float] = None) -> Linkage:
    """Chain the term bars tip to tail so the tracer has x = sum of the terms.

    Terms are laid out by decreasing |A|; the n-th bar is carried to the
    current tip by n - 1 braced translators.  With ``close`` a Peaucellier
    cell holds the tracer on the vertical line through its reference
    position, i.e. the level set of the form through the reference point,
    and phi is left free.

    Raises
    ------
    LinkageError
        Empty form, a gadget that fails certification, or a composed
        tolerance above ``tolerance``.
    """
    if not form.terms:
        raise LinkageError("form has no terms")
    terms = sorted(form.terms, key=lambda t: (-abs(t.A), t.r, t.s))
    b, two = _builder(terms, theta_range, phi_range)
    if close and not two:
        raise LinkageError("closing the loop needs a two-variable form")
    ang = _Angles(b)
    try:
        ang.prepare(terms)
        bars = [_term_bar(b, ang.bar(t.r, t.s), t) for t in terms]
    except ConstructionError as e:
        raise LinkageError(f"gadget composition failure: {e}") from None
    chain_segments: List[Tuple[int, int]] = []
    tips = []
    for i, bar in enumerate(bars):
        tail, head = b.hub, bar.vertex
        for (s0, s1) in chain_segments:
            head = b.translate(s0, head, s1)
            tail = s1
        chain_segments.append((tail, head))
        tips.append(head)
    if any(k == "translator" for k, _ in b.gadgets):
        ang.uses.append(("translator", {}, {}))
    tracer = tips[-1]
    closed_at = None
    if close:
        scale = line_scale or max(1.0, form.abs_sum)
        _, closed_at = b.peaucellier(tracer, scale)
        ang.uses.append(("line_constraint", {}, {}))
        x = closed_at + 3.0 * scale
        b.ground_point(complex(x, -scale), "base")
        b.ground_point(complex(x, scale), "base")
        b.bar(len(b.pos) - 1, len(b.pos) - 2)
    _certify_used(b, ang.uses)
    link = _finish(b, two, tracer, tips, form_from_terms([(t.A, t.r, t.s, t.t) for t in terms], form.constant), form.constant, theta_range, phi_range, closed_at, close=close)
    if tolerance is not None and link.tolerance > tolerance:
        raise LinkageError(f"composed tolerance {link.tolerance:.2e} exceeds {tolerance:.2e}")
    return link


# -- Fourier linkages -------------------------------------------------------------------

def _coeff_array(c, n_max):
    if c is None:
        return np.zeros(n_max)
    if callable(c):
        n = np.arange(1, n_max + 1, dtype=float)
        try:
            v = np.asarray(c(n), dtype=float)
            if v.shape != n.shape:
                raise TypeError
        except Exception:
            v = np.array([float(c(int(k))) for k in range(1, n_max + 1)])
        return v
    v = np.zeros(n_max)
    arr = np.asarray(list(c), dtype=float)
    v[: min(len(arr), n_max)] = arr[:n_max]
    return v


def tail_bound(cos_coeffs, N: int, sin_coeffs=None) -> float:
    """T_N = sum_{n > N} |a_n| + |b_n|.

    Sequences are summed over the supplied entries; callables over the
    next 10^6 indices.

    Raises
    ------
    LinkageError
        If the coefficients look non-summable (a callable's tail block
        (10^5, 10^6] is not clearly smaller than the block before it).
    """
    seqs = [c for c in (cos_coeffs, sin_coeffs) if c is not None]
    if all(not callable(c) for c in seqs):
        total = 0.0
        for c in seqs:
            arr = np.abs(np.asarray(list(c), dtype=float))
            if not np.all(np.isfinite(arr)):
                raise LinkageError("non-finite coefficients")
            total += float(arr[N:].sum())
        return total
    M = N + TAIL_TERMS
    mag = np.abs(_coeff_array(cos_coeffs, M)) + np.abs(_coeff_array(sin_coeffs, M))
    if not np.all(np.isfinite(mag)):
        raise LinkageError("non-finite coefficients")
    b1 = mag[10**4 : 10**5].sum()
    b2 = mag[10**5 : 10**6].sum()
    if b2 > 0.5 * b1 and b2 > 1e-9:
        raise LinkageError("coefficients do not appear absolutely summable")
    return float(mag[N:].sum())


def fourier_linkage(cos_coeffs, N: int, sin_coeffs=None, a0: float = 0.0, theta_range=DEFAULT_RANGE) -> Linkage:
    """Pointed truncated Fourier linkage tracing (t, a0 + sum_{n<=N} a_n cos nt + b_n sin nt).

    Coefficients are sequences starting at n = 1 or callables of n.  Each
    harmonic becomes one term of amplitude hypot(a_n, b_n); terms are laid
    out by decreasing amplitude, so chain bars do not grow.  The abscissa
    of the traced graph is the driver angle and the ordinate is the
    tracer's x coordinate plus a0.
    """
    if N < 1:
        raise LinkageError("N must be >= 1")
    a = _coeff_array(cos_coeffs, N)
    bb = _coeff_array(sin_coeffs, N)
    T = tail_bound(cos_coeffs, N, sin_coeffs)
    terms = []
    for n in range(1, N + 1):
        R = math.hypot(a[n - 1], bb[n - 1])
        if R > 0:
            terms.append((R, n, 0, -math.atan2(bb[n - 1], a[n - 1])))
    if not terms:
        raise LinkageError("all coefficients up to N vanish")
    link = assemble_curve_linkage(form_from_terms(terms, a0), theta_range)
    link.report.update({"N": N, "tail_bound": T, "abs_sum": float(np.abs(a).sum() + np.abs(bb).sum()), "a0": float(a0)})
    return link


def partial_sum(cos_coeffs, N: int, sin_coeffs=None, a0: float = 0.0):
    a = _coeff_array(cos_coeffs, N)
    b = _coeff_array(sin_coeffs, N)

    def f(t):
        t = np.asarray(t, dtype=float)
        n = np.arange(1, N + 1)
        return a0 + np.cos(np.multiply.outer(t, n)) @ a + np.sin(np.multiply.outer(t, n)) @ b

    return f


# -- tracing ---------------------------------------------------------------------

@dataclass
class TraceResult:
    theta: np.ndarray
    phi: Optional[np.ndarray]
    tracer: np.ndarray
    values: np.ndarray
    g: np.ndarray
    residual: np.ndarray
    unique: bool
    checked: int

    @property
    def max_residual(self) -> float:
        return float(self.residual.max(initial=0.0))

    @property
    def graph(self) -> np.ndarray:
        return np.column_stack([self.theta, self.values])


def trace(link: Linkage, samples: int = 200, phi: Optional[float] = None, check_every: int = 1) -> TraceResult:
    """Drive theta across the operating range and record the tracer.

    The sweep runs in whichever direction makes g(t) increase; g must be
    strictly increasing and the motion unique (no free flex once the
    driver and ground are pinned) at every checked sample.

    Raises
    ------
    TraceError
        If g is not strictly increasing or uniqueness fails.
    """
    if samples < 2:
        raise ValueError("need at least two samples")
    mech = link.mechanism
    lo, hi = link.operating_range
    thetas = np.linspace(lo, hi, samples)
    if "phi" in link.inputs:
        if phi is None:
            phi = link.phi_range[1]
    pos0 = link.framework.positions
    plan = [{"theta": float(t), **({"phi": float(phi)} if "phi" in link.inputs else {})} for t in thetas]
    g_probe = [link.g(mech.place_inputs(pos0, plan[0])), link.g(mech.place_inputs(pos0, plan[-1]))]
    if g_probe[1] < g_probe[0]:
        plan = plan[::-1]
    recs = []
    unique = True
    checked = 0
    for k, (angles, p) in enumerate(sweep(mech, pos0, link.reference, plan)):
        if k % check_every == 0 or k == len(plan) - 1:
            checked += 1
            if mech.free_nullity(p) != 0:
                unique = False
                raise TraceError(f"motion not unique at theta = {angles['theta']:.6f}")
        phi_m = None
        if "phi" in link.free_inputs:
            phi_m = angle_of(p, link.free_inputs["phi"], 0, near=link.reference["phi"])
        recs.append((angles["theta"], phi_m, p[link.tracer].copy(), link.value(p), link.g(p), mech.residual(p)))
    th = np.array([r[0] for r in recs])
    ph = np.array([r[1] for r in recs]) if recs[0][1] is not None else (np.full(len(recs), phi) if phi is not None else None)
    g = np.array([r[4] for r in recs])
    if not np.all(np.diff(g) > 0):
        bad = int(np.argmin(np.diff(g)))
        raise TraceError(f"g(t) not strictly increasing at sample {bad}")
    return TraceResult(th, ph, np.array([r[2] for r in recs]), np.array([r[3] for r in recs]), g, np.array([r[5] for r in recs]), unique, checked)


def evaluate(link: Linkage, thetas: Sequence[float], phis: Sequence[float]) -> np.ndarray:
    """Traced values on a (theta, phi) grid, visited in serpentine order."""
    if "phi" not in link.inputs:
        raise LinkageError("evaluate needs an open two-variable linkage")
    thetas = list(thetas)
    phis = list(phis)
    plan = []
    for i, t in enumerate(thetas):
        col = range(len(phis)) if i % 2 == 0 else range(len(phis) - 1, -1, -1)
        plan += [(i, j, {"theta": float(t), "phi": float(phis[j])}) for j in col]
    out = np.zeros((len(thetas), len(phis)))
    it = sweep(link.mechanism, link.framework.positions, link.reference, [a for _, _, a in plan])
    for (i, j, _), (_, p) in zip(plan, it):
        out[i, j] = link.value(p)
    return out
