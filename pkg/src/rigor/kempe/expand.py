"""Trigonometric polynomials in (theta, phi) and their multiple-angle form.

A monomial cos^a(theta) sin^b(theta) cos^c(phi) sin^d(phi) is expanded
through z = e^{i theta}, w = e^{i phi}.  Every Laurent coefficient is a
rational multiple of a power of i, so with rational input the expansion is
exact; amplitudes and phases are only rounded at the end.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Dict, Tuple

import numpy as np

MAX_DEGREE = 12

Exponents = Tuple[int, int, int, int]


class DegreeError(ValueError):
    pass


class TrigPoly:
    """Polynomial in cos(theta), sin(theta), cos(phi), sin(phi).

    ``coeffs`` maps exponent tuples (a, b, c, d) to int/Fraction/float
    coefficients.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs=None):
        self.coeffs: Dict[Exponents, object] = {}
        for k, v in (coeffs or {}).items():
            if v != 0:
                self.coeffs[tuple(k)] = v

    @classmethod
    def const(cls, c):
        return cls({(0, 0, 0, 0): c})

    @classmethod
    def var(cls, name: str):
        idx = {"cos_theta": 0, "sin_theta": 1, "cos_phi": 2, "sin_phi": 3}[name]
        e = [0, 0, 0, 0]
        e[idx] = 1
        return cls({tuple(e): 1})

    def __add__(self, other):
        other = _lift(other)
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0) + v
        return TrigPoly(out)

    __radd__ = __add__

    def __neg__(self):
        return TrigPoly({k: -v for k, v in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-_lift(other))

    def __rsub__(self, other):
        return _lift(other) - self

    def __mul__(self, other):
        other = _lift(other)
        out: Dict[Exponents, object] = {}
        for k1, v1 in self.coeffs.items():
            for k2, v2 in other.coeffs.items():
                k = tuple(x + y for x, y in zip(k1, k2))
                out[k] = out.get(k, 0) + v1 * v2
        return TrigPoly(out)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("only non-negative integer powers")
        out = TrigPoly.const(1)
        for _ in range(n):
            out = out * self
        return out

    def degrees(self) -> Tuple[int, int]:
        """Largest degree in the theta pair and in the phi pair."""
        if not self.coeffs:
            return 0, 0
        return (max(a + b for a, b, _, _ in self.coeffs), max(c + d for _, _, c, d in self.coeffs))

    def __call__(self, theta, phi=0.0):
        theta = np.asarray(theta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        ct, st, cp, sp = np.cos(theta), np.sin(theta), np.cos(phi), np.sin(phi)
        out = np.zeros(np.broadcast(theta, phi).shape)
        for (a, b, c, d), v in self.coeffs.items():
            out = out + float(v) * ct**a * st**b * cp**c * sp**d
        return out

    def __repr__(self):
        return f"TrigPoly({self.coeffs!r})"


def _lift(x):
    if isinstance(x, TrigPoly):
        return x
    if isinstance(x, (int, Fraction, float)):
        return TrigPoly.const(x)
    raise TypeError(f"cannot combine TrigPoly with {type(x).__name__}")


# -- parsing ---------------------------------------------------------------------

_THETA = {"theta", "t", "θ", "x"}
_PHI = {"phi", "p", "φ", "y"}


def parse_trig(text: str) -> TrigPoly:
    """Parse e.g. ``"cos(theta)*cos(phi) + 1/2*sin(t)^2"``.

    Numbers are read as exact Fractions (decimals included).  Only +, -,
    *, / by constants and non-negative integer powers are allowed.
    """
    src = text.replace("^", "**")
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as e:
        raise ValueError(f"cannot parse {text!r}: {e.msg}") from None
    return _eval(tree.body)


def _eval(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return TrigPoly.const(Fraction(str(node.value)))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp):
        left = _eval(node.left)
        if isinstance(node.op, ast.Pow):
            n = _constant(node.right)
            if n.denominator != 1 or n < 0:
                raise ValueError("powers must be non-negative integers")
            return left ** int(n)
        right = _eval(node.right)
        if isinstance(node.op, ast.Add):
            return left + right
        if isinstance(node.op, ast.Sub):
            return left - right
        if isinstance(node.op, ast.Mult):
            return left * right
        if isinstance(node.op, ast.Div):
            c = _constant(node.right)
            if c == 0:
                raise ZeroDivisionError("division by zero")
            return left * (1 / c)
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and len(node.args) == 1:
        fn = node.func.id
        arg = node.args[0]
        if fn in ("cos", "sin") and isinstance(arg, ast.Name):
            if arg.id in _THETA:
                return TrigPoly.var(f"{fn}_theta")
            if arg.id in _PHI:
                return TrigPoly.var(f"{fn}_phi")
    if isinstance(node, ast.Name) and node.id == "pi":
        raise ValueError("pi is not rational; use a decimal approximation")
    raise ValueError(f"unsupported expression: {ast.unparse(node)}")


def _constant(node) -> Fraction:
    p = _eval(node)
    if set(p.coeffs) - {(0, 0, 0, 0)}:
        raise ValueError("expected a constant")
    return Fraction(p.coeffs.get((0, 0, 0, 0), 0))


# -- multiple-angle forms ----------------------------------------------------------

@dataclass(frozen=True)
class Term:
    A: float
    r: int
    s: int
    t: float

    def __call__(self, theta, phi=0.0):
        return self.A * np.cos(self.r * np.asarray(theta) + self.s * np.asarray(phi) + self.t)


@dataclass(frozen=True)
class MultiAngleForm:
    """f(theta, phi) = constant + sum_n A_n cos(r_n theta + s_n phi + t_n)."""

    constant: float
    terms: tuple

    def __post_init__(self):
        if not math.isfinite(self.constant) or not all(math.isfinite(t.A) and math.isfinite(t.t) for t in self.terms):
            raise ValueError("amplitudes and phases must be finite")

    def __call__(self, theta, phi=0.0):
        out = np.full(np.broadcast(np.asarray(theta), np.asarray(phi)).shape, float(self.constant))
        for term in self.terms:
            out = out + term(theta, phi)
        return out

    @property
    def abs_sum(self) -> float:
        return float(sum(abs(t.A) for t in self.terms))

    def __str__(self):
        parts = [f"{self.constant:.6g}"] if self.constant else []
        for t in self.terms:
            parts.append(f"{t.A:.6g}*cos({t.r}θ{t.s:+d}φ{t.t:+.6g})")
        return " + ".join(parts) or "0"


def _laurent(exps: Exponents):
    """Laurent expansion of one monomial: {(r, s): (Fraction, power of -i)}."""
    a, b, c, d = exps
    out: Dict[Tuple[int, int], Fraction] = {}
    tx = _one_var(a, b)
    px = _one_var(c, d)
    for r, u in tx.items():
        for s, v in px.items():
            out[(r, s)] = out.get((r, s), Fraction(0)) + u * v
    return out, b + d


def _one_var(a: int, b: int) -> Dict[int, Fraction]:
    # cos^a sin^b = 2^-a (2i)^-b sum C(a,j) C(b,k) (-1)^(b-k) z^(2j-a+2k-b); the i^-b is applied by the caller
    out: Dict[int, Fraction] = {}
    scale = Fraction(1, 2 ** (a + b))
    for j in range(a + 1):
        for k in range(b + 1):
            e = 2 * j - a + 2 * k - b
            out[e] = out.get(e, Fraction(0)) + scale * comb(a, j) * comb(b, k) * (-1) ** (b - k)
    return out


_UNIT = [(1, 0), (0, -1), (-1, 0), (0, 1)]  # (-i)^n


def angle_expand(poly) -> MultiAngleForm:
    """Rewrite a trig polynomial as a finite sum of cosines of multiple angles.

    Terms with equal (r, s) are merged by phasor addition; (r, s) is
    normalised so r > 0, or r == 0 and s > 0.

    Raises
    ------
    DegreeError
        If the degree in either variable pair exceeds 12.
    """
    if isinstance(poly, str):
        poly = parse_trig(poly)
    dt, dp = poly.degrees()
    if dt > MAX_DEGREE or dp > MAX_DEGREE:
        raise DegreeError(f"degree ({dt}, {dp}) exceeds the limit of {MAX_DEGREE} per variable")
    re: Dict[Tuple[int, int], object] = {}
    im: Dict[Tuple[int, int], object] = {}
    for exps, coef in poly.coeffs.items():
        lau, ipow = _laurent(exps)
        ur, ui = _UNIT[ipow % 4]
        for key, val in lau.items():
            re[key] = re.get(key, 0) + coef * val * ur
            im[key] = im.get(key, 0) + coef * val * ui
    constant = float(re.get((0, 0), 0))
    terms = []
    for (r, s) in sorted(re):
        if not (r > 0 or (r == 0 and s > 0)):
            continue
        x, y = re[(r, s)], im[(r, s)]
        if x == 0 and y == 0:
            continue
        A = 2.0 * math.hypot(float(x), float(y))
        if A == 0.0:
            continue
        terms.append(Term(A, r, s, math.atan2(float(y), float(x))))
    return MultiAngleForm(constant, tuple(terms))


def grid_check(poly, form: MultiAngleForm, n: int = 17) -> float:
    """Max |poly - form| on an n x n uniform grid of [0, 2 pi)^2."""
    g = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    T, P = np.meshgrid(g, g, indexing="ij")
    return float(np.abs(poly(T, P) - form(T, P)).max())


def form_from_terms(terms, constant=0.0) -> MultiAngleForm:
    """Build a form from (A, r, s, t) tuples."""
    return MultiAngleForm(float(constant), tuple(Term(float(A), int(r), int(s), float(t)) for A, r, s, t in terms))
