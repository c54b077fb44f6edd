"""Certified stand-alone gadgets.

Each gadget is built around the hub with one or two driven input bars and
certified by driving it through 25 samples of its operating range and
comparing the measured output with its relation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, Tuple

import numpy as np

from ..framework import Framework
from .builder import DEFAULT_RANGE, Builder, ConstructionError
from .drive import Mechanism, angle_of, sweep

GADGET_TOL = 1e-8
KINDS = ("parallelogram", "translator", "multiplier", "additor", "reversor", "line_constraint")

DEFAULT_RANGES = {
    "parallelogram": {"theta": (0.2, 1.2), "phi": (1.9, 2.9)},
    "translator": {"theta": (0.2, 1.2), "phi": (0.2, 1.2)},
    "multiplier": {"theta": DEFAULT_RANGE},
    "additor": {"theta": DEFAULT_RANGE, "phi": DEFAULT_RANGE},
    "reversor": {"theta": (-0.5, 0.5)},
    "line_constraint": {"theta": (-1.2, 1.2)},
}


class GadgetError(RuntimeError):
    pass


@dataclass
class Gadget:
    kind: str
    params: dict
    framework: Framework
    input_joints: Tuple[int, ...]
    output_joints: Tuple[int, ...]
    ranges: Dict[str, Tuple[float, float]]
    tolerance: float
    mechanism: Mechanism = field(repr=False)
    relation: Callable = field(repr=False)
    measure: Callable = field(repr=False)
    certified: bool = False
    max_error: float = math.nan

    @property
    def reference(self) -> Dict[str, float]:
        return {k: 0.5 * (lo + hi) for k, (lo, hi) in self.ranges.items()}

    def samples(self, n: int = 25):
        """Serpentine sample plan: n points for one input, a square grid for two."""
        names = list(self.ranges)
        if len(names) == 1:
            lo, hi = self.ranges[names[0]]
            return [{names[0]: float(x)} for x in np.linspace(lo, hi, n)]
        m = int(round(math.sqrt(n)))
        (lo1, hi1), (lo2, hi2) = self.ranges[names[0]], self.ranges[names[1]]
        out = []
        for i, x in enumerate(np.linspace(lo1, hi1, m)):
            ys = np.linspace(lo2, hi2, m)
            for y in ys if i % 2 == 0 else ys[::-1]:
                out.append({names[0]: float(x), names[1]: float(y)})
        return out

    def evaluate(self, angles: Dict[str, float]):
        """Drive from the reference configuration and return (measured, expected, positions)."""
        pos0 = self.framework.positions
        (_, p), = list(sweep(self.mechanism, pos0, self.reference, [angles]))
        return self.measure(p, angles), self.relation(angles), p


def certify(g: Gadget, n: int = 25) -> Gadget:
    """Drive ``g`` through ``n`` samples; raises GadgetError past tolerance."""
    worst = 0.0
    pos0 = g.framework.positions
    for angles, p in sweep(g.mechanism, pos0, g.reference, g.samples(n)):
        err = float(np.max(np.abs(np.asarray(g.measure(p, angles)) - np.asarray(g.relation(angles)))))
        worst = max(worst, err)
        if g.mechanism.free_nullity(p) != 0:
            raise GadgetError(f"{g.kind}: motion not unique at {angles}")
    g.max_error = worst
    g.certified = worst <= g.tolerance
    if not g.certified:
        raise GadgetError(f"{g.kind}{g.params}: relation error {worst:.3e} exceeds {g.tolerance:.1e}")
    return g


def _mech(b: Builder) -> Mechanism:
    f = b.framework()
    inputs = {k: (ab.vertex, ab.radius) for k, ab in b.inputs.items()}
    return Mechanism(f.edge_array, f.lengths, tuple(b.ground), inputs, hub=b.hub)


def _angle_gadget(kind, b, out, expected, ranges, params, tol):
    f = b.framework()
    ins = tuple(ab.vertex for ab in b.inputs.values())

    def measure(p, angles):
        return angle_of(p, out.vertex, b.hub, near=expected(angles))

    return Gadget(kind, params, f, ins, (out.vertex,), ranges, tol, _mech(b), expected, measure)


def _build(kind: str, params: dict, ranges: dict, tol: float) -> Gadget:
    ref = {k: 0.5 * (lo + hi) for k, (lo, hi) in ranges.items()}
    two = "phi" in ranges
    b = Builder(ref["theta"], ref.get("phi") if two else None, ranges["theta"], ranges.get("phi", (0.0, 0.0)))
    th = b.add_input("theta")
    ph = b.add_input("phi") if two else None

    if kind == "multiplier":
        k = int(params.get("k", 2))
        if k < 1:
            raise GadgetError("multiplier needs a positive integer k")
        out = b.bar_on(b.multiply(th, k), 1.0, 0.0, "out")
        return _angle_gadget(kind, b, out, lambda a: k * a["theta"], ranges, params, tol)
    if kind == "additor":
        out = b.bar_on(b.add(th, ph), 1.0, 0.0, "out")
        return _angle_gadget(kind, b, out, lambda a: a["theta"] + a["phi"], ranges, params, tol)
    if kind == "reversor":
        out = b.bar_on(b.reverse(th), 1.0, 0.0, "out")
        return _angle_gadget(kind, b, out, lambda a: -a["theta"], ranges, params, tol)
    if kind in ("translator", "parallelogram"):
        make = b.translate if kind == "translator" else b.parallelogram
        z = make(b.hub, th.vertex, ph.vertex)
        f = b.framework()

        def measure(p, a):
            return p[z] - p[ph.vertex]

        def relation(a):
            return np.array([math.cos(a["theta"]), math.sin(a["theta"])])

        return Gadget(kind, params, f, (th.vertex, ph.vertex), (z,), ranges, tol, _mech(b), relation, measure)
    if kind == "line_constraint":
        s = 4.0 / 3.0
        t_idx, x_line = b.inversor(b.anchor, th.vertex, s)
        f = b.framework()
        return Gadget(kind, params, f, (th.vertex,), (t_idx,), ranges, tol, _mech(b), lambda a: x_line, lambda p, a: p[t_idx, 0])
    raise GadgetError(f"unknown gadget kind {kind!r}; expected one of {KINDS}")


@lru_cache(maxsize=None)
def _cached(kind: str, params: tuple, ranges: tuple, tol: float) -> Gadget:
    try:
        g = _build(kind, dict(params), dict(ranges), tol)
    except ConstructionError as e:
        raise GadgetError(f"{kind}: {e}") from None
    return certify(g)


def make_gadget(kind: str, ranges=None, tolerance: float = GADGET_TOL, **params) -> Gadget:
    """Build and certify a gadget (cached per kind, parameters and range).

    Examples
    --------
    >>> g = make_gadget("multiplier", k=2)
    >>> g.certified
    True
    """
    if kind not in KINDS:
        raise GadgetError(f"unknown gadget kind {kind!r}; expected one of {KINDS}")
    rng = dict(DEFAULT_RANGES[kind])
    if ranges:
        rng.update(ranges)
    for k, (lo, hi) in rng.items():
        if not lo < hi:
            raise GadgetError(f"empty operating range for {k}")
    key = tuple(sorted((k, tuple(v)) for k, v in rng.items()))
    return _cached(kind, tuple(sorted(params.items())), key, float(tolerance))
