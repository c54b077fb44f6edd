"""Incremental construction of Kempe-type linkages.

Every angle is carried by a bar from the hub O (vertex 0).  An
``AngleBar`` records which vertex sits on the bar and the affine form
``c_theta * theta + c_phi * phi + offset`` that its polar angle follows.
Geometry is computed at the reference inputs; later configurations are
reached by driving (see ``drive``).

Angle-doubling cell (contraparallelogram O, A, B, C with |OA| = |BC| = a
and |AB| = |OC| = b, a < b): with k = b / a, the points D = k R B and
E = k R C, R the rotation taking A's direction to C's, lie on the line CB
and satisfy |DE| = b, |OE| = k b.  Bracing {C, B, D} rigid (helper X)
and adding bars DE and OE forces angle(E) = 2 angle(C) - angle(A).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..framework import Framework, build_framework

RATIO = 1.25
DEFAULT_RANGE = (0.2, 1.2)
MIN_SHAPE_SIN = 0.05


class ConstructionError(ValueError):
    pass


@dataclass(frozen=True)
class AngleBar:
    vertex: int
    radius: float
    c_theta: float
    c_phi: float
    offset: float

    def angle(self, theta, phi=0.0):
        return self.c_theta * theta + self.c_phi * phi + self.offset

    def linear(self):
        return (self.c_theta, self.c_phi)


class Builder:
    """Accumulates vertices and bars around a hub and a ground anchor.

    Vertex 0 is the hub O, vertex 1 the ground anchor G at (-1, 0).
    """

    def __init__(self, theta0: float, phi0: Optional[float] = None, theta_range=DEFAULT_RANGE, phi_range=DEFAULT_RANGE, ratio: float = RATIO):
        if ratio <= 1.0:
            raise ConstructionError("cell ratio b/a must exceed 1")
        self.pos: List[complex] = []
        self.labels: List[str] = []
        self.edges: List[Tuple[int, int]] = []
        self._edge_set = set()
        self.ground: List[int] = []
        self.inputs: Dict[str, AngleBar] = {}
        self.theta0, self.phi0 = theta0, (phi0 if phi0 is not None else 0.0)
        self.theta_range = tuple(theta_range)
        self.phi_range = tuple(phi_range) if phi0 is not None else (0.0, 0.0)
        self.ratio = ratio
        self.hub = self.vertex(0j, "hub")
        self.anchor = self.vertex(-1 + 0j, "ground")
        self.ground += [self.hub, self.anchor]
        self.bar(self.hub, self.anchor)
        self.gadgets: List[Tuple[str, List[int]]] = []

    # -- primitives -------------------------------------------------------------

    def vertex(self, z: complex, label: str = "") -> int:
        self.pos.append(complex(z))
        self.labels.append(label)
        return len(self.pos) - 1

    def bar(self, i: int, j: int) -> None:
        key = (min(i, j), max(i, j))
        if i == j or key in self._edge_set:
            return
        if abs(self.pos[i] - self.pos[j]) < 1e-12:
            raise ConstructionError(f"bar {key} would have zero length")
        self._edge_set.add(key)
        self.edges.append(key)

    def rigid_attach(self, base: int, ref: int, z: complex, label: str = "", helpers=None) -> int:
        """New vertex at ``z`` held rigid relative to the segment base-ref."""
        pb, pr = self.pos[base], self.pos[ref]
        d = pr - pb
        cross = (d.conjugate() * (z - pb)).imag
        if abs(cross) > 1e-6 * abs(d) * max(abs(z - pb), 1e-12):
            v = self.vertex(z, label)
            self.bar(base, v)
            self.bar(ref, v)
            return v
        h = self.vertex(pb + 1j * d, label + ":helper" if label else "helper")
        if helpers is not None:
            helpers.append(h)
        self.bar(base, h)
        self.bar(ref, h)
        v = self.vertex(z, label)
        self.bar(base, v)
        self.bar(h, v)
        return v

    def ground_point(self, z: complex, label: str = "ground") -> int:
        helpers = []
        v = self.rigid_attach(self.hub, self.anchor, z, label, helpers)
        self.ground += helpers + [v]
        return v

    def add_input(self, name: str, radius: float = 1.0) -> AngleBar:
        if name == "theta":
            ab = AngleBar(-1, radius, 1.0, 0.0, 0.0)
        elif name == "phi":
            ab = AngleBar(-1, radius, 0.0, 1.0, 0.0)
        else:
            raise ConstructionError(f"unknown input {name!r}")
        z = radius * cmath.exp(1j * self.ref_angle(ab))
        v = self.vertex(z, name)
        self.bar(self.hub, v)
        ab = replace(ab, vertex=v)
        self.inputs[name] = ab
        return ab

    # -- angle bookkeeping ------------------------------------------------------

    def ref_angle(self, ab: AngleBar) -> float:
        return ab.angle(self.theta0, self.phi0)

    def angle_range(self, ab: AngleBar) -> Tuple[float, float]:
        vals = [ab.angle(t, p) for t in self.theta_range for p in self.phi_range]
        return min(vals), max(vals)

    def mid(self, ab: AngleBar) -> float:
        lo, hi = self.angle_range(ab)
        return 0.5 * (lo + hi)

    def bar_on(self, ab: AngleBar, radius: float, offset: float, label: str = "") -> AngleBar:
        """A vertex at ``radius`` on a bar rigidly turned from ``ab`` by ``offset - ab.offset``."""
        if abs(radius - ab.radius) < 1e-15 and abs(offset - ab.offset) < 1e-15:
            return ab
        new = replace(ab, radius=radius, offset=offset)
        z = radius * cmath.exp(1j * self.ref_angle(new))
        v = self.rigid_attach(self.hub, ab.vertex, z, label)
        return replace(new, vertex=v)

    def ground_bar(self, radius: float, angle: float, label: str = "ground") -> AngleBar:
        v = self.ground_point(radius * cmath.exp(1j * angle), label)
        return AngleBar(v, radius, 0.0, 0.0, angle)

    # -- contraparallelogram cell ---------------------------------------------------

    def cell(self, A: AngleBar, C: AngleBar, E: Optional[AngleBar] = None, new_c: bool = False) -> AngleBar:
        """Angle-doubling cell; returns the bar with angle 2 C - A.

        With ``E`` given, the output vertex already exists (bisector use)
        and only the bar D-E is added.  ``new_c`` adds the hub bar O-C.
        """
        a, b = A.radius, C.radius
        k = b / a
        if abs(k - self.ratio) > 1e-9:
            raise ConstructionError(f"cell radii ratio {k} differs from {self.ratio}")
        zA, zC = self.pos[A.vertex], self.pos[C.vertex]
        lo, hi = self.angle_range(replace(C, c_theta=C.c_theta - A.c_theta, c_phi=C.c_phi - A.c_phi, offset=C.offset - A.offset))
        if not (0.0 < lo and hi < math.pi and min(math.sin(lo), math.sin(hi)) >= MIN_SHAPE_SIN):
            raise ConstructionError(f"cell shape angle range ({lo:.3f}, {hi:.3f}) leaves (0, pi)")
        B = _circle_meet(zA, b, zC, a, avoid=zA + zC)
        rot = (zC / b) / (zA / a)
        zD = k * rot * B
        zE = k * rot * zC
        iB = self.vertex(B, "cell:B")
        iD = self.vertex(zD, "cell:D")
        iX = self.vertex(B + 1j * (B - zC), "cell:X")
        if new_c:
            self.bar(self.hub, C.vertex)
        self.bar(A.vertex, iB)
        self.bar(iB, C.vertex)
        self.bar(iB, iD)
        self.bar(iX, C.vertex)
        self.bar(iX, iB)
        self.bar(iX, iD)
        out = AngleBar(-1, k * b, 2 * C.c_theta - A.c_theta, 2 * C.c_phi - A.c_phi, 2 * C.offset - A.offset)
        if E is None:
            iE = self.vertex(zE, "cell:E")
            self.bar(self.hub, iE)
        else:
            iE = E.vertex
            if abs(self.pos[iE] - zE) > 1e-9 * max(1.0, abs(zE)):
                raise ConstructionError("bisector cell does not close")
        self.bar(iD, iE)
        return replace(out, vertex=iE)

    # -- gadgets --------------------------------------------------------------

    def multiples(self, ab: AngleBar, kmax: int) -> List[AngleBar]:
        """Bars R_1 = ab, ..., R_kmax with R_j = j * ab - (j - 1) * g.

        The ground bar R_0 sits at g = mid(ab) - pi / 2, so every cell in the
        cascade has shape angle ab - g, centred on pi / 2.
        """
        if kmax < 1:
            raise ConstructionError("multiplier needs k >= 1")
        out = [ab]
        if kmax == 1:
            return out
        start = len(self.pos)
        g = self.mid(ab) - math.pi / 2
        prev = self.ground_bar(ab.radius / self.ratio, g, "mult:ground")
        cur = ab
        for _ in range(kmax - 1):
            nxt = self.cell(prev, cur)
            prev, cur = cur, nxt
            out.append(cur)
        self.gadgets.append((f"multiplier({kmax})", [ab.vertex] + list(range(start, len(self.pos)))))
        return out

    def multiply(self, ab: AngleBar, k: int) -> AngleBar:
        return self.multiples(ab, k)[-1]

    def reverse(self, ab: AngleBar, a: float = 1.0) -> AngleBar:
        """Bar with angle 2 gamma0 - ab, gamma0 = mid(ab) + pi / 2."""
        start = len(self.pos)
        g0 = self.mid(ab) + math.pi / 2
        A = self.bar_on(ab, a, ab.offset, "rev:in")
        C = self.ground_bar(a * self.ratio, g0, "rev:ground")
        out = self.cell(A, C)
        self.gadgets.append(("reversor", [ab.vertex] + list(range(start, len(self.pos)))))
        return out

    def add(self, ab1: AngleBar, ab2: AngleBar, a: float = 1.0) -> AngleBar:
        """Bar with angle ab1 + ab2 - gamma1 - g (offsets chosen to keep cells open).

        A bisector cell turns (ab1 - gamma1, ab2) into their half-sum C, then
        a doubler against the ground bar g gives 2 C - g.
        """
        k = self.ratio
        start = len(self.pos)
        diff = replace(ab2, c_theta=ab2.c_theta - ab1.c_theta, c_phi=ab2.c_phi - ab1.c_phi, offset=ab2.offset - ab1.offset)
        gamma1 = math.pi - self.mid(diff)
        A = self.bar_on(ab1, a, ab1.offset - gamma1, "add:in1")
        E = self.bar_on(ab2, k * k * a, ab2.offset, "add:in2")
        C = AngleBar(-1, k * a, 0.5 * (A.c_theta + E.c_theta), 0.5 * (A.c_phi + E.c_phi), 0.5 * (A.offset + E.offset))
        iC = self.vertex(k * a * cmath.exp(1j * self.ref_angle(C)), "add:C")
        C = replace(C, vertex=iC)
        self.cell(A, C, E=E, new_c=True)
        g = self.mid(C) - math.pi / 2
        G = self.ground_bar(a, g, "add:ground")
        out = self.cell(G, C)
        self.gadgets.append(("additor", [ab1.vertex, ab2.vertex] + list(range(start, len(self.pos)))))
        return out

    def linear_combination(self, r: int, s: int, a: float = 1.0) -> Optional[AngleBar]:
        """Bar whose angle is r theta + s phi + (some offset)."""
        parts = []
        for name, c in (("theta", r), ("phi", s)):
            if c == 0:
                continue
            src = self.inputs[name]
            if c < 0:
                src = self.reverse(src, a)
            parts.append(self.multiply(src, abs(c)))
        if not parts:
            return None
        if len(parts) == 1:
            return parts[0]
        return self.add(parts[0], parts[1], a)

    def translate(self, X: int, Y: int, P: int, label: str = "trans") -> int:
        """Braced translator: Z = P + (Y - X) kept by a double parallelogram.

        Brace points M on XY and N on PZ sit off the bars at the same
        relative place, so the cell cannot fold into an antiparallelogram.
        """
        zX, zY, zP = self.pos[X], self.pos[Y], self.pos[P]
        zZ = zP + (zY - zX)
        iZ = self.vertex(zZ, label + ":Z")
        self.bar(Y, iZ)
        self.bar(P, iZ)
        w = 0.5 + 0.5j
        iM = self.vertex(zX + w * (zY - zX), label + ":M")
        iN = self.vertex(zP + w * (zZ - zP), label + ":N")
        self.bar(X, iM)
        self.bar(Y, iM)
        self.bar(P, iN)
        self.bar(iZ, iN)
        self.bar(iM, iN)
        self.gadgets.append(("translator", [X, Y, P, iZ, iM, iN]))
        return iZ

    def parallelogram(self, X: int, Y: int, P: int) -> int:
        """Unbraced parallelogram: Z = P + (Y - X), valid away from folding."""
        zZ = self.pos[P] + (self.pos[Y] - self.pos[X])
        iZ = self.vertex(zZ, "para:Z")
        self.bar(Y, iZ)
        self.bar(P, iZ)
        self.gadgets.append(("parallelogram", [X, Y, P, iZ]))
        return iZ

    def inversor(self, pivot: int, P: int, s: float, centre: int = None, T: int = None) -> Tuple[int, float]:
        """Peaucellier inversor about ``pivot`` with arms 2s and rhombus side s.

        T is the inverse of P with |O'P| |O'T| = 3 s^2.  When P turns on a
        crank about ``centre`` (default the hub) through the pivot, T runs
        on the line perpendicular to centre - pivot at distance 3 s^2 / (2 r)
        from the pivot.  Returns (T, x of that line) for a horizontal crank.
        """
        centre = self.hub if centre is None else centre
        zO, zP = self.pos[pivot], self.pos[P]
        K = 3.0 * s * s
        d = zP - zO
        zT = zO + K * d / abs(d) ** 2
        if T is None:
            T = self.vertex(zT, "line:T")
        elif abs(self.pos[T] - zT) > 1e-9 * max(1.0, abs(zT)):
            raise ConstructionError("inversor image does not match the target vertex")
        r1 = _circle_meet(zO, 2 * s, zP, s, upper=True)
        r2 = _circle_meet(zO, 2 * s, zP, s, upper=False)
        R1 = self.vertex(r1, "line:R1")
        R2 = self.vertex(r2, "line:R2")
        for R in (R1, R2):
            self.bar(pivot, R)
            self.bar(P, R)
            self.bar(T, R)
        r = abs(self.pos[centre] - zO)
        self.gadgets.append(("line_constraint", [pivot, centre, P, R1, R2, T]))
        return T, float(zO.real + K / (2 * r))

    def peaucellier(self, T: int, scale: float = 1.0) -> Tuple[int, float]:
        """Hold vertex T on the vertical line through its current position.

        Pivot O' sits 2s left of T and the crank centre Q at O' + 0.75s, so
        the image line is 3 s^2 / (1.5 s) = 2s right of O'.  Returns (P, x).
        """
        s = scale
        zT = self.pos[T]
        zO = zT - 2 * s
        Oi = self.ground_point(zO, "line:pivot")
        Qi = self.ground_point(zO + 0.75 * s, "line:centre")
        Pi = self.vertex(zO + 1.5 * s, "line:P")
        self.bar(Qi, Pi)
        _, x = self.inversor(Oi, Pi, s, centre=Qi, T=T)
        return Pi, x

    # -- output -------------------------------------------------------------------

    def positions(self) -> np.ndarray:
        return np.array([[z.real, z.imag] for z in self.pos])

    def framework(self, family=None) -> Framework:
        return build_framework(self.positions(), self.edges, labels=self.labels, family=family)


def _circle_meet(c1: complex, r1: float, c2: complex, r2: float, avoid=None, upper=None) -> complex:
    d = abs(c2 - c1)
    if d == 0 or d > r1 + r2 + 1e-12 or d < abs(r1 - r2) - 1e-12:
        raise ConstructionError("circles do not meet")
    x = (d * d + r1 * r1 - r2 * r2) / (2 * d)
    h = math.sqrt(max(r1 * r1 - x * x, 0.0))
    u = (c2 - c1) / d
    p1 = c1 + u * (x + 1j * h)
    p2 = c1 + u * (x - 1j * h)
    if avoid is not None:
        return p2 if abs(p1 - avoid) < abs(p2 - avoid) else p1
    if upper is not None:
        return p1 if (p1.imag >= p2.imag) == upper else p2
    return p1
