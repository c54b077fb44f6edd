"""Constructors for the example infinite frameworks, as truncation chains.

Every generator numbers vertices so that rank ``r`` is a prefix of rank
``r + 1``; the ``*_family`` helpers wrap them as :class:`FrameworkFamily`.

Interpretations where the source figures are not recoverable:

* diminishing rectangles: p0 is joined to every x-axis vertex;
* tweezer units: each straight arm pair is braced by one off-axis vertex
  a quarter arm-length from the centre, joined to both ends and the centre;
* Cantor tree: children are scaled by 1/3 and hang off one output joint,
  with a tie bar from the child's free input joint to the parent centre;
* ``strip_tower`` is a stand-in for the rigid-but-not-epsilon-rigid example.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .framework import Edge, Framework, FrameworkError, FrameworkFamily, build_framework


class IdentificationError(FrameworkError):
    """Periodic tiling produced near-coincident vertices that are not within tolerance."""


def _meta(name: str, rank: int, **params) -> Dict[str, object]:
    meta: Dict[str, object] = {"name": name, "rank": int(rank)}
    if params:
        meta["params"] = params
    return meta


# -- harmonic chain -----------------------------------------------------------

def alternating_signs(n: int) -> Tuple[int, ...]:
    return tuple(1 if k % 2 == 0 else -1 for k in range(n))


def harmonic_chain(n: int, signs: Optional[Sequence[int]] = None) -> Framework:
    """Collinear chain whose k-th bar has length 1/k and direction ``signs[k-1]``.

    The default signs alternate, giving p = (0, 1, 1 - 1/2, 1 - 1/2 + 1/3, ...).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if signs is None:
        signs = alternating_signs(n)
    signs = [int(s) for s in signs]
    if len(signs) != n:
        raise ValueError(f"expected {n} signs, got {len(signs)}")
    if any(s not in (1, -1) for s in signs):
        raise ValueError("signs must be +1 or -1")
    x = [0.0]
    for k, s in enumerate(signs, start=1):
        x.append(x[-1] + s / k)
    pos = np.column_stack([x, np.zeros(n + 1)])
    edges = [(k, k + 1) for k in range(n)]
    return build_framework(pos, edges, family=_meta("harmonic-chain", n, signs="".join("+" if s > 0 else "-" for s in signs)))


def harmonic_positions_exact(signs: Sequence[int]) -> List[Fraction]:
    out = [Fraction(0)]
    for k, s in enumerate(signs, start=1):
        out.append(out[-1] + Fraction(int(s), k))
    return out


# -- diminishing rectangles -----------------------------------------------------

def diminishing_rectangles(n: int) -> Framework:
    """p0 = (1, -1/4), p_{2k-1} = (1/k, 0), p_{2k} = (1/k, 1/k) for k = 1..n."""
    if n < 2:
        raise ValueError("need at least 2 rectangles")
    pos = [(1.0, -0.25)]
    for k in range(1, n + 1):
        pos.append((1.0 / k, 0.0))
        pos.append((1.0 / k, 1.0 / k))
    last = 2 * n
    edges: List[Edge] = []
    for i in range(1, last + 1):
        if i % 2 == 1:
            edges.append((i, i + 1))
        if i + 2 <= last:
            edges.append((i, i + 2))
    edges.extend((0, i) for i in range(1, last + 1, 2))
    return build_framework(pos, edges, family=_meta("diminishing-rectangles", n))


# -- cobwebs --------------------------------------------------------------------

_CORNERS = np.array([(1.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (-1.0, 1.0)])


def _cobweb_exponents(levels: int, direction: str) -> List[int]:
    if direction == "inward":
        return [-k for k in range(levels)]
    if direction == "outward":
        return list(range(levels))
    if direction == "two_way":
        out = [0]
        k = 1
        while len(out) < levels:
            out.append(-k)
            if len(out) < levels:
                out.append(k)
            k += 1
        return out
    raise ValueError(f"unknown cobweb direction {direction!r}")


def dyadic_cobweb(levels: int, direction: str = "inward") -> Framework:
    """Concentric squares 2**e * [(1,1),(1,-1),(-1,-1),(-1,1)] with corner-to-corner spokes."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    exps = _cobweb_exponents(levels, direction)
    index = {e: 4 * s for s, e in enumerate(exps)}
    pos = np.vstack([_CORNERS * 2.0 ** e for e in exps])
    edges: List[Edge] = []
    for e in exps:
        b = index[e]
        edges.extend((b + c, b + (c + 1) % 4) for c in range(4))
        if e != 0:
            parent = index[e + 1 if e < 0 else e - 1]
            edges.extend((parent + c, b + c) for c in range(4))
    return build_framework(pos, edges, family=_meta("cobweb-" + direction.replace("_", "-"), levels, direction=direction))


# -- tweezer units ----------------------------------------------------------------

GADGET_OFFSET = 0.25


def _tweezer(pos: List[Tuple[float, float]], edges: List[Edge], tl: int, bl: int, scale: float) -> Tuple[int, int, int]:
    """Append one X unit whose input joints are ``tl``/``bl``; return (centre, tr, br)."""
    x0, ytop = pos[tl]
    ybot = pos[bl][1]
    half_h = (ytop - ybot) / 2.0
    c = (x0 + scale / 2.0, ybot + half_h)
    tr_p = (x0 + scale, ytop)
    br_p = (x0 + scale, ybot)
    arm = math.hypot(scale / 2.0, half_h)
    off = GADGET_OFFSET * arm

    def brace(p: Tuple[float, float], q: Tuple[float, float]) -> Tuple[float, float]:
        dx, dy = q[0] - p[0], q[1] - p[1]
        d = math.hypot(dx, dy)
        nx, ny = -dy / d, dx / d
        if ny < 0:
            nx, ny = -nx, -ny
        return (c[0] + off * nx, c[1] + off * ny)

    ic = len(pos)
    pos.append(c)
    ie1 = len(pos)
    pos.append(brace(pos[tl], br_p))
    ie2 = len(pos)
    pos.append(brace(pos[bl], tr_p))
    itr = len(pos)
    pos.append(tr_p)
    ibr = len(pos)
    pos.append(br_p)
    edges += [(tl, ic), (ic, ibr), (bl, ic), (ic, itr)]
    edges += [(ie1, tl), (ie1, ic), (ie1, ibr), (ie2, bl), (ie2, ic), (ie2, itr)]
    return ic, itr, ibr


def winerack(bays: int) -> Framework:
    """A row of ``bays`` unit tweezers sharing their end joints (unit width, unit height)."""
    if bays < 1:
        raise ValueError("bays must be >= 1")
    pos: List[Tuple[float, float]] = [(0.0, 0.5), (0.0, -0.5)]
    edges: List[Edge] = []
    tl, bl = 0, 1
    for _ in range(bays):
        _, tl, bl = _tweezer(pos, edges, tl, bl, 1.0)
    return build_framework(pos, edges, family=_meta("winerack", bays))


def winerack_bay(v: int) -> int:
    return 0 if v < 2 else (v - 2) // 5


CANTOR_SCALE = 1.0 / 3.0


def cantor_tree(depth: int) -> Framework:
    """Binary tree of tweezers; each output joint carries a child scaled by 1/3."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    pos: List[Tuple[float, float]] = [(0.0, 0.5), (0.0, -0.5)]
    edges: List[Edge] = []
    # (shared joint, side, parent centre, scale); side +1 hangs the child above
    level: List[Tuple[int, int, int, float]] = []
    _, itr, ibr = _tweezer(pos, edges, 0, 1, 1.0)
    ic = len(pos) - 5
    if depth > 1:
        level = [(itr, +1, ic, CANTOR_SCALE), (ibr, -1, ic, CANTOR_SCALE)]
    for d in range(1, depth):
        nxt = []
        for joint, side, parent_c, s in level:
            x, y = pos[joint]
            new = len(pos)
            pos.append((x, y + side * s))
            edges.append((new, parent_c))
            tl, bl = (new, joint) if side > 0 else (joint, new)
            ic, itr, ibr = _tweezer(pos, edges, tl, bl, s)
            if d + 1 < depth:
                cs = s * CANTOR_SCALE
                nxt += [(itr, +1, ic, cs), (ibr, -1, ic, cs)]
        level = nxt
    return build_framework(pos, edges, family=_meta("cantor-tree", depth))


def cantor_units(depth: int) -> int:
    return 2 ** depth - 1


# -- strip tower ---------------------------------------------------------------

def strip_tower(n: int, aspect: float = 1.0) -> Framework:
    """n stacked 1 x aspect cells, each a square with one diagonal."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if aspect <= 0:
        raise ValueError("aspect must be positive")
    pos = []
    for k in range(n + 1):
        pos.append((0.0, k * aspect))
        pos.append((1.0, k * aspect))
    edges: List[Edge] = [(0, 1)]
    for k in range(n):
        b = 2 * k
        edges += [(b, b + 2), (b + 1, b + 3), (b + 2, b + 3), (b, b + 3)]
    return build_framework(pos, edges, family=_meta("strip-tower", n, aspect=aspect))


# -- periodic lattices -------------------------------------------------------------

def square_cell(diagonals: bool = True) -> Framework:
    pos = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    edges = [(0, 1), (1, 2), (2, 3), (3, 0)]
    if diagonals:
        edges += [(0, 2), (1, 3)]
    return build_framework(pos, edges)


KAGOME_TX = (2.0, 0.0)
KAGOME_TY = (1.0, math.sqrt(3.0))


def kagome_cell() -> Framework:
    """Up triangle at the origin plus the down triangle hanging from its apex."""
    h = math.sqrt(3.0) / 2.0
    pos = [(0.0, 0.0), (1.0, 0.0), (0.5, h), (0.0, 2 * h), (1.0, 2 * h)]
    edges = [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 2)]
    return build_framework(pos, edges)


def _shell_cells(nx: int, ny: int) -> List[Tuple[int, int]]:
    cells = []
    for s in range(max(nx, ny)):
        for i in range(min(s + 1, nx)):
            for j in range(min(s + 1, ny)):
                if max(i, j) == s:
                    cells.append((i, j))
    return cells


def periodic_lattice(cell: Framework, nx: int, ny: int, tx, ty, tol: float = 1e-9) -> Framework:
    """Tile ``cell`` at i*tx + j*ty, merging vertices that land within ``tol``.

    Cells are laid out shell by shell (max(i, j) = 0, 1, ...) so that the
    r x r tiling is a prefix of the (r + 1) x (r + 1) tiling.
    """
    if nx < 1 or ny < 1:
        raise ValueError("repeat counts must be >= 1")
    tx = np.asarray(tx, dtype=float)
    ty = np.asarray(ty, dtype=float)
    raw_pos = []
    raw_edges = []
    for i, j in _shell_cells(nx, ny):
        base = len(raw_pos)
        shift = i * tx + j * ty
        raw_pos.extend(cell.positions + shift)
        raw_edges.extend((a + base, b + base) for a, b in cell.edges)
    raw = np.asarray(raw_pos)
    scale = max(1.0, float(np.abs(raw).max()))
    search = max(1e-6 * scale, 10 * tol)
    parent = list(range(len(raw)))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in sorted(cKDTree(raw).query_pairs(search)):
        d = float(np.linalg.norm(raw[a] - raw[b]))
        if d > tol:
            raise IdentificationError(f"vertices {a} and {b} are {d:.3g} apart: too close to be distinct, too far to merge")
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    remap: Dict[int, int] = {}
    pos = []
    for v in range(len(raw)):
        r = find(v)
        if r not in remap:
            remap[r] = len(pos)
            pos.append(raw[r])
    seen = set()
    edges = []
    for a, b in raw_edges:
        e = tuple(sorted((remap[find(a)], remap[find(b)])))
        if e not in seen:
            seen.add(e)
            edges.append(e)
    return build_framework(np.array(pos), edges, family=_meta("periodic-lattice", max(nx, ny), nx=nx, ny=ny))


# -- families -----------------------------------------------------------------------

def harmonic_chain_family() -> FrameworkFamily:
    return FrameworkFamily(
        name="harmonic-chain",
        truncation=lambda r: harmonic_chain(r),
        flags=dict(regular=False, edge_vanishing=True, edge_unbounded=False, bounded=True, locally_finite=True),
        vertex_group=lambda v: v,
    )


def diminishing_rectangles_family() -> FrameworkFamily:
    return FrameworkFamily(
        name="diminishing-rectangles",
        truncation=diminishing_rectangles,
        flags=dict(regular=False, edge_vanishing=True, edge_unbounded=False, bounded=True, locally_finite=False),
        base_edge=(0, 1),
        pair=(0, 2),
        vertex_group=lambda v: max(1, (v + 1) // 2),
        min_rank=2,
    )


def cobweb_family(direction: str = "inward") -> FrameworkFamily:
    exps = _cobweb_exponents(64, direction)
    flags = {
        "inward": dict(regular=False, edge_vanishing=True, edge_unbounded=False, bounded=True, locally_finite=True),
        "outward": dict(regular=False, edge_vanishing=False, edge_unbounded=True, bounded=False, locally_finite=True),
        "two_way": dict(regular=False, edge_vanishing=True, edge_unbounded=True, bounded=False, locally_finite=True),
    }[direction]
    return FrameworkFamily(
        name=f"cobweb-{direction.replace('_', '-')}",
        truncation=lambda r: dyadic_cobweb(r, direction),
        flags=flags,
        params={"direction": direction},
        base_edge=(0, 1),
        pair=(0, 2),
        vertex_group=lambda v: abs(exps[v // 4]),
    )


def winerack_family() -> FrameworkFamily:
    return FrameworkFamily(
        name="winerack",
        truncation=winerack,
        flags=dict(regular=True, edge_vanishing=False, edge_unbounded=False, bounded=False, locally_finite=True),
        base_edge=(0, 2),
        pair=(0, 1),
        vertex_group=winerack_bay,
    )


def cantor_tree_family() -> FrameworkFamily:
    return FrameworkFamily(
        name="cantor-tree",
        truncation=cantor_tree,
        flags=dict(regular=False, edge_vanishing=True, edge_unbounded=False, bounded=True, locally_finite=True),
        base_edge=(0, 2),
        pair=(0, 1),
    )


def strip_tower_family(aspect: float = 1.0) -> FrameworkFamily:
    return FrameworkFamily(
        name="strip-tower",
        truncation=lambda r: strip_tower(r, aspect),
        flags=dict(regular=True, edge_vanishing=False, edge_unbounded=False, bounded=False, locally_finite=True),
        params={"aspect": aspect},
        base_edge=(0, 1),
        vertex_group=lambda v: v // 2,
    )


def induced_prefix(f: Framework, n: int) -> Framework:
    """Subframework induced on the first ``n`` vertices."""
    edges = [e for e in f.edges if e[1] < n]
    return build_framework(f.positions[:n], edges, family=f.family)


def periodic_family(cell: Optional[Framework] = None, tx=(1.0, 0.0), ty=(0.0, 1.0), name: str = "periodic-lattice") -> FrameworkFamily:
    """r x r tilings, cut down to be vertex induced in the (r + 1) x (r + 1) tiling.

    Boundary cells can leave dangling copies of neighbour vertices which the
    next shell joins up; taking the induced prefix keeps the chain nested.
    """
    cell = square_cell() if cell is None else cell

    def truncation(r: int) -> Framework:
        n = periodic_lattice(cell, r, r, tx, ty).n_vertices
        big = periodic_lattice(cell, r + 1, r + 1, tx, ty)
        out = induced_prefix(big, n)
        return build_framework(out.positions, out.edges, family=_meta(name, r))

    return FrameworkFamily(
        name=name,
        truncation=truncation,
        flags=dict(regular=True, edge_vanishing=False, edge_unbounded=False, bounded=False, locally_finite=True),
        base_edge=cell.edges[0],
    )


def kagome_family() -> FrameworkFamily:
    return periodic_family(kagome_cell(), KAGOME_TX, KAGOME_TY, name="periodic-kagome")


FAMILIES = {
    "harmonic-chain": harmonic_chain_family,
    "diminishing-rectangles": diminishing_rectangles_family,
    "cobweb-inward": lambda: cobweb_family("inward"),
    "cobweb-outward": lambda: cobweb_family("outward"),
    "cobweb-two-way": lambda: cobweb_family("two_way"),
    "winerack": winerack_family,
    "cantor-tree": cantor_tree_family,
    "strip-tower": strip_tower_family,
    "periodic-square": periodic_family,
    "periodic-kagome": kagome_family,
}


def get_family(name: str) -> FrameworkFamily:
    try:
        return FAMILIES[name]()
    except KeyError:
        raise KeyError(f"unknown family {name!r}; known: {', '.join(sorted(FAMILIES))}") from None
