import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rigor.framework import (
    BadIndexError,
    DisconnectedError,
    DuplicateEdgeError,
    GraphMismatchError,
    SelfLoopError,
    ZeroLengthEdgeError,
    are_congruent,
    are_equivalent,
    best_isometry,
    build_framework,
    check_nesting,
    classify,
    count_congruence_classes,
    loglog_slope,
    normalise,
)
from rigor.generators import get_family, harmonic_chain, harmonic_positions_exact, winerack

from oracles import harmonic_classes


def square(diag=False):
    e = [(0, 1), (1, 2), (2, 3), (3, 0)] + ([(0, 2)] if diag else [])
    return build_framework([(0, 0), (1, 0), (1, 1), (0, 1)], e)


@pytest.mark.parametrize(
    "edges, err",
    [
        ([(0, 5)], BadIndexError),
        ([(0, 0)], SelfLoopError),
        ([(0, 1), (1, 0)], DuplicateEdgeError),
    ],
)
def test_invalid_edges_rejected(edges, err):
    with pytest.raises(err):
        build_framework([(0, 0), (1, 0)], edges)


def test_zero_length_and_disconnected():
    with pytest.raises(ZeroLengthEdgeError):
        build_framework([(0, 0), (0, 0)], [(0, 1)])
    with pytest.raises(DisconnectedError):
        build_framework([(0, 0), (1, 0), (2, 0), (3, 0)], [(0, 1), (2, 3)])


def test_edges_canonical_and_lengths():
    f = build_framework([(0, 0), (3, 4)], [(1, 0)])
    assert f.edges == ((0, 1),)
    assert f.lengths[0] == 5.0
    assert f.n_edges == 1 and f.n_vertices == 2


def test_positions_read_only():
    f = square()
    with pytest.raises(ValueError):
        f.positions[0, 0] = 3.0


def test_harmonic_chain_coordinates():
    f = harmonic_chain(4)
    assert np.allclose(f.positions[:, 0], [0, 1, 0.5, 0.5 + 1 / 3, 0.5 + 1 / 3 - 0.25])
    exact = harmonic_positions_exact([1, -1, 1, -1])
    assert exact[-1] == Fraction(7, 12)
    assert np.allclose(f.lengths, [1, 1 / 2, 1 / 3, 1 / 4])


def test_equivalent_sign_flips():
    a = harmonic_chain(5, [1, 1, 1, 1, 1])
    b = harmonic_chain(5, [1, -1, -1, 1, -1])
    assert are_equivalent(a, b)
    assert not are_congruent(a, b)
    assert are_congruent(a, harmonic_chain(5, [-1, -1, -1, -1, -1]))


def test_equivalence_needs_same_graph():
    with pytest.raises(GraphMismatchError):
        are_equivalent(square(), square(diag=True))


@pytest.mark.parametrize("n", [1, 2, 3, 6])
def test_congruence_count_matches_exact_oracle(n):
    assert count_congruence_classes(n) == harmonic_classes(n)


def test_nesting_of_truncations():
    for name in ("winerack", "cobweb-inward", "diminishing-rectangles", "cantor-tree", "periodic-square"):
        fam = get_family(name)
        r = fam.min_rank
        check_nesting(fam(r), fam(r + 1))


def test_nesting_rejects_moved_vertex():
    small = square()
    moved = build_framework([(0, 0), (1, 0), (1, 1), (0, 1.5)], small.edges)
    with pytest.raises(ValueError):
        check_nesting(small, moved)


def test_normalise_puts_base_edge_on_x_axis():
    f = normalise(winerack(2), (0, 2))
    assert np.allclose(f.positions[0], 0)
    assert abs(f.positions[2, 1]) < 1e-15 and f.positions[2, 0] > 0
    assert are_congruent(f, winerack(2))


def test_loglog_slope_power_law():
    x = np.arange(1, 20)
    assert loglog_slope(x, 3 * x ** -2.0) == pytest.approx(-2.0)
    assert math.isnan(loglog_slope([1], [1]))


def test_classify_declared_and_empirical():
    c = classify(get_family("winerack"), 6)
    assert c.regular and not c.bounded
    d = classify(get_family("diminishing-rectangles"), 6)
    assert d.edge_vanishing and not d.regular
    assert d.evidence["empirical"]["edge_vanishing"]


def test_classify_rejects_bad_depth():
    with pytest.raises(ValueError):
        classify(get_family("winerack"), 0)


pts = st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=3, max_size=12)


@settings(max_examples=40, deadline=None)
@given(pts, st.floats(-math.pi, math.pi), st.booleans(), st.floats(-5, 5), st.floats(-5, 5))
def test_isometric_copies_are_congruent(p, angle, flip, tx, ty):
    p = np.array(p)
    c, s = math.cos(angle), math.sin(angle)
    R = np.array([[c, -s], [s, c]]) @ (np.diag([1, -1]) if flip else np.eye(2))
    q = p @ R.T + [tx, ty]
    res, _, _ = best_isometry(p, q)
    assert res <= 1e-9 * (1 + np.abs(q).max())
