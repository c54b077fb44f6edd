import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rigor.framework import build_framework
from rigor.generators import get_family, strip_tower, winerack
from rigor.rigidity import (
    approx_flex_margin,
    canonical_flex,
    edge_ratios,
    flex_growth_profile,
    flex_space,
    is_collinear,
    pinned_null_space,
    proper_flex,
    rigidity_matrix,
    trivial_flex_basis,
)

from oracles import exact_nullity

TRI = ([(0, 0), (1, 0), (0.5, 0.75)], [(0, 1), (1, 2), (0, 2)])
SQ = ([(0, 0), (1, 0), (1, 1), (0, 1)], [(0, 1), (1, 2), (2, 3), (0, 3)])
SQD = (SQ[0], SQ[1] + [(0, 2)])
HOUSE = ([(0, 0), (2, 0), (2, 1), (0, 1), (1, 2), (1, 0.5)], [(0, 1), (1, 2), (2, 3), (0, 3), (2, 4), (3, 4), (0, 5), (2, 5)])


def test_single_bar_row():
    R = rigidity_matrix(build_framework([(0, 0), (1, 0)], [(0, 1)])).toarray()
    assert R.tolist() == [[-1.0, 0.0, 1.0, 0.0]]


def test_row_entries_follow_edge_order():
    f = build_framework([(0, 0), (2, 1), (0, 3)], [(1, 2), (0, 1)])
    R = rigidity_matrix(f).toarray()
    assert R[0].tolist() == [0, 0, 2, -2, -2, 2]
    assert R[1].tolist() == [-2, -1, 2, 1, 0, 0]


@pytest.mark.parametrize("case, nullity, proper", [(TRI, 3, 0), (SQ, 4, 1), (SQD, 3, 0), (HOUSE, 4, 1)])
def test_nullity_against_exact_oracle(case, nullity, proper):
    pts, edges = case
    rep = flex_space(build_framework(pts, edges))
    assert rep.nullity == nullity == exact_nullity(pts, edges)
    assert rep.proper_dim == proper
    assert rep.infinitesimally_rigid == (proper == 0)
    assert rep.rank == 2 * len(pts) - nullity


def test_collinear_triangle_is_infinitesimally_flexible():
    pts, edges = [(0, 0), (1, 0), (2, 0)], [(0, 1), (1, 2), (0, 2)]
    f = build_framework(pts, edges)
    assert is_collinear(f)
    rep = flex_space(f)
    assert rep.nullity == exact_nullity(pts, edges) == 4
    assert rep.proper_dim == 1


def test_proper_basis_orthogonal_to_trivial():
    f = winerack(3)
    rep = flex_space(f)
    T = trivial_flex_basis(f)
    assert np.abs(rep.proper_basis @ T.T).max() < 1e-10
    R = rigidity_matrix(f).toarray()
    assert np.abs(R @ rep.proper_basis.T).max() < 1e-9


def test_canonical_flex_basis_independent():
    rep = flex_space(winerack(2))
    B = rep.proper_basis
    Q, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(B.shape[0], B.shape[0])))
    u, v = canonical_flex(B), canonical_flex(Q @ B)
    assert np.allclose(u, v, atol=1e-10)
    assert proper_flex(build_framework(*SQD)) is None


def test_pinned_null_space_square():
    N = pinned_null_space(build_framework(*SQ), (0, 1))
    assert N.shape[0] == 1
    u = N[0].reshape(-1, 2)
    assert np.allclose(u[:2], 0)
    # both free corners move horizontally together
    assert np.allclose(u[2], u[3]) and abs(u[2, 1]) < 1e-12


def test_report_dict_fields():
    d = flex_space(build_framework(*SQ)).to_dict()
    assert d["nullity"] == 4 and d["proper_dim"] == 1 and len(d["proper_flexes"]) == 1


@settings(max_examples=20, deadline=None)
@given(st.integers(3, 30), st.integers(0, 10**6))
def test_trivial_flexes_annihilated(n, seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-10, 10, size=(n, 2))
    edges = [(i, i + 1) for i in range(n - 1)] + [(i, j) for i in range(n) for j in range(i + 2, n) if rng.random() < 0.2]
    f = build_framework(pts, edges)
    R = rigidity_matrix(f)
    for u in trivial_flex_basis(f):
        assert np.abs(R @ u).max() <= 1e-10 * max(1.0, np.abs(pts).max())


def test_growth_profile_winerack_bounded():
    prof = flex_growth_profile(get_family("winerack"), 6)
    last = prof[-1]
    assert last.proper_dim == 1
    assert abs(last.relative_slope) < 0.1


def test_growth_profile_rejects_small_rank():
    with pytest.raises(ValueError):
        flex_growth_profile(get_family("winerack"), 1)


def test_edge_ratios_vanish_on_flex():
    f = build_framework(*SQ)
    u = proper_flex(f)
    assert edge_ratios(f, u).max() < 1e-12
    assert approx_flex_margin(f).margin < 1e-12


def test_margin_decreases_along_strip():
    m = [approx_flex_margin(strip_tower(n)).margin for n in (1, 3, 6)]
    assert m[0] > m[1] > m[2] > 0
    assert all(not math.isnan(x) for x in m)
