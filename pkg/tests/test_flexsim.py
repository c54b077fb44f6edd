import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rigor.framework import build_framework
from rigor.flexsim import (
    VERDICT_DELTA,
    ProjectionError,
    chain_flex_protocol,
    initial_tangent,
    project_to_manifold,
    second_order_directions,
    self_stresses,
    simulate_flex,
    smoothness_report,
)
from rigor.generators import get_family, winerack

from oracles import four_bar_p3

SQUARE = build_framework([(0, 0), (1, 0), (1, 1), (0, 1)], [(0, 1), (1, 2), (2, 3), (0, 3)])


def test_projection_restores_lengths_and_pins():
    p = SQUARE.positions + np.array([[0, 0], [0, 0], [0.03, -0.02], [-0.01, 0.04]])
    q = project_to_manifold(p, SQUARE.edge_array, SQUARE.lengths, (0, 1))
    d = np.linalg.norm(q[SQUARE.edge_array[:, 0]] - q[SQUARE.edge_array[:, 1]], axis=1)
    assert np.abs(d - 1).max() <= 1e-12
    assert np.array_equal(q[:2], SQUARE.positions[:2])


def test_projection_infeasible_lengths():
    tri = np.array([[0, 0], [1, 0], [0.5, 0.5]])
    with pytest.raises(ProjectionError) as e:
        project_to_manifold(tri, np.array([[0, 1], [1, 2], [0, 2]]), np.array([1.0, 5.0, 1.0]), (0, 1))
    assert e.value.residual > 1


def test_four_bar_matches_closed_form():
    traj = simulate_flex(SQUARE, (0, 1), steps=100, arc_step=0.01)
    P = traj.positions
    assert traj.max_constraint_residual <= 1e-9
    # p3 stays on the unit circle about p0 and the coupler stays parallel
    assert np.abs(np.linalg.norm(P[:, 3], axis=1) - 1).max() <= 1e-6
    expected = np.array([four_bar_p3(p2) for p2 in P[:, 2]])
    assert np.abs(P[:, 3] - expected).max() <= 1e-6


def test_times_are_normalised_arc_length():
    traj = simulate_flex(SQUARE, (0, 1), steps=40, arc_step=0.02)
    assert traj.times[0] == 0 and traj.times[-1] == 1
    assert np.allclose(np.diff(traj.times), 1 / 40, rtol=1e-3)
    assert traj.proper and traj.n_samples == 41


def test_reversing_returns_to_start():
    fwd = simulate_flex(SQUARE, (0, 1), steps=50, arc_step=0.01)
    back = simulate_flex(SQUARE.with_positions(fwd.positions[-1]), (0, 1), steps=50, arc_step=0.01, seed_direction=fwd.positions[-2] - fwd.positions[-1])
    assert np.abs(back.positions[-1] - SQUARE.positions).max() < 1e-9


@settings(max_examples=15, deadline=None)
@given(st.floats(0.002, 0.05), st.integers(5, 30))
def test_step_halving_converges(h, k):
    # halving the step with twice the steps reaches the same arc length on the same curve
    a = simulate_flex(SQUARE, (0, 1), steps=k, arc_step=h)
    b = simulate_flex(SQUARE, (0, 1), steps=2 * k, arc_step=h / 2)
    ang = [math.atan2(t.positions[-1, 3, 1], t.positions[-1, 3, 0]) for t in (a, b)]
    assert abs(ang[0] - ang[1]) < 5 * h ** 2 * k + 1e-9
    assert max(a.max_constraint_residual, b.max_constraint_residual) <= 1e-9


def test_rigid_framework_trajectory():
    tri = build_framework([(0, 0), (1, 0), (0.3, 0.8)], [(0, 1), (1, 2), (0, 2)])
    traj = simulate_flex(tri, (0, 1), steps=10)
    assert traj.rigid and not traj.proper and traj.stop_reason == "rigid"


def test_degenerate_triangle_is_stressed_and_stalls():
    flat = build_framework([(0, 0), (1, 0), (2, 0)], [(0, 1), (1, 2), (0, 2)])
    assert self_stresses(flat.positions, flat.edge_array).shape[0] == 1
    assert len(second_order_directions(flat, (0, 1))) == 0
    traj = simulate_flex(flat, (0, 1), steps=5)
    assert not traj.proper and traj.stop_reason.startswith("stalled")


def test_initial_tangent_square():
    u = initial_tangent(SQUARE, (0, 1)).reshape(-1, 2)
    assert np.allclose(u[:2], 0) and abs(np.linalg.norm(u) - 1) < 1e-12


def test_pins_validated():
    with pytest.raises(ValueError):
        simulate_flex(SQUARE, (1, 1))


def test_smoothness_square():
    rep = smoothness_report(simulate_flex(SQUARE, (0, 1), steps=60, arc_step=0.01))
    assert rep.differentiable
    assert rep.restricted([0, 1]) < 1e-9
    assert rep.M_estimate > 0


def test_winerack_flex_keeps_bars():
    traj = simulate_flex(winerack(4), (0, 2), steps=30, arc_step=0.01)
    assert traj.max_constraint_residual <= 1e-9
    assert traj.proper


def test_protocol_rectangles_decay():
    res = chain_flex_protocol(get_family("diminishing-rectangles"), 0, 2, r_max=6)
    d = res.deltas
    assert all(a > b for a, b in zip(d, d[1:]))
    assert res.verdict == VERDICT_DELTA and not res.satisfied


def test_protocol_threads_do_not_change_rows():
    fam = get_family("diminishing-rectangles")
    assert chain_flex_protocol(fam, 0, 2, r_max=5).rows == chain_flex_protocol(fam, 0, 2, r_max=5, threads=3).rows


def test_protocol_argument_checks():
    with pytest.raises(ValueError):
        chain_flex_protocol(get_family("winerack"), r_max=1)
    with pytest.raises(ValueError):
        chain_flex_protocol(get_family("winerack"), 0, 99, r_max=3)
