import cmath
import math

import numpy as np
import pytest

from rigor.kempe import Builder, ConstructionError, Mechanism
from rigor.kempe.drive import angle_of


def test_cell_output_angle_is_two_c_minus_a():
    b = Builder(0.7)
    th = b.add_input("theta")
    out = b.multiply(th, 2)
    z = b.positions()[out.vertex] - b.positions()[b.hub]
    assert out.linear() == (2, 0)
    assert out.angle(0.7) == pytest.approx(math.atan2(z[1], z[0]), abs=1e-12)


def test_cell_rejects_wide_shape_range():
    b = Builder(0.0, theta_range=(-2.0, 2.0))
    th = b.add_input("theta")
    with pytest.raises(ConstructionError):
        b.multiply(th, 2)


def test_builder_framework_is_consistent():
    b = Builder(0.7)
    th = b.add_input("theta")
    b.multiply(th, 3)
    f = b.framework()
    assert f.n_vertices == len(b.pos)
    assert b.anchor in b.ground and b.hub in b.ground


def test_angle_of_unwraps_near_reference():
    pos = np.array([[0.0, 0.0], [math.cos(3.0), math.sin(3.0)]])
    assert angle_of(pos, 1, 0, near=0.0) == pytest.approx(3.0)
    assert angle_of(pos, 1, 0, near=-3.0) == pytest.approx(3.0 - 2 * math.pi)


def test_mechanism_drive_crank():
    # hub 0, anchor 1, crank tip 2 driven, rocker joint 3
    z = [0, -1, 0.5 * cmath.exp(0.9j)]
    p3 = complex(-0.2, 1.0)
    pos = np.array([[c.real, c.imag] for c in z + [p3]])
    edges = np.array([[2, 3], [1, 3], [0, 1]])
    lengths = np.linalg.norm(pos[edges[:, 0]] - pos[edges[:, 1]], axis=1)
    m = Mechanism(edges, lengths, (0, 1), {"theta": (2, 0.5)})
    p = m.drive(pos, {"theta": 0.9}, {"theta": 1.3})
    assert m.residual(p) <= 1e-12
    assert np.allclose(p[2], 0.5 * np.array([math.cos(1.3), math.sin(1.3)]))
    assert m.free_nullity(p) == 0
