"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the lines are printed
even without ``-s``.
"""

import math
import time
from itertools import product

import numpy as np
import pytest

from rigor.framework import build_framework, count_congruence_classes, are_equivalent
from rigor.generators import get_family, harmonic_chain, strip_tower, winerack, winerack_bay
from rigor.rigidity import approx_flex_margin, flex_growth_profile, flex_space, rigidity_matrix, trivial_flex_basis
from rigor.flexsim import VERDICT_DELTA, chain_flex_protocol, simulate_flex

from oracles import exact_nullity, harmonic_classes


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {n:2d}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail

    return emit


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.s = time.perf_counter() - self.t0


def test_c01_single_bar_row(report):
    f = build_framework([(0, 0), (1, 0)], [(0, 1)])
    rigidity_matrix(f)  # warm the sparse code path
    best = math.inf
    for _ in range(5):
        with Timer() as t:
            row = rigidity_matrix(f).toarray()[0].tolist()
        best = min(best, t.s)
    ok = row == [-1.0, 0.0, 1.0, 0.0] and best < 1e-3
    report(1, ok, f"row {row}, {best * 1e3:.3f} ms")


def test_c02_null_space_dimensions(report):
    sq = [(0, 0), (1, 0), (1, 1), (0, 1)]
    cases = {
        "triangle": ([(0, 0), (1, 0), (0.5, 0.9)], [(0, 1), (1, 2), (0, 2)], 3, 0),
        "square": (sq, [(0, 1), (1, 2), (2, 3), (0, 3)], 4, 1),
        "square+diagonal": (sq, [(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)], 3, 0),
    }
    got = {}
    with Timer() as t:
        for name, (p, e, nul, prop) in cases.items():
            rep = flex_space(build_framework(p, e), tol=1e-9)
            got[name] = (rep.nullity, rep.proper_dim, exact_nullity(p, e))
    ok = all(got[k] == (v[2], v[3], v[2]) for k, v in cases.items()) and t.s < 1
    report(2, ok, f"(nullity, proper_dim, exact nullity) {got}, {t.s:.3f} s")


def test_c03_trivial_flex_annihilation(report):
    rng = np.random.default_rng(2024)
    worst = 0.0
    with Timer() as t:
        for _ in range(20):
            n = int(rng.integers(3, 31))
            pts = rng.uniform(-10, 10, size=(n, 2))
            edges = [(i, i + 1) for i in range(n - 1)] + [(i, j) for i in range(n) for j in range(i + 2, n) if rng.random() < 0.25]
            f = build_framework(pts, edges)
            R = rigidity_matrix(f)
            worst = max(worst, max(float(np.abs(R @ u).max()) for u in trivial_flex_basis(f)))
    report(3, worst <= 1e-10 and t.s < 1, f"max |R u| = {worst:.2e}, {t.s:.3f} s")


def test_c04_harmonic_chain_brute_force(report):
    n = 10
    with Timer() as t:
        base = harmonic_chain(n)
        all_equiv = all(are_equivalent(base, harmonic_chain(n, s)) for s in product((1, -1), repeat=n))
        lengths_ok = np.allclose(base.lengths, 1 / np.arange(1, n + 1))
        classes = count_congruence_classes(n)
        oracle = harmonic_classes(n)
    ok = all_equiv and lengths_ok and classes == oracle and t.s < 10
    report(4, ok, f"all 1024 equivalent: {all_equiv}, classes {classes} vs oracle {oracle}, {t.s:.2f} s")


def test_c05_four_bar(report):
    sq = build_framework([(0, 0), (1, 0), (1, 1), (0, 1)], [(0, 1), (1, 2), (2, 3), (0, 3)])
    with Timer() as t:
        traj = simulate_flex(sq, (0, 1), steps=100, arc_step=0.01)
    P = traj.positions
    circle = float(np.abs(np.linalg.norm(P[:, 3], axis=1) - 1).max())
    coupler = float(np.abs(P[:, 2] - P[:, 3] - [1, 0]).max())
    err = max(circle, coupler)
    ok = err <= 1e-6 and traj.max_constraint_residual <= 1e-9 and t.s < 5
    report(5, ok, f"position error {err:.2e}, residual {traj.max_constraint_residual:.2e}, {t.s:.2f} s")


def test_c06_winerack_protocol(report):
    with Timer() as t:
        res = chain_flex_protocol(get_family("winerack"), r_max=12)
    d, M = res.deltas, res.Ms
    ok = (
        res.c >= 0.9 * d[0]
        and abs(res.delta_slope) < 0.1
        and M.max() / M.min() < 2
        and res.satisfied
        and t.s < 60
    )
    report(6, ok, f"c = {res.c:.4f} vs 0.9*delta_1 = {0.9 * d[0]:.4f}, slope {res.delta_slope:.3f}, M max/min {M.max() / M.min():.3f}, '{res.verdict}', {t.s:.1f} s")


def test_c07_rectangles_protocol(report):
    with Timer() as t:
        res = chain_flex_protocol(get_family("diminishing-rectangles"), r_max=10)
    d = res.deltas
    decreasing = bool(np.all(np.diff(d) < 0))
    ok = decreasing and res.delta_slope <= -0.5 and res.verdict == VERDICT_DELTA and t.s < 60
    report(7, ok, f"deltas decreasing {decreasing}, slope {res.delta_slope:.3f}, '{res.verdict}', {t.s:.1f} s")


def test_c08_cobweb_dichotomy(report):
    with Timer() as t:
        inward = flex_growth_profile(get_family("cobweb-inward"), 8)
        outward = flex_growth_profile(get_family("cobweb-outward"), 6)
    dims = [p.proper_dim for p in inward]
    rel, mag = outward[-1].relative_slope, outward[-1].slope
    ok = min(dims) >= 1 and rel <= -0.5 and t.s < 30
    report(8, ok, f"inward proper_dim {dims}; outward strain-rate slope {rel:.3f} (raw speed slope {mag:.3f}), {t.s:.1f} s")


@pytest.mark.xfail(strict=True, reason="truncations of the outward cobweb beyond one level are second-order rigid, so no continuous flex exists to simulate")
def test_outward_cobweb_protocol_flexible():
    res = chain_flex_protocol(get_family("cobweb-outward"), r_max=4)
    assert res.satisfied


def test_c09_winerack_unbounded(report):
    with Timer() as t:
        f = winerack(10)
        traj = simulate_flex(f, (0, 2), steps=100, arc_step=0.01)
    disp = np.linalg.norm(traj.positions[-1] - traj.positions[0], axis=1)
    bays = np.array([winerack_bay(v) for v in range(f.n_vertices)])
    per = np.array([disp[bays == b].max() for b in range(bays.max() + 1)])
    x = np.arange(len(per), dtype=float)
    m, c = np.polyfit(x, per, 1)
    r2 = 1 - ((per - (m * x + c)) ** 2).sum() / ((per - per.mean()) ** 2).sum()
    report(9, m > 0 and r2 > 0.9 and t.s < 30, f"slope {m:.4f} per bay, R^2 {r2:.6f}, {t.s:.2f} s")


def test_c10_flex_margin(report):
    sq = build_framework([(0, 0), (1, 0), (1, 1), (0, 1)], [(0, 1), (1, 2), (2, 3), (0, 3)])
    with Timer() as t:
        exact = approx_flex_margin(sq)
        margins = [approx_flex_margin(strip_tower(n)).margin for n in (5, 10, 20, 40)]
    dec = all(a > b for a, b in zip(margins, margins[1:]))
    ok = exact.exact and exact.margin <= 1e-12 and dec and t.s < 60
    report(10, ok, f"square margin {exact.margin:.1e}, strip margins {[round(m, 5) for m in margins]}, {t.s:.2f} s")


def test_c11_angle_expand(report):
    from fractions import Fraction

    from rigor.kempe import TrigPoly, angle_expand, grid_check, parse_trig

    rng = np.random.default_rng(11)
    polys = [parse_trig(s) for s in ("cos(theta)*cos(phi)", "cos(theta)^2", "sin(theta)")]
    monomials = [m for m in product(range(5), repeat=4) if sum(m) <= 4]
    for _ in range(10):
        coeffs = {}
        for _ in range(int(rng.integers(1, 7))):
            m = monomials[int(rng.integers(len(monomials)))]
            coeffs[m] = Fraction(int(rng.integers(-10, 11)), int(rng.integers(1, 4)))
        polys.append(TrigPoly(coeffs))
    with Timer() as t:
        errs = [grid_check(p, angle_expand(p), 17) for p in polys]
    report(11, max(errs) <= 1e-9 and t.s < 1, f"13 polynomials, worst grid error {max(errs):.1e}, {t.s:.3f} s")


def test_c12_gadgets(report):
    from rigor.kempe import certify, make_gadget

    with Timer() as t:
        # certify() re-runs the 25-point sweep even for cached gadgets
        gs = [certify(make_gadget("multiplier", k=2)), certify(make_gadget("multiplier", k=3)), certify(make_gadget("additor")), certify(make_gadget("reversor"))]
    errs = {f"{g.kind}{g.params.get('k', '')}": g.max_error for g in gs}
    ok = all(g.certified and g.max_error <= 1e-8 for g in gs) and t.s < 60
    report(12, ok, f"max errors {{{', '.join(f'{k}: {v:.1e}' for k, v in errs.items())}}}, {t.s:.2f} s")


@pytest.mark.slow
def test_c13_fourier_linkage(report):
    from rigor.kempe import fourier_linkage, partial_sum, trace

    from oracles import basel_tail, cos_series_inv_square

    a = lambda n: 1.0 / n ** 2
    with Timer() as t:
        link = fourier_linkage(a, 10)
        tr = trace(link, 200)
    trunc = float(np.abs(tr.values - partial_sum(a, 10)(tr.theta)).max())
    full = float(np.abs(tr.values - [cos_series_inv_square(x) for x in tr.theta]).max())
    T = basel_tail(10)
    lens = link.chain_lengths
    pointed = all(x >= y for x, y in zip(lens, lens[1:]))
    ok = trunc <= link.tolerance and T < 0.1 and full <= T + link.tolerance and pointed and np.all(np.diff(tr.g) > 0) and t.s < 120
    report(13, ok, f"vs partial sum {trunc:.1e} (tol {link.tolerance:.1e}), vs series {full:.4f} <= {T:.4f} + tol, chain non-increasing {pointed}, {t.s:.1f} s")


def test_c14_monotone_driver(report):
    from rigor.kempe import angle_expand, assemble_curve_linkage, fourier_linkage, term_linkage, trace

    links = [
        term_linkage(0.5, 2),
        term_linkage(1.0, 1, 1, math.pi / 2),
        fourier_linkage([1.0, 0.5], 2),
        assemble_curve_linkage(angle_expand("cos(theta)*cos(phi)"), theta_range=(0.5, 0.9), close=True),
    ]
    ok = True
    for link in links:
        g = trace(link, 20).g
        ok &= bool(np.all(np.diff(g) > 0))
    report(14, ok, f"{len(links)} traces with strictly increasing g; trace() also rejects any non-monotone sweep")


def test_c15_cli_pipeline(report, tmp_path):
    from rigor.cli import main

    with Timer() as t:
        runs = []
        for k in range(2):
            d = tmp_path / f"run{k}"
            d.mkdir()
            codes = (
                main(["generate", "winerack", "--bays", "5", "-o", str(d / "w5.json")]),
                main(["analyze", "--in", str(d / "w5.json"), "-o", str(d / "report.json")]),
                main(["flex", "--in", str(d / "w5.json"), "--steps", "50", "--pins", "0,2", "-o", str(d / "flex.csv")]),
            )
            runs.append((codes, [(d / n).read_bytes() for n in ("w5.json", "report.json", "flex.csv")]))
    identical = runs[0][1] == runs[1][1]
    ok = identical and runs[0][0] == (0, 1, 0) and runs[1][0] == (0, 1, 0) and t.s < 10
    report(15, ok, f"exit codes {runs[0][0]}, byte-identical {identical}, {t.s:.2f} s")
