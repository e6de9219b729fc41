import math
from fractions import Fraction

import numpy as np
import pytest

from repp_lab.empirical import Cell, RectangleFamily, band, void_from_counts
from repp_lab.errors import DomainError
from repp_lab.intervals import BoxUnion
from repp_lab.limits import (
    LimitLaw,
    Window,
    analytic_void,
    expected_count,
    sample_compound1d,
    sample_ensemble,
    sample_ndag,
    sample_poisson2d,
    sample_stacked_geometric,
)
from repp_lab.nu import OuterMeasureSpec, angular_coefficients
from repp_lab.stats import chi_square_pmf, compare_void

W = Window(horizon=1.0, tau_max=10.0)


def _within(x, ref, se, k=3):
    return abs(x - ref) <= k * se


def test_empty_window():
    assert len(sample_poisson2d(Window(0.0, 10.0), 1)) == 0
    assert len(sample_poisson2d(Window(1.0, 0.0), 1)) == 0


def test_deterministic_in_seed():
    law = LimitLaw.stacked_geometric(Fraction(3, 2))
    a = sample_ensemble(law, W, 20, 4)
    b = sample_ensemble(law, W, 20, 4)
    assert np.array_equal(a.times, b.times) and np.array_equal(a.marks, b.marks)


def test_poisson2d_unit_square():
    M = 10**5
    ens = sample_ensemble(LimitLaw.poisson2d(), W, M, 11)
    c = ens.counts(RectangleFamily.single(0, 1, band((0, 1))))[:, 0]
    assert _within(c.mean(), 1.0, 1 / math.sqrt(M))
    v = void_from_counts(ens.counts(RectangleFamily.single(0, 0.5, band((0, 3)))))
    assert compare_void(v.n_void, v.n_runs, math.exp(-1.5)).passed


def test_simplicity():
    ens = sample_ensemble(LimitLaw.stacked_geometric(2, 1), W, 10**5, 12)
    key = ens.run_id.astype(np.float64) * 10 + ens.times
    pairs = np.stack([key, ens.marks[:, 0]], axis=1)
    assert len(np.unique(pairs, axis=0)) == len(pairs)


def test_stack_ratio_exact():
    law = LimitLaw.stacked_geometric(Fraction(3, 2))
    pm = sample_stacked_geometric(law, Window(5.0, 10.0), 3)
    for t in np.unique(pm.times):
        m = np.sort(pm.marks[pm.times == t, 0])
        if len(m) > 1:
            np.testing.assert_allclose(m[1:] / m[:-1], 1.5, rtol=1e-15)


def test_stacked_void_and_mean():
    law = LimitLaw.stacked_geometric(2, 1)
    M = 10**5
    ens = sample_ensemble(law, W, M, 13)
    fam = RectangleFamily.single(0, 1, band((0, 2)))
    v = void_from_counts(ens.counts(fam))
    assert compare_void(v.n_void, v.n_runs, analytic_void(law, fam)).passed
    assert analytic_void(law, fam) == pytest.approx(math.exp(-1.0))
    cell = Cell(0, 1, band((1, 3)))
    c = ens.counts(RectangleFamily((cell,)))[:, 0]
    assert _within(c.mean(), expected_count(law, cell), c.std(ddof=1) / math.sqrt(M))


def test_stacked_consistency_check():
    with pytest.raises(DomainError):
        LimitLaw.stacked_geometric(2, 1, theta=Fraction(1, 3))
    with pytest.raises(DomainError):
        LimitLaw.stacked_linear(((1, 0), (0, 1)))


def test_compound_theta_one_is_simple():
    pm = sample_compound1d(1, 3.0, Window(10.0, 10.0), 0)
    assert len(pm) > 0 and np.all(pm.marks == 1)


def test_compound_multiplicities():
    ens = sample_ensemble(LimitLaw.compound1d(Fraction(1, 3), 2), Window(200.0, 1.0), 1000, 5)
    d = ens.marks[:, 0].astype(int)
    assert len(d) > 10**5
    assert _within(d.mean(), 3.0, d.std(ddof=1) / math.sqrt(len(d)))
    th = 1 / 3
    rep = chi_square_pmf(d, lambda k: th * (1 - th) ** (k - 1), "geometric(1/3)", kmin=1)
    assert rep.passed


def test_torus_theta():
    assert LimitLaw.stacked_linear(((2, 0), (0, 3))).theta == Fraction(5, 6)


def test_multid_stack_and_intensity():
    law = LimitLaw.stacked_linear(((2, 0), (0, 3)))
    win = Window(1.0, 10.0, radius=2.0)
    ens = sample_ensemble(law, win, 20000, 6)
    # second point of a stack is diag(2,3) times the first
    r0 = ens.run_id == 0
    t, x = ens.times[r0], ens.marks[r0]
    for tt in np.unique(t):
        pts = x[t == tt]
        pts = pts[np.argsort(np.linalg.norm(pts, axis=1))]
        if len(pts) > 1:
            np.testing.assert_allclose(pts[1], pts[0] * [2, 3], rtol=1e-12)
    g = BoxUnion.box((-0.5, -0.5), (0.5, 0.5))
    c = ens.counts(RectangleFamily((Cell(0, 1, g),)))[:, 0]
    assert _within(c.mean(), 1.0, c.std(ddof=1) / math.sqrt(len(c)))
    assert expected_count(law, Cell(0, 0.5, g)) == pytest.approx(0.5)


def test_ndag_base_marks_and_isotropic_case():
    law = LimitLaw.ndag(((2, 0), (0, 2)))
    pm = sample_ndag(law, W, 9)
    for tt in np.unique(pm.times):
        m = np.sort(pm.marks[pm.times == tt, 0])
        np.testing.assert_allclose(m / m[0], 4.0 ** np.arange(len(m)), rtol=1e-12)


def test_ndag_angle_zero_coefficient():
    coef = angular_coefficients(((2, 0), (0, 3)), 0.0, 100.0)
    assert coef[0] == pytest.approx(1.0)
    assert coef[1] == pytest.approx(4.0)


def test_hat_n_void():
    law = LimitLaw.hat_n(Fraction(5, 2))
    M = 10**5
    ens = sample_ensemble(law, W, M, 14)
    fam = RectangleFamily.single(0, 1, band((1, 4)))
    ref = math.exp(-(0.5 * 3 + 0.5 * (3 - 0.6)))  # A \ (2/5)A = (1.6, 4]
    assert analytic_void(law, fam) == pytest.approx(ref)
    v = void_from_counts(ens.counts(fam))
    assert compare_void(v.n_void, v.n_runs, ref).passed


def test_double_hat_n():
    law = LimitLaw.double_hat_n()
    M = 10**5
    ens = sample_ensemble(law, W, M, 15)
    cell = Cell(0, 1, band((0, 2)))
    c = ens.counts(RectangleFamily((cell,)))[:, 0]
    assert _within(c.mean(), 2.0, c.std(ddof=1) / math.sqrt(M))
    v = void_from_counts(ens.counts(RectangleFamily((cell,))))
    assert compare_void(v.n_void, v.n_runs, math.exp(-10 / 11 * 2)).passed


def test_analytic_void_examples():
    assert analytic_void(LimitLaw.poisson2d(), RectangleFamily.single(0, 1, band((0, 1)))) == pytest.approx(math.e**-1)
    sg = LimitLaw.stacked_geometric(2, 1)
    assert analytic_void(sg, RectangleFamily.single(0, 3, band((0, 2)))) == pytest.approx(math.exp(-3))
    fam = RectangleFamily((Cell(0, 0.5, band((0, 2))), Cell(0.5, 1, band((1, 4)))))
    one = [analytic_void(sg, RectangleFamily((c,))) for c in fam.cells]
    assert analytic_void(sg, fam) == pytest.approx(one[0] * one[1])
    assert analytic_void(OuterMeasureSpec.lebesgue(), RectangleFamily(())) == 1.0


def test_expected_count_rectangle():
    assert expected_count(LimitLaw.poisson2d(), Cell(0, 2, band((1, 3)))) == 4


@pytest.mark.parametrize("text", ["poisson2d", "stacked_geometric:alpha=3/2,d=1", "compound1d:theta=1/2,tau=2",
                                  "ndag:matrix=2;0|0;3", "stacked_linear:matrix=2;1|0;2", "hat_n:beta_plus=5/2",
                                  "double_hat_n", "poisson_multid:d=2"])
def test_parse_round_trip(text):
    law = LimitLaw.parse(text)
    assert LimitLaw.from_dict(law.to_dict()) == law
