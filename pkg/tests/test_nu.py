from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repp_lab.empirical import band
from repp_lab.errors import DomainError
from repp_lab.intervals import BoxUnion, IntervalUnion
from repp_lab.nu import OuterMeasureSpec, empirical_nu, nu_eval, nu_monte_carlo
from repp_lab.observables import ObservableSpec, ThresholdScheme
from repp_lab.systems import doubling

F = Fraction
HALF = OuterMeasureSpec.contraction(F(1, 2))
GAPPED = IntervalUnion([(1, 2), (3, 4)])


def _agree(spec, a, seed=0, samples=200_000):
    est = nu_monte_carlo(spec, a, samples, seed)
    return abs(est.estimate - float(nu_eval(spec, a))) <= 3 * max(est.sigma, 1e-12)


def test_lebesgue():
    assert nu_eval(OuterMeasureSpec.lebesgue(), GAPPED) == 2


def test_contraction_interval_at_zero():
    theta = F(1, 3)
    assert nu_eval(OuterMeasureSpec.contraction(1 - theta), IntervalUnion([(0, 5)])) == theta * 5


def test_contraction_gapped_union():
    assert nu_eval(HALF, GAPPED) == F(3, 2)


def test_mc_agrees_on_examples():
    assert _agree(HALF, GAPPED, 1)
    assert _agree(OuterMeasureSpec.contraction(F(2, 3)), IntervalUnion([(0, 5)]), 2)
    assert _agree(OuterMeasureSpec.lebesgue(), GAPPED, 3)


def test_linear_diag_box():
    spec = OuterMeasureSpec.linear(((F(1, 2), 0), (0, F(1, 3))))
    a = BoxUnion.box((1, 1), (2, 2))
    assert nu_eval(spec, a) == pytest.approx(1.0)
    assert _agree(spec, a, 4)


def test_mixture_example():
    spec = OuterMeasureSpec.mixture(F(10, 11), F(1, 11), F(10, 3))
    assert nu_eval(spec, IntervalUnion([(0, 3)])) == pytest.approx(30 / 11)
    assert _agree(spec, IntervalUnion([(F(1, 2), 4)]), 5)


def test_unbounded_rejected():
    with pytest.raises(DomainError):
        nu_eval(HALF, IntervalUnion([(1, float("inf"))]))


def test_mc_needs_samples():
    with pytest.raises(DomainError):
        nu_monte_carlo(HALF, GAPPED, 100, 0)


unions = st.lists(st.tuples(st.integers(1, 120), st.integers(1, 40)), min_size=1, max_size=3).map(
    lambda xs: IntervalUnion([(F(a, 16), F(a + w, 16)) for a, w in xs]))
specs = st.sampled_from([HALF, OuterMeasureSpec.contraction(F(2, 3)), OuterMeasureSpec.lebesgue(),
                         OuterMeasureSpec.mixture(F(1, 2), F(1, 2), F(2, 5))])


@settings(max_examples=60, deadline=None)
@given(specs, unions, unions)
def test_monotone_and_bounded(spec, a, b):
    big = a.union(b)
    va, vb = nu_eval(spec, a), nu_eval(spec, big)
    assert 0 <= va <= a.measure()
    assert va <= vb


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([HALF, OuterMeasureSpec.contraction(F(2, 3))]), unions,
       st.fractions(F(1, 8), F(8)))
def test_homogeneity(spec, a, beta):
    assert nu_eval(spec, a.scale(beta)) == beta * nu_eval(spec, a)


@pytest.mark.slow
@pytest.mark.parametrize("spec", [HALF, OuterMeasureSpec.contraction(F(2, 3)),
                                  OuterMeasureSpec.mixture(F(10, 11), F(1, 11), F(10, 3))])
def test_mc_agrees_on_random_unions(spec):
    # 100 random unions per spec; Bonferroni-style allowance of 4 sigma
    rng = np.random.default_rng(17)
    bad = 0
    for i in range(100):
        k = rng.integers(1, 4)
        pairs = [(F(int(a), 64), F(int(a + w), 64)) for a, w in zip(rng.integers(1, 400, k), rng.integers(1, 100, k))]
        a = IntervalUnion(pairs)
        est = nu_monte_carlo(spec, a, 20_000, int(rng.integers(2**32)))
        bad += abs(est.estimate - float(nu_eval(spec, a))) > 4 * max(est.sigma, 1e-9 * float(a.measure()))
    assert bad == 0


def _doubling_nu(a, n, q=1):
    obs = ObservableSpec("g1", (0,))
    return empirical_nu(doubling(), obs, ThresholdScheme(obs, n), a, q)


def test_empirical_nu_interval_at_zero():
    for k in (10, 14, 20):
        assert _doubling_nu(band((0, 3)), 2**k) == F(3, 2)


def test_empirical_nu_annulus():
    a = band((F(3, 2), 3))
    got = _doubling_nu(a, 2**20)
    ref = nu_eval(HALF, a)
    assert abs(float(got) - float(ref)) / float(ref) < 1e-6


def test_empirical_nu_non_periodic_q0():
    zeta = F(0x5DEECE66D, 2**40)
    obs = ObservableSpec("g1", (zeta,))
    a = band((F(1, 2), 2))
    assert empirical_nu(doubling(), obs, ThresholdScheme(obs, 2**16), a, 0) == a.measure()


def test_parse_round_trip():
    for text in ("contraction:lam=1/2", "mixture:w1=10/11,w2=1/11,c=10/3", "lebesgue"):
        spec = OuterMeasureSpec.parse(text)
        assert OuterMeasureSpec.from_dict(spec.to_dict()) == spec
