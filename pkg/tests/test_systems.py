from fractions import Fraction

import mpmath
import numpy as np
import pytest
import scipy.stats as sps
from hypothesis import given, settings
from hypothesis import strategies as st

from repp_lab.errors import DomainError, ResolutionError, UnsupportedOperation
from repp_lab.intervals import IntervalUnion
from repp_lab.systems import (
    DigitStream,
    DigitStreamOrbit,
    PiMultiple,
    SystemSpec,
    digits_floor,
    digits_per_word,
    doubling,
    image,
    iterate_float,
    jacobian_at,
    lsv,
    make_digit_shift,
    min_return_time,
    near_positions,
    parse_scalar,
    period_of,
    piecewise_affine,
    preimage,
    torus23,
    tripling,
    window_matrix,
    windows,
    windows_at,
)


# -- digit-shift engine ---------------------------------------------------


def test_distance_read_off_from_digits():
    orb = DigitStreamOrbit.from_digits(doubling(), 0, [0, 1, 1, 0], K=8)
    assert orb.distance() == 0.375


def test_step_distance_half():
    orb = DigitStreamOrbit.from_digits(doubling(), 0, [0, 1, 0, 0], K=8)
    assert orb.step_distance() == 0.5


def test_step_distance_sixteenth():
    orb = DigitStreamOrbit.from_digits(doubling(), 0, [1, 0, 0, 0, 1], K=8)
    assert orb.step_distance() == 0.0625


def test_same_seed_same_orbit():
    a = make_digit_shift(doubling(), 0, 64, seed=11)
    b = make_digit_shift(doubling(), 0, 64, seed=11)
    c = make_digit_shift(doubling(), 0, 64, seed=12)
    sa = [a.step_distance() for _ in range(300)]
    sb = [b.step_distance() for _ in range(300)]
    sc = [c.step_distance() for _ in range(300)]
    assert sa == sb
    assert sa != sc


def test_pi_over_16_ternary_digits_match_mpmath():
    with mpmath.workdps(80):
        oracle = int(mpmath.floor(mpmath.pi / 16 * mpmath.mpf(3) ** 64))
    assert digits_floor(PiMultiple(Fraction(1, 16)), 3, 64) == oracle
    orb = make_digit_shift(tripling(), "pi/16", 64, seed=0)
    assert orb._z[0] == oracle


def test_doubling_distance_doubles_near_zero():
    # x = eps on the right of 0: eps = 0.00101b = 5/32 < 1/4
    orb = DigitStreamOrbit.from_digits(doubling(), 0, [0, 0, 1, 0, 1], K=16)
    eps = orb.distance_fraction()
    assert eps == Fraction(5, 32)
    orb.step_distance()
    assert orb.distance_fraction() == 2 * eps
    assert abs(float(2 * eps) - iterate_float(doubling(), float(eps), 1)[0]) < 1e-15


def test_resolution_cap():
    with pytest.raises(ResolutionError):
        make_digit_shift(doubling(), 0, 5000, seed=0)


def test_non_finite_zeta_rejected():
    with pytest.raises(DomainError):
        parse_scalar("inf")
    with pytest.raises(DomainError):
        make_digit_shift(doubling(), float("nan"), 64, seed=0)


def test_unresolved_flag_only_when_close():
    orb = DigitStreamOrbit.from_digits(doubling(), 0, [0] * 40 + [1], K=32)
    orb.distance()
    assert orb.unresolved
    orb = DigitStreamOrbit.from_digits(doubling(), 0, [0, 1], K=32)
    orb.distance()
    assert not orb.unresolved


@pytest.mark.parametrize("base", [2, 3, 5])
def test_windows_match_big_integer_slicing(base):
    st_ = DigitStream(base, 5)
    w = st_.words(6)
    D = digits_per_word(base)
    B = base**D
    big = 0
    for x in w:
        big = big * B + int(x)
    total = len(w) * D
    win = windows(w, base)
    for p in range(0, (len(w) - 1) * D):
        want = (big // base ** (total - p - D)) % B
        assert int(win[p]) == want
    pos = np.arange(0, (len(w) - 1) * D, 3)
    assert np.array_equal(windows_at(w, base, pos), win[pos])


@pytest.mark.parametrize("base", [2, 3])
def test_near_positions_agree_with_brute_force(base):
    w = DigitStream(base, 9).words(40)
    Wm = window_matrix(w, base)
    flat = windows(w, base)
    D = digits_per_word(base)
    B = base**D
    Z, R = B // 3, B // 50
    d = np.array([min((int(x) - Z) % B, (Z - int(x)) % B) for x in flat])
    want = np.flatnonzero(d <= R)
    got = near_positions(Wm, Z, R, base, len(flat))
    assert np.array_equal(got, want)


# -- float engine ----------------------------------------------------------


def test_iterate_float_doubling():
    xs = iterate_float(piecewise_affine([(0, Fraction(1, 2), 2, 0), (Fraction(1, 2), 1, 2, -1)]), 0.3, 2)
    assert abs(xs[0] - 0.6) <= np.spacing(0.6)
    assert abs(xs[1] - 0.2) <= 2 * np.spacing(0.2)


def test_intermittent_fixed_point():
    assert np.all(iterate_float(lsv(0.5), 0.0, 50) == 0.0)


def test_dither_breaks_float_collapse():
    plain = iterate_float(doubling(), 1 / 3, 200)
    assert np.all(plain[100:] == plain[-1])
    # 1000 parallel orbits x 100 steps = 1e5 iterates; one orbit is too
    # autocorrelated for an iid KS test, so test the final, independent row
    xs = iterate_float(doubling(), np.full(1000, 1 / 3), 100, dither=True, seed=3)
    assert sps.kstest(xs[-1], "uniform").pvalue > 0.01


def test_iterate_float_domain():
    with pytest.raises(DomainError):
        iterate_float(doubling(), 1.5, 3)


# -- interval images ---------------------------------------------------------


def test_image_and_preimage_examples():
    D = doubling()
    assert image(D, IntervalUnion([(0, Fraction(1, 8))])) == IntervalUnion([(0, Fraction(1, 4))])
    assert preimage(D, IntervalUnion([(0, Fraction(1, 4))])) == IntervalUnion(
        [(0, Fraction(1, 8)), (Fraction(1, 2), Fraction(5, 8))])


def test_tripling_image_of_ball_at_pi_over_16():
    z = float(PiMultiple(Fraction(1, 16)))
    s = IntervalUnion.ball(z, 0.01)
    im = image(tripling(), s)
    target = IntervalUnion.ball(3 * z, 0.03)
    for (a, b), (c, d) in zip(im, target):
        assert abs(a - c) < 1e-12 and abs(b - d) < 1e-12
    pts = np.random.default_rng(0).uniform(z - 0.01, z + 0.01, 10**4)
    assert np.all(im.contains_array(np.mod(3 * pts, 1.0)))


def test_min_return_time_fixed_point_ball():
    e = Fraction(1, 64)
    s = IntervalUnion([(0, e), (1 - e, 1)])
    assert min_return_time(doubling(), s, 10) == 1


def test_min_return_time_annulus():
    e = Fraction(1, 2**10)
    s = IntervalUnion([(e / 2, e), (1 - e, 1 - e / 2)])
    assert min_return_time(doubling(), s, 40) >= 9


def test_return_time_grows_at_generic_point():
    z = Fraction(int(np.random.default_rng(4).integers(1, 2**40)), 2**40) + Fraction(1, 3 * 2**41)
    rts = []
    for k in range(10, 21, 2):
        rts.append(min_return_time(tripling(), IntervalUnion.ball(z, Fraction(1, 2**k)), 200))
    assert all(r is not None for r in rts)
    assert all(a <= b for a, b in zip(rts, rts[1:]))
    assert rts[-1] > rts[0]


def test_image_rejects_intermittent():
    with pytest.raises(UnsupportedOperation):
        image(lsv(0.5), IntervalUnion([(0, Fraction(1, 4))]))


unions = st.lists(st.tuples(st.integers(0, 255), st.integers(1, 32)), min_size=1, max_size=4).map(
    lambda xs: IntervalUnion([(Fraction(a, 256), Fraction(min(a + w, 256), 256)) for a, w in xs]))


@settings(max_examples=60, deadline=None)
@given(unions)
def test_image_preimage_containment(s):
    for spec in (doubling(), tripling()):
        assert s.issubset(image(spec, preimage(spec, s)))
        assert s.issubset(preimage(spec, image(spec, s)))
        assert preimage(spec, s).measure() == s.measure()


@settings(max_examples=40, deadline=None)
@given(unions, unions)
def test_return_time_monotone_under_enlargement(s, t):
    big = s.union(t)
    r_small = min_return_time(doubling(), s, 12)
    r_big = min_return_time(doubling(), big, 12)
    if r_small is not None:
        assert r_big is not None and r_big <= r_small


# -- periodic points ------------------------------------------------------------


def test_jacobians():
    assert jacobian_at(doubling(), 0, 1).tolist() == [[2.0]]
    assert jacobian_at(torus23(), (0, 0), 1).tolist() == [[2.0, 0.0], [0.0, 3.0]]
    assert jacobian_at(tripling(), 0, 1).tolist() == [[3.0]]
    assert jacobian_at(doubling(), Fraction(1, 3), 2).tolist() == [[4.0]]


def test_jacobian_non_periodic():
    with pytest.raises(DomainError, match="periodic"):
        jacobian_at(doubling(), Fraction(1, 3), 1)


def test_period_of():
    assert period_of(doubling(), 0) == 1
    assert period_of(doubling(), Fraction(1, 3)) == 2
    assert period_of(tripling(), "pi/16") is None


# -- spec validation --------------------------------------------------------------


def test_spec_validation():
    with pytest.raises(DomainError):
        SystemSpec("digit_shift", bases=(1,))
    with pytest.raises(DomainError):
        piecewise_affine([(0, Fraction(2, 3), 2, 0), (Fraction(1, 2), 1, 2, -1)])
    with pytest.raises(DomainError):
        SystemSpec("intermittent", alpha=0.5, measure="lebesgue")
    with pytest.raises(DomainError):
        piecewise_affine([(0, Fraction(1, 2), 3, 0), (Fraction(1, 2), 1, 2, -1)])


@pytest.mark.parametrize("spec", [doubling(), torus23(), lsv(0.3),
                                  piecewise_affine([(0, Fraction(1, 2), 2, 0), (Fraction(1, 2), 1, 2, -1)])])
def test_text_round_trip(spec):
    assert SystemSpec.from_text(spec.to_text()) == spec
