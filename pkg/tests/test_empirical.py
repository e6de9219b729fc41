import io
import math
from fractions import Fraction

import numpy as np
import pytest

from repp_lab.empirical import (
    Cell,
    PointEnsemble,
    PointMeasure,
    RectangleFamily,
    aq_set,
    band,
    build_repp1,
    build_repp2,
    build_repp_multi,
    choose_q,
    clusters,
    count_in,
    dprime_diagnostic,
    ensemble_to_csv,
    mark_set,
    q_prime,
    read_csv,
    void_frequency,
)
from repp_lab.errors import DataError, DomainError, ResolutionError
from repp_lab.intervals import IntervalUnion
from repp_lab.observables import ObservableSpec, ThresholdScheme
from repp_lab.systems import doubling, torus23

G1_0 = ObservableSpec("g1", (0,))


# -- builders ---------------------------------------------------------------


def test_repp1_empty_when_below_level():
    pm = build_repp1(np.zeros(20), 1.0, 10)
    assert len(pm) == 0


def test_repp1_single_exceedance():
    x = np.zeros(10)
    x[5] = 3.0
    pm = build_repp1(x, 1.0, 10)
    assert pm.times.tolist() == [0.5]


def test_repp2_point_at_zeta_has_mark_zero():
    ts = ThresholdScheme(G1_0, 100)
    pm = build_repp2([math.inf], ts)
    assert pm.atoms() == [(0.0, (0.0,))]


def test_repp2_mark_is_two_n_eps():
    n = 1000
    ts = ThresholdScheme(G1_0, n)
    eps = 1e-3
    pm = build_repp2([-math.log(eps), -math.log(2 * eps)], ts)
    m = pm.marks[:, 0]
    assert sorted(m.tolist()) == pytest.approx([2 * n * eps, 4 * n * eps], rel=1e-12)
    assert m.max() / m.min() == pytest.approx(2.0, rel=1e-12)


def test_repp2_drops_large_marks_and_flags_unresolved():
    ts = ThresholdScheme(G1_0, 100)
    pm = build_repp2([-math.log(0.5), -math.log(0.001)], ts, tau_max=10)
    assert len(pm) == 1
    with pytest.raises(ResolutionError):
        build_repp2([-math.log(0.001)], ts, unresolved=[True])


def test_repp_multi_affine_action():
    n = 10**4
    ts = ThresholdScheme(ObservableSpec("g1", (0, 0)), n)
    v = np.array([1e-3, -2e-3])
    pm = build_repp_multi([v, v * [2, 3]], ts, radius=10.0)
    a0 = pm.marks[pm.times == 0][0]
    a1 = pm.marks[pm.times == 1 / n][0]
    assert a1 == pytest.approx(a0 * [2, 3], rel=1e-12)
    origin = build_repp_multi([[0.0, 0.0]], ts, radius=1.0)
    assert origin.marks.tolist() == [[0.0, 0.0]]


def test_repp1_mean_count_equals_tau():
    # iid uniform points have the same one-point marginal as the doubling map
    n, tau, M = 10**4, 1.0, 4000
    ts = ThresholdScheme(G1_0, n)
    u = ts.threshold(tau)
    rng = np.random.default_rng(1)
    counts = []
    for _ in range(M):
        x = rng.random(n)
        d = np.minimum(x, 1 - x)
        counts.append(len(build_repp1(-np.log(d), u, n)))
    counts = np.array(counts)
    assert abs(counts.mean() - tau) <= 3 * counts.std(ddof=1) / math.sqrt(M)


# -- A^(q) and q selection ------------------------------------------------------


def test_aq_set_q0_is_identity():
    a = IntervalUnion([(0, Fraction(1, 8)), (Fraction(1, 2), Fraction(3, 4))])
    assert aq_set(a, doubling(), 0) == a


def test_aq_set_doubling_ball_at_zero():
    e = Fraction(1, 1024)
    a = IntervalUnion([(0, e), (1 - e, 1)])
    aq = aq_set(a, doubling(), 1)
    assert list(aq) == [(e / 2, e), (1 - e, 1 - e / 2)]
    assert aq.measure() / a.measure() == Fraction(1, 2)


def test_choose_q_fixed_point():
    ts = ThresholdScheme(G1_0, 1000)
    assert choose_q(doubling(), G1_0, ts) == 1


def test_choose_q_non_periodic():
    zeta = Fraction(int(np.random.default_rng(8).integers(1, 2**62)) | 1, 2**62)
    obs = ObservableSpec("g1", (zeta,))
    assert choose_q(doubling(), obs, ThresholdScheme(obs, 1000)) == 0


def test_q_prime_formula():
    assert q_prime(1, 2.5, 10, 1, 2) == 2
    assert q_prime(1, 5, 10, 1, 2) == 1


# -- counting ---------------------------------------------------------------------


def test_count_in_empty():
    fam = RectangleFamily((Cell(0, 0.5, band((0, 1))), Cell(0.5, 1, band((1, 2)))))
    assert count_in(PointMeasure.empty(), fam).tolist() == [0, 0]


def test_count_in_half_open_marks():
    pm = PointMeasure.from_atoms([(0.5, 1.0)])
    assert count_in(pm, RectangleFamily.single(0, 1, band((0.5, 1.5)))).tolist() == [1]
    assert count_in(pm, RectangleFamily.single(0, 1, band((1.0, 1.5)))).tolist() == [0]
    assert count_in(pm, RectangleFamily.single(0, 1, band((0.5, 1.0)))).tolist() == [1]
    assert count_in(pm, RectangleFamily.single(0, 0.5, band((0, 2)))).tolist() == [0]


def test_family_rejects_overlapping_times():
    with pytest.raises(DomainError):
        RectangleFamily((Cell(0, 0.6), Cell(0.5, 1)))


def test_point_measure_validation():
    with pytest.raises(DataError):
        PointMeasure(np.array([1.5]), np.array([[1.0]]), 1.0)
    pm = PointMeasure(np.array([0.7, 0.2]), np.array([[1.0], [2.0]]))
    assert pm.times.tolist() == [0.2, 0.7]


# -- clusters ---------------------------------------------------------------------


def test_cluster_example():
    cs = clusters([10, 11, 12, 500], [1, 2, 3, 4], q=1)
    assert cs.sizes.tolist() == [3, 1]
    assert cs.starts.tolist() == [10, 500]
    assert [m.tolist() for m in cs.marks] == [[1, 2, 3], [4]]
    assert cs.sizes.sum() == cs.n_exceedances


def test_clusters_empty():
    cs = clusters([], [], q=1)
    assert len(cs.sizes) == 0 and cs.n_exceedances == 0


def test_doubling_cluster_sizes_geometric():
    # exact digit model: at the fixed point a cluster grows while the next digit repeats
    rng = np.random.default_rng(3)
    sizes = rng.geometric(0.5, 20000)
    idx, t = [], 0
    for s in sizes:
        idx.extend(range(t, t + s))
        t += s + 50
    cs = clusters(idx, np.zeros(len(idx)), q=1)
    assert np.array_equal(cs.sizes, sizes)
    assert cs.theta_cc == pytest.approx(0.5, abs=3 * cs.theta_cc_se)


# -- D' diagnostic ------------------------------------------------------------------


def _dprime_ladder(q):
    out = []
    for k in range(10, 17, 2):
        n = 2**k
        an = mark_set(ThresholdScheme(G1_0, n), band((0, 1)))
        out.append(dprime_diagnostic(doubling(), an, q, n // 32, n))
    return out


def test_dprime_with_correct_q_decreases():
    vals = _dprime_ladder(1)
    assert vals[0] < 0.05
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_dprime_with_q0_stays_away_from_zero():
    assert min(_dprime_ladder(0)) >= 0.5


def test_dprime_empty_aq():
    assert dprime_diagnostic(doubling(), IntervalUnion.empty(), 1, 4, 64) == 0


# -- void frequencies -----------------------------------------------------------------


def test_void_empty_family_is_one():
    pms = [PointMeasure.from_atoms([(0.1, 0.5)]) for _ in range(5)]
    assert void_frequency(pms, RectangleFamily(())).p == 1.0


def test_void_empty_ensemble_errors():
    with pytest.raises(DataError):
        void_frequency([], RectangleFamily(()))


def test_void_frequency_poisson_cell():
    rng = np.random.default_rng(4)
    M = 5000
    pms = []
    for _ in range(M):
        k = rng.poisson(2.0)
        pms.append(PointMeasure(rng.random(k), rng.uniform(0, 2, k).reshape(-1, 1)))
    v = void_frequency(PointEnsemble.from_measures(pms), RectangleFamily.single(0, 1, band((0, 1))))
    assert v.lo <= math.exp(-1) <= v.hi


def test_csv_round_trip():
    pm = PointMeasure.from_atoms([(0.1, 1 / 3), (0.7, 2.0)])
    ens = PointEnsemble.from_measures([pm, PointMeasure.empty(), pm])
    buf = io.StringIO()
    ensemble_to_csv(ens, buf)
    back = read_csv(io.StringIO(buf.getvalue()), n_runs=3)
    assert back.measure(2) == pm
    assert len(back.measure(1)) == 0


def test_multi_d_intensity_normalisation():
    # iid uniform points on the torus: mean count in J x G is |J| |G|
    n, M = 2000, 3000
    ts = ThresholdScheme(ObservableSpec("g1", (0, 0)), n)
    rng = np.random.default_rng(6)
    cnt = np.empty(M)
    for r in range(M):
        off = rng.random((n, 2))
        off = np.where(off > 0.5, off - 1, off)
        pm = build_repp_multi(off, ts, radius=1.0)
        cnt[r] = np.sum(np.all(np.abs(pm.marks) < 0.5, axis=1))
    assert abs(cnt.mean() - 1.0) <= 3 * cnt.std(ddof=1) / math.sqrt(M)
    assert torus23().dimension == 2
