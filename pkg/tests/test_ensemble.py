import math

import numpy as np
import pytest

from repp_lab.empirical import RectangleFamily, band, void_from_counts
from repp_lab.ensemble import check_resolution, run_orbits
from repp_lab.errors import DomainError
from repp_lab.observables import ObservableSpec, ThresholdScheme
from repp_lab.stats import compare_void
from repp_lab.systems import doubling, torus23

G1_0 = ObservableSpec("g1", (0,))


@pytest.fixture(scope="module")
def batch():
    return run_orbits(doubling(), G1_0, 10**5, 3000, seed=21, tau_max=4.0, lookahead=4, records=True)


def test_prefix_property():
    big = run_orbits(doubling(), G1_0, 10**4, 40, seed=5, tau_max=3.0)
    small = run_orbits(doubling(), G1_0, 10**4, 15, seed=5, tau_max=3.0)
    sub = big.subset(15)
    assert np.array_equal(sub.idx, small.idx)
    assert np.array_equal(sub.marks, small.marks)


def test_within_cluster_marks_double(batch):
    # exact linearity of 2x mod 1 near the fixed point
    order = np.lexsort((batch.idx, batch.run_id))
    r, j, m = batch.run_id[order], batch.idx[order], batch.marks[order]
    nxt = (r[1:] == r[:-1]) & (j[1:] - j[:-1] == 1) & (m[:-1] < 0.25 * batch.n)
    assert nxt.sum() > 1000
    np.testing.assert_allclose(m[1:][nxt] / m[:-1][nxt], 2.0, rtol=1e-9)


def test_mean_exceedance_count_is_tau(batch):
    tau = 1.0
    counts = np.bincount(batch.run_id[batch.window(tau)], minlength=batch.n_runs)
    assert abs(counts.mean() - tau) <= 3 * counts.std(ddof=1) / math.sqrt(batch.n_runs)


def test_void_single_cell(batch):
    tau = 2.0
    v = void_from_counts(batch.ensemble().counts(RectangleFamily.single(0, 1, band((0, tau)))))
    assert compare_void(v.n_void, v.n_runs, math.exp(-tau / 2)).passed


def test_cluster_estimators(batch):
    cs = batch.clusters(1, tau=2.0)
    for est, se in ((cs.theta_aq, cs.theta_aq_se), (cs.theta_cc, cs.theta_cc_se)):
        assert abs(est - 0.5) <= 3 * se


def test_records_present(batch):
    counts = batch.record_counts(0.1, 1.0)
    assert counts.shape == (batch.n_runs,)
    # k = 0 has probability a/b = 0.1
    assert abs(np.mean(counts == 0) - 0.1) <= 3 * math.sqrt(0.09 / batch.n_runs)


def test_no_unresolved_steps(batch):
    check_resolution(batch)


def test_clusters_beyond_lookahead(batch):
    with pytest.raises(DomainError):
        batch.clusters(10)


def test_torus_multi_intensity():
    n = 10**4
    obs = ObservableSpec("g1", (0, 0))
    b = run_orbits(torus23(), obs, n, 800, seed=2, radius=1.0)
    ens = b.multi_ensemble(ThresholdScheme(obs, n), radius=1.0)
    inside = np.all(np.abs(ens.marks) < 0.5, axis=1)
    counts = np.bincount(ens.run_id[inside], minlength=ens.n_runs)
    assert abs(counts.mean() - 1.0) <= 3 * counts.std(ddof=1) / math.sqrt(ens.n_runs)
