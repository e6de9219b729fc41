import math

import numpy as np
import pytest

from repp_lab.errors import DataError, UnderpoweredError
from repp_lab.stats import (
    GofReport,
    bonferroni,
    bonferroni_z,
    chi_square_poisson,
    compare_void,
    geometric_fit,
    ks_exponential,
    merge_bins,
    z_check,
)


@pytest.mark.slow
def test_poisson_chi2_calibration():
    rng = np.random.default_rng(0)
    p = np.array([chi_square_poisson(rng.poisson(2.0, 10**4), 2.0).p_value for _ in range(1000)])
    rate = np.mean(p < 0.01)
    assert abs(rate - 0.01) <= 3 * math.sqrt(0.01 * 0.99 / 1000)


def test_poisson_chi2_power():
    rng = np.random.default_rng(1)
    rejections = [not chi_square_poisson(rng.poisson(2.0, 10**5), 3.0).passed for _ in range(20)]
    assert all(rejections)


def test_degenerate_zero_counts():
    assert chi_square_poisson(np.zeros(100, int), 0.0).passed


def test_underpowered():
    with pytest.raises(UnderpoweredError):
        chi_square_poisson(np.array([], int), 1.0)


def test_geometric_theta_one():
    assert geometric_fit(np.ones(500, int), 1.0).passed


def test_geometric_fit_and_power():
    rng = np.random.default_rng(2)
    sizes = rng.geometric(0.5, 10**4)
    assert geometric_fit(sizes, 0.5).passed
    rej = [not geometric_fit(rng.geometric(0.5, 10**4), 0.6).passed for _ in range(50)]
    assert np.mean(rej) > 0.95


def test_ks_exponential():
    rng = np.random.default_rng(3)
    assert ks_exponential(rng.exponential(1.0, 5000), 1.0).passed
    assert not ks_exponential(rng.uniform(0, 2, 5000), 1.0).passed
    with pytest.raises(DataError):
        ks_exponential(np.array([1.0, 0.0] * 100), 1.0)


def test_compare_void_examples():
    ref = math.exp(-0.5)
    # 0.60 with standard error 0.01 corresponds to 2400 runs
    assert compare_void(1440, 2400, ref).passed
    assert not compare_void(5000, 10**4, ref).passed
    assert compare_void(50, 50, 1.0).passed
    assert not compare_void(49, 50, 1.0).passed


def test_compare_void_small_expected_uses_binomial():
    r = compare_void(1, 1000, 0.002)
    assert r.test == "void_binomial" and r.passed


def test_merge_bins_tail():
    groups = merge_bins(np.array([10.0, 6.0, 3.0, 1.0, 0.5]))
    assert [g.tolist() for g in groups] == [[0], [1, 2, 3, 4]]


def test_report_round_trip():
    r = z_check(1.0, 0.0, 0.5, 10, "z")
    assert GofReport.from_dict(r.to_dict()) == r
    assert r.decision == "pass"


def test_bonferroni():
    reps = [z_check(3.0, 0.0, 1.0, 10, "z") for _ in range(10)]
    assert not reps[0].passed
    assert all(r.passed for r in bonferroni(reps))
    assert bonferroni_z(0.01, 1) == pytest.approx(2.5758, abs=1e-4)
