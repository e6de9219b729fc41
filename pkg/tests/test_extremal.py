import math

import numpy as np
import pytest

from repp_lab.empirical import PointMeasure, build_repp2
from repp_lab.errors import DomainError
from repp_lab.extremal import (
    StepPath,
    extremal_path,
    h1_project,
    h2_project,
    h3_jumps,
    h_record_projection,
    record_counts,
    record_law_pmf,
    record_pp,
    record_times,
)
from repp_lab.limits import LimitLaw, Window, sample_ensemble
from repp_lab.observables import ObservableSpec, ThresholdScheme
from repp_lab.stats import chi_square_pmf

PM = PointMeasure.from_atoms([(1.0, 2.0), (2.0, 1.0)], horizon=3.0)


def test_h1_running_minimum():
    p = h1_project(PM)
    assert p(0.5) == math.inf
    assert p(1.0) == 2 and p(1.9) == 2
    assert p(2.0) == 1 and p(2.9) == 1
    assert p.is_nonincreasing()


def test_h1_ignores_stack_above():
    p = h1_project(PointMeasure.from_atoms([(1.0, 2.0), (1.0, 4.0)], horizon=3.0))
    assert p.breakpoints.tolist() == [1.0] and p.values.tolist() == [2.0]


def test_h2_first_passage():
    p = h2_project(PM)
    assert p(1.5) == 2  # only the atom at t=2 has mark below 1.5
    assert p(3.0) == 1
    assert p(0.5) == PM.horizon


def test_constant_marks_constant_path():
    p = extremal_path(np.full(50, 0.7), 10)
    assert set(p.values.tolist()) == {0.7}


def test_extremal_path_equals_h1_of_repp():
    rng = np.random.default_rng(0)
    n = 2000
    ts = ThresholdScheme(ObservableSpec("g1", (0,)), n)
    x = rng.random(n)
    vals = -np.log(np.minimum(x, 1 - x))
    pm = build_repp2(vals, ts, tau_max=1e9)
    z = extremal_path(2 * n * np.minimum(x, 1 - x), ts)
    assert z == h1_project(pm) or np.allclose(z.values, h1_project(pm).values, rtol=1e-12)


def test_record_examples():
    assert record_times([1, 2, 3]).times.tolist() == [0, 1, 2]
    assert record_times([3, 1, 2]).times.tolist() == [0]


def test_record_count_harmonic():
    rng = np.random.default_rng(1)
    m, M = 200, 20_000
    counts = np.array([len(record_times(rng.random(m))) for _ in range(M)])
    H = sum(1 / k for k in range(1, m + 1))
    assert abs(counts.mean() - H) <= 3 * counts.std(ddof=1) / math.sqrt(M)


def test_record_pp_single_record_mid_window():
    x = np.zeros(10)
    x[0] = 1.0
    x[5] = 5.0
    R, _ = record_pp(record_times(x), 10)
    assert R.times.tolist() == [0.0, 0.5]


def test_record_pmf():
    assert record_law_pmf(0.1, 1.0, 0) == pytest.approx(0.1)
    assert sum(record_law_pmf(0.1, 1.0, k) for k in range(201)) == pytest.approx(1.0, abs=1e-12)
    assert record_law_pmf(1 - 1e-12, 1.0, 0) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        record_law_pmf(1.0, 1.0, 0)


def test_h3_jumps():
    p = StepPath(np.array([0.3, 0.7]), np.array([2.0, 1.0]), horizon=1.0)
    assert h3_jumps(p).times.tolist() == [0.3, 0.7]


@pytest.mark.parametrize("n", [4, 10, 1000])
def test_h_discontinuity_sequence(n):
    pm = PointMeasure.from_atoms([(1 - 2 / n, 2.0), (1.0, 1.0)], horizon=2.0)
    assert h_record_projection(pm).times.tolist() == [1 - 2 / n, 1.0]


def test_h_at_stacked_limit():
    pm = PointMeasure.from_atoms([(1.0, 2.0), (1.0, 1.0)], horizon=2.0)
    assert h_record_projection(pm).times.tolist() == [1.0]


def test_h3_h1_equals_h_without_ties():
    rng = np.random.default_rng(2)
    pm = PointMeasure(rng.random(30), rng.random((30, 1)) * 5)
    assert np.array_equal(h3_jumps(h1_project(pm)).times, h_record_projection(pm).times)


# the mark cap must make an atom before t = a near certain (exp(-theta a cap) ~ 1e-7),
# otherwise the first atom after a is a spurious record
RECORD_WINDOW = Window(1.0, 300.0)


def test_stacked_records_log_poisson():
    ens = sample_ensemble(LimitLaw.stacked_geometric(2, 1), RECORD_WINDOW, 20_000, 3)
    c = record_counts(ens, 0.1, 1.0)
    assert chi_square_pmf(c, lambda k: record_law_pmf(0.1, 1.0, k), "logPoisson").passed


@pytest.fixture(scope="module")
def double_hat_counts():
    ens = sample_ensemble(LimitLaw.double_hat_n(), RECORD_WINDOW, 20_000, 4)
    return record_counts(ens, 0.1, 1.0)


def test_double_hat_records_log_poisson(double_hat_counts):
    # companions share their base's time, so h sees one record per stack
    assert chi_square_pmf(double_hat_counts, lambda k: record_law_pmf(0.1, 1.0, k), "logPoisson").passed


@pytest.mark.xfail(strict=True, reason="equal-time companions give one h-record; the excess exists only "
                                       "for the finite-n dynamics (acceptance criterion 11)")
def test_double_hat_records_exceed(double_hat_counts):
    c = double_hat_counts
    z = (c.mean() - math.log(10)) / (c.std(ddof=1) / math.sqrt(len(c)))
    assert z > 3
