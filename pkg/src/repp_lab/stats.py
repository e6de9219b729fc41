"""Goodness-of-fit reports: chi-square, KS, binomial void checks."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.stats as sps

from .errors import DataError, UnderpoweredError

LEVEL = 0.01


def _clean(x):
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return None if math.isnan(x) else x
    if isinstance(x, np.integer):
        return int(x)
    return x


@dataclass(frozen=True)
class GofReport:
    test: str
    statistic: float
    dof: int | None
    p_value: float
    n: int
    reference: str
    level: float = LEVEL
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 <= self.p_value <= 1.0):
            raise DataError(f"p-value {self.p_value} outside [0, 1]")

    @property
    def passed(self) -> bool:
        return self.p_value > self.level

    @property
    def decision(self) -> str:
        return "pass" if self.passed else "reject"

    def with_level(self, level: float) -> "GofReport":
        return GofReport(self.test, self.statistic, self.dof, self.p_value, self.n, self.reference, level,
                         self.details)

    def to_dict(self):
        d = {k: _clean(v) for k, v in asdict(self).items() if k != "details"}
        d["details"] = {k: _clean(v) for k, v in self.details.items()}
        d["decision"] = self.decision
        return d

    @classmethod
    def from_dict(cls, d):
        st = d["statistic"]
        return cls(d["test"], math.nan if st is None else st, d["dof"], d["p_value"], d["n"],
                   d["reference"], d["level"], dict(d.get("details", {})))


def merge_bins(expected: np.ndarray, min_expected: float = 5.0):
    """Group consecutive cells so every group expects at least ``min_expected``.

    The last input cell is the open upper tail. Returns a list of index
    arrays.
    """
    groups, cur, acc = [], [], 0.0
    for k, e in enumerate(expected):
        cur.append(k)
        acc += e
        if acc >= min_expected:
            groups.append(cur)
            cur, acc = [], 0.0
    if cur:
        if groups:
            groups[-1].extend(cur)
        else:
            groups.append(cur)
    return [np.array(g) for g in groups]


def chi_square_pmf(sample, pmf, reference: str, kmin: int = 0, min_expected: float = 5.0,
                   level: float = LEVEL, test: str = "chi2") -> GofReport:
    """Chi-square of integer observations against ``pmf(k)`` on ``k >= kmin``."""
    x = np.asarray(sample)
    if x.size == 0:
        raise UnderpoweredError("no observations")
    if np.any(x != np.round(x)) or np.any(x < kmin):
        raise DataError(f"observations must be integers >= {kmin}")
    x = x.astype(np.int64)
    N = len(x)
    kmax = int(x.max())
    probs = []
    k = kmin
    cum = 0.0
    while k <= kmax or (N * (1 - cum) >= min_expected and k < kmin + 10_000):
        p = float(pmf(k))
        probs.append(p)
        cum += p
        k += 1
    probs = np.array(probs)
    probs[-1] += max(0.0, 1.0 - probs.sum())
    obs = np.bincount(x - kmin, minlength=len(probs))[: len(probs)].astype(float)
    obs[-1] += np.sum(x - kmin >= len(probs))
    exp_ = N * probs
    if np.count_nonzero(probs > 1e-300) <= 1:
        ok = bool(np.all(obs[probs <= 1e-300] == 0))
        return GofReport(test, 0.0 if ok else math.inf, 0, 1.0 if ok else 0.0, N, reference, level,
                         {"degenerate": True})
    groups = merge_bins(exp_, min_expected)
    if len(groups) < 2:
        raise UnderpoweredError(f"only {N} observations: fewer than two cells reach expected count {min_expected}")
    O = np.array([obs[g].sum() for g in groups])
    E = np.array([exp_[g].sum() for g in groups])
    stat = float(np.sum((O - E) ** 2 / E))
    dof = len(groups) - 1
    p = float(sps.chi2.sf(stat, dof))
    return GofReport(test, stat, dof, p, N, reference, level, {"cells": len(groups)})


def chi_square_poisson(sample, mean: float | None = None, pmf=None, level: float = LEVEL,
                       reference: str | None = None) -> GofReport:
    """Counts against Poisson(mean) or any supplied pmf on ``k >= 0``."""
    if pmf is None:
        if mean is None or mean < 0:
            raise DataError("supply a nonnegative mean or a pmf")
        pmf = (lambda k: 1.0 if k == 0 else 0.0) if mean == 0 else (lambda k: float(sps.poisson.pmf(k, mean)))
        reference = reference or f"Poisson({mean:.6g})"
    return chi_square_pmf(sample, pmf, reference or "pmf", 0, level=level, test="chi2_counts")


def geometric_fit(sizes, theta: float, level: float = LEVEL) -> GofReport:
    """Cluster sizes against ``theta (1-theta)^(k-1)``, ``k >= 1``."""
    theta = float(theta)
    if not (0 < theta <= 1):
        raise DataError("theta must lie in (0, 1]")

    def pmf(k):
        return theta * (1 - theta) ** (k - 1) if k >= 1 else 0.0

    return chi_square_pmf(sizes, pmf, f"Geometric({theta:.6g})", 1, level=level, test="chi2_geometric")


def ks_exponential(gaps, rate: float, level: float = LEVEL) -> GofReport:
    g = np.asarray(gaps, dtype=float)
    if np.any(g <= 0):
        raise DataError("gaps must be positive")
    if len(g) < 100:
        raise UnderpoweredError(f"{len(g)} gaps; at least 100 required")
    res = sps.kstest(g, "expon", args=(0, 1 / float(rate)), method="asymp")
    return GofReport("ks_exponential", float(res.statistic), None, float(res.pvalue), len(g),
                     f"Exp({float(rate):.6g})", level)


def compare_void(k: int, n: int, analytic: float, level: float = LEVEL) -> GofReport:
    """Two-sided test of an observed void count ``k / n`` against ``analytic``.

    Normal approximation with the null variance; exact binomial when the
    null is degenerate or expected counts are small.
    """
    if n <= 0:
        raise UnderpoweredError("no runs")
    p0 = float(analytic)
    if not (0 <= p0 <= 1):
        raise DataError("analytic probability outside [0, 1]")
    phat = k / n
    det = {"p_hat": phat, "k": int(k), "p0": p0}
    if p0 in (0.0, 1.0):
        ok = (k == 0) if p0 == 0 else (k == n)
        return GofReport("void_exact", phat - p0, None, 1.0 if ok else 0.0, n, f"void={p0:.6g}", level, det)
    if min(n * p0, n * (1 - p0)) < 10:
        p = float(sps.binomtest(int(k), int(n), p0).pvalue)
        return GofReport("void_binomial", phat - p0, None, min(p, 1.0), n, f"void={p0:.6g}", level, det)
    z = (phat - p0) / math.sqrt(p0 * (1 - p0) / n)
    det["z"] = z
    return GofReport("void_z", z, None, float(2 * sps.norm.sf(abs(z))), n, f"void={p0:.6g}", level, det)


def z_check(estimate: float, reference: float, se: float, n: int, name: str, level: float = LEVEL) -> GofReport:
    """Two-sided normal test of ``(estimate - reference) / se``."""
    if not se > 0:
        ok = estimate == reference
        return GofReport(name, 0.0 if ok else math.inf, None, 1.0 if ok else 0.0, n, f"{reference:.6g}", level)
    z = (estimate - reference) / se
    return GofReport(name, z, None, float(2 * sps.norm.sf(abs(z))), n, f"{reference:.6g}", level,
                     {"estimate": estimate, "se": se})


def bonferroni(reports, level: float = LEVEL):
    """Re-level a family of reports at ``level / len(reports)``."""
    reports = list(reports)
    m = max(len(reports), 1)
    return [r.with_level(level / m) for r in reports]


def bonferroni_z(level: float, m: int) -> float:
    """Two-sided normal critical value at ``level / m``."""
    return float(sps.norm.isf(level / (2 * m)))
