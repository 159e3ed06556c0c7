"""
Survival curves, mean reaction times and mesh-convergence diagnostics
for ensembles of first-reaction times.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _sps

__all__ = [
    "ReactionTimeSamples",
    "EcdfCurve",
    "ecdf",
    "mean_ci",
    "successive_diffs",
    "log_divergence_fit",
    "ks_two_sample",
]


@dataclass
class ReactionTimeSamples:
    """First-reaction times in replicate order.

    A censored replicate was stopped at the time cap before reacting; its
    entry in ``times`` is the cap.
    """

    times: np.ndarray
    censored: np.ndarray
    master_seed: int = 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.censored = np.asarray(self.censored, dtype=bool)
        if self.times.shape != self.censored.shape:
            raise ValueError("times and censored flags differ in length")

    def __len__(self):
        return len(self.times)

    @property
    def sorted_times(self) -> np.ndarray:
        return np.sort(self.times)

    @property
    def n_censored(self) -> int:
        return int(self.censored.sum())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["replicate", "time_s", "censored"])
            for r, (t, c) in enumerate(zip(self.times, self.censored)):
                w.writerow([r, f"{t:.16e}", int(c)])

    @classmethod
    def from_csv(cls, path, **kwargs) -> "ReactionTimeSamples":
        t, c = [], []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                t.append(float(row["time_s"]))
                c.append(row["censored"] == "1")
        return cls(np.array(t), np.array(c, dtype=bool), **kwargs)


def _split(samples, censored=None):
    if isinstance(samples, ReactionTimeSamples):
        return samples.times, samples.censored
    t = np.asarray(samples, dtype=float)
    c = np.zeros(t.shape, dtype=bool) if censored is None else np.asarray(censored, dtype=bool)
    return t, c


@dataclass(frozen=True)
class EcdfCurve:
    """Right-continuous step CDF with pointwise confidence bands.

    ``F[i]`` is the value on ``[t[i], t[i+1])``; the CDF is 0 before ``t[0]``.
    """

    t: np.ndarray
    F: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    n: int

    @property
    def survival(self) -> np.ndarray:
        return 1.0 - self.F

    def evaluate(self, x):
        idx = np.searchsorted(self.t, x, side="right") - 1
        vals = np.where(idx >= 0, self.F[np.clip(idx, 0, None)], 0.0)
        return vals if np.ndim(x) else float(vals)

    def integral_survival(self) -> float:
        """Exact integral of the step survival curve from 0 to the last step."""
        S = 1.0 - self.F
        return math.fsum([self.t[0]] + list(S[:-1] * np.diff(self.t)))

    def survival_rows(self):
        """Rows ``(t, S, S_lo, S_hi)`` for the survival CSV."""
        return zip(self.t, 1.0 - self.F, 1.0 - self.hi, 1.0 - self.lo)


def ecdf(samples, censored=None, level: float = 0.95, bands: str = "greenwood") -> EcdfCurve:
    """Kaplan-Meier CDF of reaction times with 95% pointwise bands.

    Without censoring this is the ordinary empirical CDF. ``bands`` is
    ``"greenwood"`` (pointwise normal bands from Greenwood's variance) or
    ``"dkw"`` (uniform Dvoretzky-Kiefer-Wolfowitz band).
    """
    t, c = _split(samples, censored)
    n = len(t)
    if n == 0 or c.all():
        raise ValueError("need at least one uncensored reaction time")
    order = np.argsort(t, kind="stable")
    t, c = t[order], c[order]
    events = np.unique(t[~c])
    # at risk at time s: everything with time >= s
    at_risk = n - np.searchsorted(t, events, side="left")
    deaths = np.bincount(np.searchsorted(events, t[~c]), minlength=len(events))
    S = np.cumprod(1.0 - deaths / at_risk)
    F = 1.0 - S
    z = _sps.norm.ppf(0.5 + 0.5 * level)
    if bands == "greenwood":
        alive = at_risk - deaths
        terms = np.where(alive > 0, deaths / (at_risk * np.maximum(alive, 1)), 0.0)
        se = S * np.sqrt(np.cumsum(terms))
        lo = np.clip(F - z * se, 0.0, 1.0)
        hi = np.clip(F + z * se, 0.0, 1.0)
    elif bands == "dkw":
        eps = math.sqrt(math.log(2.0 / (1.0 - level)) / (2.0 * n))
        lo = np.clip(F - eps, 0.0, 1.0)
        hi = np.clip(F + eps, 0.0, 1.0)
    else:
        raise ValueError(f"unknown band type {bands!r}")
    return EcdfCurve(events, F, lo, hi, n)


def mean_ci(samples, level: float = 0.95):
    """Sample mean and normal-approximation CI half-width."""
    t, c = _split(samples)
    if c.any():
        raise ValueError(f"{int(c.sum())} censored samples; the mean is undefined")
    if len(t) < 30:
        raise ValueError(f"need at least 30 samples for a normal CI, got {len(t)}")
    n = len(t)
    m = math.fsum(t) / n
    sd = math.sqrt(math.fsum((t - m) ** 2) / (n - 1))
    z = _sps.norm.ppf(0.5 + 0.5 * level)
    return m, float(z * sd / math.sqrt(n))


def successive_diffs(means):
    """``|mean(h) - mean(2h)|`` labeled by the finer ``h``.

    ``means`` is a sequence of ``(h, mean)`` with ``h`` halving each step.
    """
    means = list(means)
    for (h0, _), (h1, _) in zip(means, means[1:]):
        if not math.isclose(h0, 2.0 * h1, rel_tol=1e-9):
            raise ValueError(f"mesh widths must halve successively, got {h0} -> {h1}")
    return [(h1, abs(m1 - m0)) for (_, m0), (h1, m1) in zip(means, means[1:])]


def log_divergence_fit(means):
    """Least-squares line ``mean = intercept + slope * ln(1/h)``.

    Returns ``(slope, intercept, R^2)``.
    """
    means = list(means)
    if len(means) < 3:
        raise ValueError("need at least three points")
    x = np.log(1.0 / np.array([h for h, _ in means]))
    y = np.array([m for _, m in means])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (intercept + slope * x)
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2


def ks_two_sample(a, b):
    """Two-sided two-sample Kolmogorov-Smirnov statistic and asymptotic p-value."""
    ta, ca = _split(a)
    tb, cb = _split(b)
    if ca.any() or cb.any():
        raise ValueError("KS comparison needs uncensored samples")
    if len(ta) == 0 or len(tb) == 0:
        raise ValueError("empty sample")
    res = _sps.ks_2samp(ta, tb, method="asymp")
    return float(res.statistic), float(res.pvalue)
