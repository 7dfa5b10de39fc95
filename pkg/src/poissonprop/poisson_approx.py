"""Total-variation certificates for Poisson / Cox approximation of N|tau."""

from dataclasses import asdict, dataclass, replace
import math

import numpy as np
from scipy import stats

from .errors import ParameterError, TruncationRiskError
from .geometry import PointPattern2D, radial_count
from .propagation import far_field_sum_sq, point_probability, suggest_r_max, FarField
from .seeding import map_reps, rep_rng

TV_TRUNCATION_EPS = 1e-12


@dataclass(frozen=True)
class TVBoundReport:
    """Bounds on d_TV between N|tau and the Poisson process with the same mean.

    ``upper = min(1, sum_p_sq)``, ``lower = min(1, 1/sum_p) / 32 * sum_p_sq``.
    ``alt_upper`` is the looser ``sum_p * max_p``.  ``far_sum_p`` and
    ``far_sum_sq`` are the far-field shares already included in the sums.
    """

    tau: float
    sum_p: float
    sum_p_sq: float
    upper: float
    upper_unclipped: float
    lower: float
    max_p: float
    alt_upper: float
    side: str = "propagation"
    far_sum_p: float = 0.0
    far_sum_sq: float = 0.0

    def to_dict(self):
        return asdict(self)


def report_from_probabilities(p, tau, far_sum_p=0.0, far_sum_sq=0.0, far_max_p=0.0):
    p = np.asarray(p, dtype=float)
    sum_p = float(p.sum()) + far_sum_p
    sum_sq = float(np.dot(p, p)) + far_sum_sq
    max_p = max(float(p.max()) if p.size else 0.0, far_max_p)
    lower = (min(1.0, 1.0 / sum_p) if sum_p > 0 else 1.0) / 32.0 * sum_sq
    return TVBoundReport(
        tau=float(tau), sum_p=sum_p, sum_p_sq=sum_sq, upper=min(1.0, sum_sq),
        upper_unclipped=sum_sq, lower=lower, max_p=max_p, alt_upper=sum_p * max_p,
        far_sum_p=far_sum_p, far_sum_sq=far_sum_sq)


def _guard(pattern, pl, fading, tau):
    if pattern.growth is None:
        return
    p_edge = float(point_probability(pl, fading, pattern.r_max, tau))
    if p_edge > TV_TRUNCATION_EPS:
        suggestion = suggest_r_max(pl, fading, tau, TV_TRUNCATION_EPS)
        raise TruncationRiskError(
            f"points beyond r_max={pattern.r_max:g} have p(tau) up to {p_edge:.3g}; "
            f"use r_max >= {suggestion:.6g} or far-field completion", suggestion)


def tv_bounds(pattern, pl, fading, tau, far_field=False):
    """Bounds for a deterministic pattern at threshold ``tau``.

    A pattern with ``growth`` set stands for an infinite configuration cut at
    ``r_max``.  With ``far_field=True`` the part beyond ``r_max`` is included
    through its asymptotic intensity; otherwise ``r_max`` must be large enough
    that p(tau) at the edge is below 1e-12.  Patterns without ``growth`` are
    taken as the complete transmitter set.
    """
    if not tau > 0:
        raise ParameterError("tau must be positive")
    p = point_probability(pl, fading, pattern.radii, tau) if len(pattern) else np.zeros(0)
    if far_field and pattern.growth is not None:
        ff = FarField(pattern.growth, pl, fading, pattern.r_max, tau)
        fsq = far_field_sum_sq(pattern.growth, pl, fading, pattern.r_max, tau)
        edge = float(point_probability(pl, fading, pattern.r_max, tau))
        return report_from_probabilities(p, tau, ff.total, fsq, edge)
    _guard(pattern, pl, fading, tau)
    return report_from_probabilities(p, tau)


def power_side_bounds(report):
    """Relabel a report at threshold tau' for the power process on [1/tau', inf).

    Relabeling a power-side report maps it back.
    """
    if not (0 < report.tau < math.inf):
        raise ParameterError("power-side relabeling needs a finite positive threshold")
    side = "power" if report.side == "propagation" else "propagation"
    return replace(report, tau=1.0 / report.tau, side=side)


def count_law_tv(p, mean=None):
    """Exact d_TV between a sum of independent Bernoulli(p_i) and Poisson(mean).

    ``mean`` defaults to sum(p).  Poisson mass beyond the Bernoulli support is
    added in closed form.
    """
    p = np.asarray(p, dtype=float)
    pmf = np.array([1.0])
    for pi in p:
        nxt = np.zeros(pmf.size + 1)
        nxt[:-1] += pmf * (1 - pi)
        nxt[1:] += pmf * pi
        pmf = nxt
    lam = float(p.sum()) if mean is None else mean
    k = np.arange(pmf.size)
    pois = stats.poisson.pmf(k, lam)
    rest = stats.poisson.sf(k[-1], lam)
    return 0.5 * (np.abs(pmf - pois).sum() + rest)


def _pattern_source(sampler):
    if isinstance(sampler, PointPattern2D):
        return lambda rng: sampler
    return sampler


def cox_bound(sampler, pl, fading, tau, n_reps, seed, threads=1, far_field=False):
    """E[sum_{x in Xi} p^(x)(tau)^2] by Monte Carlo; returns ``(estimate, stderr)``.

    With ``far_field=True`` the points beyond each realization's ``r_max`` are
    accounted for through the first-moment density (``growth``), which is
    exact for the expectation whenever that density is constant out there.
    """
    if n_reps < 100:
        raise ParameterError("cox_bound needs n_reps >= 100")
    if not tau > 0:
        raise ParameterError("tau must be positive")
    source = _pattern_source(sampler)
    far_cache = {}

    def far_part(pattern):
        key = (pattern.r_max, pattern.growth)
        if key not in far_cache:
            far_cache[key] = far_field_sum_sq(pattern.growth, pl, fading, pattern.r_max, tau)
        return far_cache[key]

    def one(i, rng):
        pattern = source(rng)
        extra = 0.0
        if far_field and pattern.growth is not None:
            extra = far_part(pattern)
        else:
            _guard(pattern, pl, fading, tau)
        if not len(pattern):
            return extra
        p = np.asarray(point_probability(pl, fading, pattern.radii, tau), dtype=float)
        return float(np.dot(p, p)) + extra

    if isinstance(sampler, PointPattern2D):
        # a deterministic pattern has no sampling error
        return one(0, None), 0.0
    if far_field:
        # prime the cache outside the worker threads
        one(0, rep_rng(seed, 0, 11))
    vals = np.array(map_reps(one, n_reps, seed, stream=11, threads=threads))
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_reps))


@dataclass
class VarianceRatioCurve:
    r: np.ndarray
    ratio: np.ndarray
    stderr: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    n_reps: int


def _jackknife_ratio(x):
    """Var/mean^2 per column of ``x`` with leave-one-out standard errors."""
    n = x.shape[0]
    s1 = x.sum(axis=0)
    s2 = (x * x).sum(axis=0)
    mean = s1 / n
    var = (s2 - n * mean ** 2) / (n - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(mean > 0, var / mean ** 2, np.nan)
        m_i = (s1[None, :] - x) / (n - 1)
        v_i = (s2[None, :] - x * x - (n - 1) * m_i ** 2) / (n - 2)
        r_i = v_i / m_i ** 2
        r_bar = r_i.mean(axis=0)
        se = np.sqrt((n - 1) / n * ((r_i - r_bar) ** 2).sum(axis=0))
    return ratio, se, mean, var


def variance_ratio(sampler, r_grid, n_reps, seed, threads=1):
    """Empirical Var(|Xi|(r)) / E(|Xi|(r))^2 on ``r_grid``."""
    if n_reps < 1000:
        raise ParameterError("variance_ratio needs n_reps >= 1000")
    r_grid = np.asarray(r_grid, dtype=float)
    source = _pattern_source(sampler)

    def one(i, rng):
        return radial_count(source(rng), r_grid)

    counts = np.array(map_reps(one, n_reps, seed, stream=12, threads=threads), dtype=float)
    counts = counts.reshape(n_reps, r_grid.size)
    ratio, se, mean, var = _jackknife_ratio(counts)
    if np.all(var == 0):
        ratio = np.where(mean > 0, 0.0, ratio)
        se = np.zeros_like(se)
    return VarianceRatioCurve(r_grid, ratio, se, mean, var, n_reps)
