"""Does a batch of propagation realizations look Poisson with mean M?

Three complementary checks, each at a third of the overall level:

* dispersion index of the counts N(tau) (chi-square interval)
* KS test of the pooled time-rescaled points against U(0, 1]
* TV distance between the empirical count law and Poisson(M(tau)), against
  its simulated null quantile
"""

from dataclasses import asdict, dataclass
from functools import lru_cache
import math

import numpy as np
from scipy import stats

from .errors import DegenerateMeasureError, InsufficientDataError, ParameterError
from .seeding import as_rng

VERDICTS = ("poisson-consistent", "overdispersed", "underdispersed", "non-poisson")


def time_rescale(N, M):
    """Map each point t of N|tau to M(t) / M(tau)."""
    if N.tau is None:
        raise ParameterError("time_rescale needs a restricted process")
    return rescale_values(N.values, M, N.tau)


def rescale_values(values, M, tau):
    m_tau = float(M(tau))
    if not m_tau > 0:
        raise DegenerateMeasureError("M(tau) = 0: nothing to rescale against")
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return np.zeros(0)
    return np.clip(np.asarray(M(values), dtype=float) / m_tau, 0.0, 1.0)


def ks_uniform(u):
    """Two-sided KS test of ``u`` against U(0, 1); returns ``(D, p_value)``.

    Exact finite-n distribution for n < 35, asymptotic Kolmogorov law above.
    """
    u = np.sort(np.asarray(u, dtype=float))
    n = u.size
    if n == 0:
        raise InsufficientDataError("KS test needs at least one point")
    i = np.arange(1, n + 1)
    d = max(np.max(i / n - u), np.max(u - (i - 1) / n))
    d = float(min(max(d, 0.0), 1.0))
    if n < 35:
        p = float(stats.kstwo.sf(d, n))
    else:
        p = float(stats.kstwobign.sf(d * math.sqrt(n)))
    return d, min(max(p, 0.0), 1.0)


def dispersion(counts, level=0.01):
    """Variance-to-mean ratio with a ``1 - level`` interval.

    Uses (n-1) D / theta ~ chi2(n-1), the Poisson dispersion-test law.
    """
    x = np.asarray(counts, dtype=float)
    n = x.size
    if n < 2:
        raise InsufficientDataError("dispersion needs at least two counts")
    mean = x.mean()
    if mean == 0:
        raise DegenerateMeasureError("all counts are zero")
    index = float(x.var(ddof=1) / mean)
    lo_q, hi_q = stats.chi2.ppf([level / 2, 1 - level / 2], n - 1)
    return index, ((n - 1) * index / hi_q, (n - 1) * index / lo_q)


@lru_cache(maxsize=64)
def _poisson_table(m_tau):
    hi = int(stats.poisson.isf(1e-13, m_tau)) + 1
    return stats.poisson.pmf(np.arange(hi + 1), m_tau)


def _tv_to_poisson(x, m_tau, pois):
    top = max(pois.size - 1, int(x.max()) if x.size else 0)
    emp = np.bincount(x, minlength=top + 1) / max(x.size, 1)
    if top >= pois.size:
        pois = stats.poisson.pmf(np.arange(top + 1), m_tau)
    rest = float(stats.poisson.sf(top, m_tau))
    return float(0.5 * (np.abs(emp - pois).sum() + rest))


def count_fit(counts, m_tau):
    """d_TV between the empirical pmf of ``counts`` and Poisson(m_tau)."""
    if not m_tau > 0:
        raise ParameterError("m_tau must be positive")
    x = np.asarray(counts, dtype=np.int64)
    return _tv_to_poisson(x, m_tau, _poisson_table(float(m_tau)))


@lru_cache(maxsize=256)
def count_tv_null_quantile(n_reps, m_tau, q, n_cal=400, seed=0):
    """``q``-quantile of count_fit under exact Poisson(m_tau) counts of size n_reps."""
    rng = as_rng(np.random.SeedSequence([int(seed) & ((1 << 64) - 1), 7919]))
    pois = _poisson_table(float(m_tau))
    tvs = np.array([_tv_to_poisson(rng.poisson(m_tau, n_reps), m_tau, pois) for _ in range(n_cal)])
    return float(np.quantile(tvs, q))


@dataclass
class GoFReport:
    n_reps: int
    tau: float
    expected_count: float
    mean_count: float
    mean_count_stderr: float
    dispersion_index: float
    dispersion_ci: tuple
    n_points: int
    ks_statistic: float
    ks_pvalue: float
    count_tv: float
    count_tv_threshold: float
    level: float
    verdict: str

    def to_dict(self):
        d = asdict(self)
        d["dispersion_ci"] = list(self.dispersion_ci)
        return d


def goodness_of_fit(batch, M, level=0.01, seed=0, n_cal=400):
    """Assess a ReplicationBatch against the Poisson process with mean ``M``.

    Rescaled points are pooled over replications (conditionally on counts they
    are i.i.d. uniform under the null).
    """
    tau = batch.tau
    counts = batch.counts()
    n = counts.size
    a = level / 3
    m_tau = float(M(tau))
    index, ci = dispersion(counts, a)
    pooled = rescale_values(batch.pooled(), M, tau)
    if pooled.size:
        ks_d, ks_p = ks_uniform(pooled)
    else:
        ks_d, ks_p = float("nan"), float("nan")
    tv = count_fit(counts, m_tau)
    tv_thr = count_tv_null_quantile(int(n), m_tau, 1 - a, n_cal=n_cal, seed=seed)
    if ci[0] > 1:
        verdict = "overdispersed"
    elif ci[1] < 1:
        verdict = "underdispersed"
    elif (pooled.size and ks_p <= a) or tv > tv_thr:
        verdict = "non-poisson"
    else:
        verdict = "poisson-consistent"
    return GoFReport(
        n_reps=int(n), tau=float(tau), expected_count=m_tau,
        mean_count=float(counts.mean()), mean_count_stderr=float(counts.std(ddof=1) / math.sqrt(n)),
        dispersion_index=index, dispersion_ci=(float(ci[0]), float(ci[1])),
        n_points=int(pooled.size), ks_statistic=ks_d, ks_pvalue=ks_p,
        count_tv=tv, count_tv_threshold=tv_thr, level=level, verdict=verdict)
