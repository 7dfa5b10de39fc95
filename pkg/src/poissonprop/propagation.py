"""Propagation processes N = {h(|x_i|) / S_i} and replicated simulation."""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import optimize

from .errors import ParameterError, TruncationRiskError
from .geometry import PointPattern2D
from .seeding import as_rng, map_reps


@dataclass
class PropagationProcess:
    """Sorted inverse powers, optionally restricted to (0, tau]."""

    values: np.ndarray
    tau: float = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.sort(np.asarray(self.values, dtype=float))

    def __len__(self):
        return len(self.values)

    def count(self, t):
        return int(np.searchsorted(self.values, t, side="right"))


@dataclass
class PowerProcess:
    """Received powers, sorted descending; ``tau`` is the lower power cutoff."""

    values: np.ndarray
    tau: float = None

    def __post_init__(self):
        self.values = -np.sort(-np.asarray(self.values, dtype=float))


def generate(pattern, pl, fading, seed=None):
    """One fading draw per point, in the pattern's (radius, angle) order."""
    rng = as_rng(seed)
    gains = pl.evaluate(pattern.radii) if len(pattern) else np.zeros(0)
    s = fading.sample(len(pattern), rng)
    prov = {"pattern": pattern.provenance, "path_loss": _describe(pl), "fading": _describe(fading)}
    if isinstance(seed, (int, np.integer)):
        prov["seed"] = int(seed)
    return PropagationProcess(gains / s, None, prov)


def _describe(obj):
    return obj.to_dict() if hasattr(obj, "to_dict") else repr(obj)


def restrict(N, tau):
    if not tau > 0:
        raise ParameterError("tau must be positive")
    keep = N.values[N.values <= tau]
    t = tau if N.tau is None else min(tau, N.tau)
    return PropagationProcess(keep, t, N.provenance)


def invert_to_powers(N):
    """Map each inverse power y to the power 1/y; (0, tau] maps to [1/tau, inf)."""
    lower = None if N.tau is None else 1.0 / N.tau
    return PowerProcess(1.0 / N.values, lower)


def invert_to_propagation(P):
    upper = None if P.tau is None else 1.0 / P.tau
    return PropagationProcess(1.0 / P.values, upper)


def point_probability(pl, fading, r, t):
    """p(t) = P(h(r) / S <= t) = P(S >= h(r) / t) for a point at distance r."""
    if np.any(np.asarray(t) <= 0):
        raise ParameterError("threshold t must be positive")
    return fading.tail(pl.evaluate(r) / t)


def suggest_r_max(pl, fading, tau, eps=1e-6):
    """Smallest radius (to 0.1%) with P(h(r)/S <= tau) below ``eps``."""
    def excess(log_r):
        return math.log(max(point_probability(pl, fading, math.exp(log_r), tau), 1e-320)) - math.log(eps)

    lo, hi = -20.0, 1.0
    while excess(hi) > 0:
        hi += 2.0
        if hi > 700:
            raise TruncationRiskError("reach probability does not decay; no finite r_max")
    if excess(lo) <= 0:
        return math.exp(lo)
    root = optimize.brentq(excess, lo, hi, xtol=1e-3)
    # step past the bracket tolerance so the suggestion passes the guard
    while excess(root) > 0:
        root += 1e-3
    return math.exp(root)


def check_truncation(pl, fading, tau, r_max, eps=1e-6):
    if point_probability(pl, fading, r_max, tau) > eps:
        suggestion = suggest_r_max(pl, fading, tau, eps)
        raise TruncationRiskError(
            f"points beyond r_max={r_max:g} reach threshold {tau:g} with probability "
            f"> {eps:g}; use r_max >= {suggestion:.6g}", suggestion)


# --------------------------------------------------------------------------
# far-field completion

class FarField:
    """Poisson completion of a pattern beyond ``r_max``.

    Transmitters outside the simulated disk are replaced by a Poisson process
    with the pattern's asymptotic intensity (``growth``).  By the mapping
    theorem their propagation values then form a Poisson process on (0, inf)
    with mean M_far(t) = E[(D(h^-1(S t)) - D(r_max))^+], which is tabulated on
    a log grid and inverted for sampling.  For a Poisson pattern this is exact.
    """

    def __init__(self, growth, pl, fading, r_max, tau, n_grid=400):
        if fading.shared:
            raise ParameterError("far-field completion needs independent fading draws")
        self.growth, self.pl, self.fading, self.r_max, self.tau = growth, pl, fading, r_max, tau
        self._d0 = growth(r_max)
        self._h0 = pl.evaluate(r_max)
        total = self.mean(tau)
        self.total = total
        if total <= 0:
            self.t_grid = np.array([tau])
            self.m_grid = np.array([0.0])
            return
        # extend the grid downward until the omitted mass is negligible
        span = 1.0
        while self.mean(tau * math.exp(-span)) > 1e-10 * total and span < 700:
            span *= 2
        self.t_grid = tau * np.exp(np.linspace(-span, 0.0, n_grid))
        self.m_grid = np.maximum.accumulate(np.array([self.mean(t) for t in self.t_grid]))

    def mean(self, t):
        """Far-field mean measure at t."""
        def integrand(s):
            r = self.pl.inverse(s * t)
            return max(self.growth(r) - self._d0, 0.0) if np.isfinite(r) else math.inf
        return self.fading.expect(integrand, points=[self._h0 / t])

    def mean_array(self, t):
        t = np.asarray(t, dtype=float)
        out = np.interp(t, self.t_grid, self.m_grid, left=0.0)
        return out

    def sample(self, rng):
        n = rng.poisson(self.total)
        u = rng.random(n) * self.total
        return np.sort(np.interp(u, self.m_grid, self.t_grid))


def far_field_sum_sq(growth, pl, fading, r_max, tau):
    """Integral of p(r)^2 dD(r) over r > r_max: far-field share of sum p_i^2."""
    from scipy import integrate

    dens = 2 * math.pi * growth.intensity

    def f(log_r):
        r = math.exp(log_r)
        p = float(fading.tail(pl.evaluate(r) / tau))
        return p * p * dens * r * r

    lo = math.log(r_max)
    hi = lo + 1.0
    while f(hi) > 1e-30 and hi < lo + 700:
        hi += 2.0
    return integrate.quad(f, lo, hi, limit=400, epsabs=1e-15, epsrel=1e-10)[0]


# --------------------------------------------------------------------------
# exact restricted sampler for a fixed pattern

class ThinningSampler:
    """Exact draw of N|tau for a fixed pattern, cost ~ expected count.

    Points sorted by reach probability p_j are grouped into blocks whose
    probabilities lie within a factor 2 of the block maximum.  Per block, a
    Binomial(n_b, pmax_b) number of distinct candidates is drawn, each kept
    with probability p_j / pmax_b; kept points receive a fading value drawn
    conditionally on S >= h(r_j) / tau.
    """

    def __init__(self, radii, pl, fading, tau):
        radii = np.asarray(radii, dtype=float)
        self.gain = pl.evaluate(radii) if radii.size else np.zeros(0)
        self.thr = self.gain / tau
        p = np.asarray(fading.tail(self.thr), dtype=float) if radii.size else np.zeros(0)
        order = np.argsort(-p, kind="stable")
        self.p = p[order]
        self.gain = self.gain[order]
        self.thr = self.thr[order]
        n_pos = int(np.count_nonzero(self.p > 0))
        self.p, self.gain, self.thr = self.p[:n_pos], self.gain[:n_pos], self.thr[:n_pos]
        starts = []
        i = 0
        while i < n_pos:
            starts.append(i)
            # first index with p < p[i] / 2  (p is descending)
            i = max(i + 1, int(np.searchsorted(-self.p, -self.p[i] / 2, side="right")))
        self.starts = np.array(starts, dtype=np.int64)
        self.sizes = np.diff(np.append(self.starts, n_pos))
        self.pmax = self.p[self.starts] if n_pos else np.zeros(0)
        self.fading = fading
        self.tau = tau

    def sample(self, rng):
        if not self.starts.size:
            return np.zeros(0)
        k = rng.binomial(self.sizes, self.pmax)
        picked = []
        for b in np.nonzero(k)[0]:
            idx = self.starts[b] + rng.choice(self.sizes[b], k[b], replace=False)
            idx = idx[rng.random(k[b]) * self.pmax[b] < self.p[idx]]
            picked.append(idx)
        if not picked:
            return np.zeros(0)
        idx = np.sort(np.concatenate(picked))
        s = self.fading.conditional_sample(self.thr[idx], rng)
        return np.sort(np.minimum(self.gain[idx] / s, self.tau))


# --------------------------------------------------------------------------
# replicated simulation

@dataclass
class ReplicationBatch:
    """Restricted propagation values for ``n_reps`` independent replications."""

    tau: float
    values: list
    provenance: dict = field(default_factory=dict)

    @property
    def n_reps(self):
        return len(self.values)

    def counts(self, t=None):
        t = self.tau if t is None else t
        return np.array([np.searchsorted(v, t, side="right") for v in self.values])

    def pooled(self):
        return np.concatenate(self.values) if self.values else np.zeros(0)


def simulate(source, pl, fading, tau, n_reps, seed, far_field=None, threads=1, stream=0):
    """Simulate ``N|tau`` over replications.

    ``source`` is a PointPattern2D (deterministic transmitters) or a callable
    ``rng -> PointPattern2D``.  ``far_field`` is a GrowthFunction used to
    complete each realization beyond its ``r_max`` with a Poisson far field;
    without it the disk truncation is guarded by ``check_truncation``.
    """
    if not tau > 0:
        raise ParameterError("tau must be positive")
    fixed = isinstance(source, PointPattern2D)
    r_max = source.r_max if fixed else None
    far = None
    if far_field is not None and fixed:
        far = FarField(far_field, pl, fading, r_max, tau)

    thinning = None
    if fixed and fading.conditional and not fading.shared:
        thinning = ThinningSampler(source.radii, pl, fading, tau)

    far_cache = {}

    def one(i, rng):
        if fixed:
            pattern = source
        else:
            pattern = source(rng)
        if thinning is not None:
            vals = thinning.sample(rng)
        else:
            n = len(pattern)
            s = fading.sample(n, rng)
            y = pl.evaluate(pattern.radii) / s if n else np.zeros(0)
            vals = np.sort(y[y <= tau])
        if far_field is not None:
            ff = far
            if ff is None:
                key = pattern.r_max
                ff = far_cache.get(key)
                if ff is None:
                    ff = far_cache[key] = FarField(far_field, pl, fading, pattern.r_max, tau)
            vals = np.sort(np.concatenate([vals, ff.sample(rng)]))
        return vals

    if far_field is None:
        check_truncation(pl, fading, tau, r_max if fixed else source(as_rng(0)).r_max)
    if far_field is not None and not fixed:
        # build once outside the worker threads
        probe = source(as_rng(0))
        far_cache[probe.r_max] = FarField(far_field, pl, fading, probe.r_max, tau)

    values = map_reps(one, n_reps, seed, stream=stream, threads=threads)
    prov = {"path_loss": _describe(pl), "fading": _describe(fading), "tau": tau,
            "n_reps": n_reps, "seed": int(seed), "far_field": far_field is not None}
    return ReplicationBatch(tau, values, prov)
