"""Mean measures M(t) of propagation processes.

Evaluators, by route:

* ``exact_sum``: sum of per-point reach probabilities over a finite pattern
* ``closed_form_power_law``, ``closed_form_lambert``, ``multislope_mean``:
  intensity-form expectations for homogeneous transmitter intensity
* ``monte_carlo_mean``: E |xi|(h^-1(S t)) (or |Lambda|) by plain simulation
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy import interpolate

from .errors import DivergentMomentError, ParameterError, TruncationRiskError
from .geometry import GrowthFunction, PointPattern2D
from .path_loss import ExpPower, MultiSlope, PowerLaw, lambert_w
from .propagation import suggest_r_max
from .seeding import as_rng

TRUNCATION_EPS = 1e-6


@dataclass
class MeanMeasure:
    """A nondecreasing t -> M(t), vectorized over t."""

    evaluator: object
    kind: str = "closed-form"
    stderr: object = None

    def __call__(self, t):
        return self.evaluator(t)

    @classmethod
    def tabulated(cls, fn, t_lo, t_hi, n=1500, kind="tabulated"):
        """Monotone (PCHIP, log-log) interpolant of ``fn`` sampled on [t_lo, t_hi].

        Below ``t_lo`` the curve is extended by a power law through the first
        two nodes, so M(0+) = 0.
        """
        ts = np.geomspace(t_lo, t_hi, n)
        ms = np.maximum.accumulate(np.asarray(fn(ts), dtype=float))
        pos = ms > 0
        if not pos.any():
            return cls(lambda t: np.zeros_like(np.asarray(t, dtype=float)), kind)
        lt, lm = np.log(ts[pos]), np.log(ms[pos])
        spline = interpolate.PchipInterpolator(lt, lm, extrapolate=False)
        slope = (lm[1] - lm[0]) / (lt[1] - lt[0]) if lm.size > 1 else 1.0
        top = ms[-1]

        def ev(t):
            t = np.asarray(t, dtype=float)
            out = np.empty_like(t)
            with np.errstate(divide="ignore"):
                lt_q = np.log(t)
            lo = lt_q < lt[0]
            hi = lt_q > lt[-1]
            mid = ~(lo | hi)
            out[mid] = np.exp(spline(lt_q[mid]))
            out[lo] = np.exp(lm[0] + slope * (lt_q[lo] - lt[0]))
            out[hi] = top
            return float(out) if out.ndim == 0 else out

        return cls(ev, kind)


def _as_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ParameterError("t must be nonnegative")
    return t


def _ret(x, like):
    return float(x) if np.ndim(like) == 0 else np.asarray(x)


def exact_sum(pattern, pl, fading, t, chunk=2_000_000):
    """M(t) = sum_i P(h(r_i)/S <= t) over the pattern's points.

    Coincident radii are grouped, which collapses lattice shells.
    """
    tt = _as_t(t)
    if len(pattern) == 0:
        return _ret(np.zeros(tt.shape), t)
    radii, mult = np.unique(pattern.radii, return_counts=True)
    gain = pl.evaluate(radii)
    flat = tt.ravel()
    out = np.zeros(flat.size)
    step = max(1, chunk // radii.size)
    for a in range(0, flat.size, step):
        tc = flat[a:a + step]
        pos = tc > 0
        if not pos.any():
            continue
        probs = fading.tail(gain[None, :] / tc[pos, None])
        out[a:a + step][pos] = np.asarray(probs, dtype=float).reshape(-1, radii.size) @ mult
    return _ret(out.reshape(tt.shape), t)


def conditional_mean(pattern, pl, fading, t):
    """Directing measure M^Xi(t) of the Cox approximation for one realization."""
    return exact_sum(pattern, pl, fading, t)


def closed_form_power_law(lam, K, beta, fading, t):
    """lam * pi * t^(2/beta) * E[S^(2/beta)] / K^2."""
    if not (lam > 0 and K > 0 and beta > 0):
        raise ParameterError("lam, K, beta must be positive")
    moment = fading.fractional_moment(2.0 / beta)
    if not math.isfinite(moment):
        raise DivergentMomentError(
            f"E S^(2/beta) is infinite: the power-law propagation process has no finite mean measure")
    tt = _as_t(t)
    return _ret(lam * math.pi * tt ** (2.0 / beta) * moment / K ** 2, t)


def closed_form_lambert(lam, alpha, beta, fading, t, method="quad", n_samples=100_000, seed=None):
    """pi lam E[(tS)^(2/beta) exp(-2 W((alpha/beta)(tS)^(1/beta)))] for h(r) = r^beta e^(alpha r).

    ``method="quad"`` integrates against the fading law (stderr 0);
    ``method="mc"`` averages over ``n_samples`` fading draws.  Returns
    ``(value, stderr)``.
    """
    if not (lam > 0 and alpha >= 0 and beta > 0):
        raise ParameterError("lam, beta must be positive and alpha nonnegative")
    tt = _as_t(t)
    k = alpha / beta

    def integrand(x):
        if x <= 0:
            return 0.0
        root = x ** (1.0 / beta)
        w = lambert_w(k * root) if k > 0 else 0.0
        return root * root * math.exp(-2.0 * w)

    flat = tt.ravel()
    vals = np.zeros(flat.size)
    errs = np.zeros(flat.size)
    if method == "quad":
        for i, ti in enumerate(flat):
            if ti > 0:
                vals[i] = lam * math.pi * fading.expect(lambda s: integrand(ti * s))
    elif method == "mc":
        rng = as_rng(seed)
        s = fading.sample(n_samples, rng)
        for i, ti in enumerate(flat):
            if ti > 0:
                x = ti * s
                root = x ** (1.0 / beta)
                w = lambert_w(k * root) if k > 0 else 0.0
                f = lam * math.pi * root * root * np.exp(-2.0 * w)
                vals[i] = f.mean()
                errs[i] = f.std(ddof=1) / math.sqrt(n_samples)
    else:
        raise ParameterError(f"unknown method {method!r}")
    return _ret(vals.reshape(tt.shape), t), _ret(errs.reshape(tt.shape), t)


def multislope_mean(lam, model, fading, t):
    """lam * pi * E[h^-1(tS)^2] for a multi-slope path loss.

    Splits into sum_i c_i^2 t^(2/beta_i) E[1{s_{i-1} <= tS < s_i} S^(2/beta_i)]
    over all k+1 segments, with truncated moments from the fading law.
    """
    if not lam > 0:
        raise ParameterError("lam must be positive")
    tt = _as_t(t)
    edges = [0.0, *model.s, math.inf]
    flat = tt.ravel()
    out = np.zeros(flat.size)
    for j, ti in enumerate(flat):
        if ti <= 0:
            continue
        total = 0.0
        for i, (beta_i, c_i) in enumerate(zip(model.exponents, model.c)):
            q = 2.0 / beta_i
            part = fading.truncated_moment(q, edges[i] / ti, edges[i + 1] / ti)
            total += c_i * c_i * ti ** q * part
        out[j] = lam * math.pi * total
    return _ret(out.reshape(tt.shape), t)


def multislope_alt_normalization(lam, model, fading, t):
    """Variant 2 pi lam sum_{i<=k} c_i t^(2/beta_i) E[1{...} S^(2/beta_i)].

    Reported next to ``multislope_mean`` for comparison only: it drops the
    last segment, uses c_i instead of c_i^2, and doubles the prefactor, so it
    disagrees with the power-law case.
    """
    tt = _as_t(t)
    edges = [0.0, *model.s, math.inf]
    flat = tt.ravel()
    out = np.zeros(flat.size)
    k = len(model.breakpoints)
    for j, ti in enumerate(flat):
        if ti <= 0:
            continue
        total = 0.0
        for i in range(k):
            beta_i, c_i = model.exponents[i], model.c[i]
            q = 2.0 / beta_i
            total += c_i * ti ** q * fading.truncated_moment(q, edges[i] / ti, edges[i + 1] / ti)
        out[j] = 2 * lam * math.pi * total
    return _ret(out.reshape(tt.shape), t)


def monte_carlo_mean(source, pl, fading, t, n_samples=100_000, seed=None):
    """Estimate M(t) = E[count(h^-1(S t))] from ``n_samples`` fading draws.

    ``source`` is a finite pattern (count = radial_count) or a growth function
    (count = |Lambda|).  Returns ``(estimate, stderr)``.
    """
    if n_samples < 100:
        raise ParameterError("monte_carlo_mean needs n_samples >= 100")
    tt = _as_t(t)
    rng = as_rng(seed)
    s = fading.sample(n_samples, rng)
    flat = tt.ravel()
    est = np.zeros(flat.size)
    err = np.zeros(flat.size)
    for i, ti in enumerate(flat):
        if ti <= 0:
            continue
        r = pl.inverse(s * ti)
        if isinstance(source, PointPattern2D):
            risk = float(fading.tail(pl.evaluate(source.r_max) / ti))
            if risk > TRUNCATION_EPS:
                suggestion = suggest_r_max(pl, fading, ti, TRUNCATION_EPS)
                raise TruncationRiskError(
                    f"P(h^-1(S t) > r_max) = {risk:.3g} at t={ti:g}; use r_max >= {suggestion:.6g}",
                    suggestion)
            counts = np.searchsorted(source.radii, np.minimum(r, source.r_max), side="right")
        elif isinstance(source, GrowthFunction) or callable(source):
            counts = source(r)
        else:
            raise ParameterError("source must be a PointPattern2D or a growth function")
        counts = np.asarray(counts, dtype=float)
        est[i] = counts.mean()
        err[i] = counts.std(ddof=1) / math.sqrt(n_samples)
    return _ret(est.reshape(tt.shape), t), _ret(err.reshape(tt.shape), t)


def intensity_form(lam, pl, fading):
    """Best available intensity-form evaluator for a homogeneous intensity ``lam``."""
    if isinstance(pl, PowerLaw):
        return MeanMeasure(lambda t: closed_form_power_law(lam, pl.K, pl.beta, fading, t))
    if isinstance(pl, MultiSlope):
        return MeanMeasure(lambda t: multislope_mean(lam, pl, fading, t))
    if isinstance(pl, ExpPower):
        return MeanMeasure(lambda t: closed_form_lambert(lam, pl.alpha, pl.beta, fading, t)[0])
    growth = GrowthFunction("disk-area", lam)
    return MeanMeasure(
        lambda t: np.vectorize(lambda ti: fading.expect(lambda s: growth(pl.inverse(s * ti))) if ti > 0 else 0.0)(t),
        kind="quadrature")
