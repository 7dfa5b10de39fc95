"""Experiment drivers behind the command-line subcommands.

Each ``run_*`` function takes an ExperimentConfig, writes its artifacts under
``cfg.output_dir`` and returns the list of written paths.  Nothing written
depends on the thread count.
"""

import math
from pathlib import Path

import numpy as np
from scipy import integrate
from scipy.spatial.distance import pdist

from . import io
from .diagnostics import goodness_of_fit
from .errors import ConfigError, ParameterError
from .geometry import GinibreParams, GrowthFunction, LATTICE_KINDS, pattern_sampler
from .mean_measure import (MeanMeasure, closed_form_lambert, exact_sum, intensity_form,
                           monte_carlo_mean, multislope_alt_normalization)
from .path_loss import ExpPower, MultiSlope, PowerLaw
from .poisson_approx import cox_bound, power_side_bounds, tv_bounds, variance_ratio
from .propagation import FarField, generate, restrict, simulate
from .seeding import map_reps, rep_rng

FIXED_KINDS = (*LATTICE_KINDS, "points")


def _meta(cfg, command, **extra):
    # where the files go is not part of the experiment's identity
    params = {k: v for k, v in cfg.raw.items() if k != "output_dir"}
    return {"config_sha256": io.config_hash(params), "command": command, **extra}


def _suffix(cfg, sigma):
    if len(cfg.sigmas) == 1 or sigma is None:
        return ""
    return f"_sigma={sigma!r}"


def _out(cfg, name):
    return Path(cfg.output_dir) / name


def _mean_intensity(spec):
    kind = spec["kind"]
    if kind == "poisson":
        return spec["lambda"]
    if kind == "cox-mixture":
        return 0.5 * (spec["lambda1"] + spec["lambda2"])
    if kind == "ginibre":
        return GinibreParams(spec["alpha"], spec.get("c", 1.0)).intensity
    if kind in LATTICE_KINDS:
        return None
    return None


def _tabulate(fn, tau, floor=1e-9):
    """Tabulate M on [t_lo, tau], pushing t_lo down until M(t_lo) <= floor * M(tau)."""
    top = float(np.asarray(fn(np.array([tau])))[0])
    t_lo = tau * 1e-3
    while top > 0 and float(np.asarray(fn(np.array([t_lo])))[0]) > floor * top and t_lo > tau * 1e-60:
        t_lo *= 1e-3
    return MeanMeasure.tabulated(fn, t_lo, tau)


def mean_measure_for(cfg, pl, fading, tau, source=None, far=None):
    """Mean measure used to rescale simulated points for one σ."""
    spec = cfg.pattern
    if spec["kind"] in FIXED_KINDS:
        pattern = source(None)

        def fn(t):
            m = exact_sum(pattern, pl, fading, t)
            return m + far.mean_array(t) if far is not None else m
        return _tabulate(fn, tau)
    lam = _mean_intensity(spec)
    M = intensity_form(lam, pl, fading)
    if isinstance(pl, PowerLaw):
        return M
    return _tabulate(M, tau)


# --------------------------------------------------------------------------
# sample

def run_sample(cfg, threads=1):
    pl = cfg.build_path_loss()
    sampler, _ = pattern_sampler(cfg.pattern, cfg.r_max)
    pattern = sampler(rep_rng(cfg.seed, 0, stream=1))
    written = [io.write_pattern(_out(cfg, "pattern.csv"), pattern, _meta(cfg, "sample"))]
    for k, sigma in enumerate(cfg.sigmas):
        fading = cfg.fading_for(sigma)
        N = restrict(generate(pattern, pl, fading, rep_rng(cfg.seed, k, stream=2)), cfg.tau)
        name = f"propagation{_suffix(cfg, sigma)}.csv"
        written.append(io.write_propagation(_out(cfg, name), N, _meta(cfg, "sample", sigma=sigma)))
    return written


# --------------------------------------------------------------------------
# mean-measure

def _t_grid(cfg):
    if cfg.t_grid:
        return np.array(sorted(cfg.t_grid), dtype=float)
    return np.geomspace(cfg.tau / 100, cfg.tau, 25)


def mean_measure_table(cfg, pl, fading):
    """All applicable evaluators on the t grid: ``(t, primary, stderr, columns)``."""
    t = _t_grid(cfg)
    spec = cfg.pattern
    cols = {}
    primary = None
    stderr = np.zeros_like(t)
    sampler, growth = pattern_sampler(spec, cfg.r_max)
    if spec["kind"] in FIXED_KINDS:
        pattern = sampler(None)
        near = exact_sum(pattern, pl, fading, t)
        cols["exact_sum"] = near
        primary = near
        if growth is not None and cfg.far_field:
            far = FarField(growth, pl, fading, cfg.r_max, float(t.max()))
            primary = near + far.mean_array(t)
            cols["exact_sum_far_field"] = primary
    lam = _mean_intensity(spec)
    if lam is None and growth is not None:
        lam = growth.intensity
    if lam is not None:
        if isinstance(pl, PowerLaw):
            cols["closed_form_power_law"] = intensity_form(lam, pl, fading)(t)
        elif isinstance(pl, MultiSlope):
            cols["multislope"] = intensity_form(lam, pl, fading)(t)
            cols["multislope_alt_normalization"] = multislope_alt_normalization(lam, pl, fading, t)
        elif isinstance(pl, ExpPower):
            cols["closed_form_lambert"] = closed_form_lambert(lam, pl.alpha, pl.beta, fading, t)[0]
        else:
            cols["intensity_quadrature"] = intensity_form(lam, pl, fading)(t)
        est, se = monte_carlo_mean(GrowthFunction("disk-area", lam), pl, fading, t,
                                   n_samples=cfg.mc_samples, seed=rep_rng(cfg.seed, 0, stream=3))
        cols["monte_carlo"] = est
        cols["monte_carlo_stderr"] = se
        if primary is None:
            closed = [k for k in cols if not k.startswith("monte_carlo")
                      and k != "multislope_alt_normalization"]
            primary = cols[closed[0]]
    if primary is None:
        raise ParameterError(f"no mean-measure evaluator for pattern kind {spec['kind']!r}")
    return t, primary, stderr, cols


def run_mean_measure(cfg, threads=1):
    pl = cfg.build_path_loss()
    written = []
    for sigma in cfg.sigmas:
        fading = cfg.fading_for(sigma)
        t, M, se, cols = mean_measure_table(cfg, pl, fading)
        sfx = _suffix(cfg, sigma)
        meta = _meta(cfg, "mean-measure", sigma=sigma)
        written.append(io.write_csv(_out(cfg, f"mean_measure{sfx}.csv"), ["t", "M", "stderr"],
                                    zip(t, M, se), meta))
        names = list(cols)
        written.append(io.write_csv(_out(cfg, f"mean_measure_evaluators{sfx}.csv"), ["t", *names],
                                    ([ti, *(cols[n][i] for n in names)] for i, ti in enumerate(t)),
                                    meta))
    return written


# --------------------------------------------------------------------------
# tv-bound

def tv_report(cfg, pl, fading, threads=1):
    spec = cfg.pattern
    sampler, growth = pattern_sampler(spec, cfg.r_max)
    if spec["kind"] in FIXED_KINDS:
        rep = tv_bounds(sampler(None), pl, fading, cfg.tau, far_field=cfg.far_field)
        out = rep.to_dict()
        out["power_side"] = power_side_bounds(rep).to_dict()
        out["target"] = "poisson"
        return out
    use_far = cfg.far_field and growth is not None and not fading.shared
    est, se = cox_bound(sampler, pl, fading, cfg.tau, max(cfg.n_reps, 100), cfg.seed, threads,
                        far_field=use_far)
    return {"tau": cfg.tau, "target": "cox", "upper": min(1.0, est), "upper_unclipped": est,
            "upper_stderr": se, "lower": float("nan")}


def run_tv_bound(cfg, threads=1):
    pl = cfg.build_path_loss()
    reports = []
    for sigma in cfg.sigmas:
        reports.append({"sigma": sigma, **tv_report(cfg, pl, cfg.fading_for(sigma), threads)})
    return [io.write_json(_out(cfg, "tv_bounds.json"), {"reports": reports}, _meta(cfg, "tv-bound"))]


# --------------------------------------------------------------------------
# converge / diagnose

def simulate_config(cfg, pl, fading, stream=0, threads=1):
    """Simulate N|tau for the configured pattern; returns ``(batch, M)``."""
    spec = cfg.pattern
    sampler, growth = pattern_sampler(spec, cfg.r_max)
    use_far = cfg.far_field and growth is not None and not fading.shared
    fixed = spec["kind"] in FIXED_KINDS
    source = sampler(None) if fixed else sampler
    batch = simulate(source, pl, fading, cfg.tau, cfg.n_reps, cfg.seed,
                     far_field=growth if use_far else None, threads=threads, stream=stream)
    far = FarField(growth, pl, fading, cfg.r_max, cfg.tau) if (use_far and fixed) else None
    M = mean_measure_for(cfg, pl, fading, cfg.tau, sampler, far)
    return batch, M


def run_converge(cfg, threads=1):
    pl = cfg.build_path_loss()
    bounds, gofs, rows = [], [], []
    for k, sigma in enumerate(cfg.sigmas):
        fading = cfg.fading_for(sigma)
        rep = tv_report(cfg, pl, fading, threads)
        batch, M = simulate_config(cfg, pl, fading, stream=k, threads=threads)
        gof = goodness_of_fit(batch, M, level=cfg.level, seed=cfg.seed).to_dict()
        bounds.append({"sigma": sigma, **rep})
        gofs.append({"sigma": sigma, **gof})
        rows.append([sigma, rep["upper"], rep["lower"], gof["dispersion_index"], gof["ks_pvalue"],
                     gof["count_tv"]])
    meta = _meta(cfg, "converge")
    return [
        io.write_json(_out(cfg, "tv_bounds.json"), {"reports": bounds}, meta),
        io.write_json(_out(cfg, "gof.json"), {"results": gofs}, meta),
        io.write_csv(_out(cfg, "summary.csv"), ["sigma", "upper", "lower", "dispersion", "ks_p", "count_tv"],
                     rows, meta),
    ]


def run_diagnose(cfg, threads=1):
    if not cfg.data:
        raise ConfigError("diagnose needs a data file (rep,y CSV)", "data")
    pl = cfg.build_path_loss()
    sigma = cfg.sigmas[0]
    fading = cfg.fading_for(sigma)
    batch = io.read_batch(cfg.data, cfg.tau)
    sampler, growth = pattern_sampler(cfg.pattern, cfg.r_max)
    far = None
    if cfg.far_field and growth is not None and cfg.pattern["kind"] in FIXED_KINDS:
        far = FarField(growth, pl, fading, cfg.r_max, cfg.tau)
    M = mean_measure_for(cfg, pl, fading, cfg.tau, sampler, far)
    gof = goodness_of_fit(batch, M, level=cfg.level, seed=cfg.seed)
    return [io.write_json(_out(cfg, "gof.json"), {"results": [{"sigma": sigma, **gof.to_dict()}]},
                          _meta(cfg, "diagnose", data=str(cfg.data)))]


# --------------------------------------------------------------------------
# ginibre-check

def disk_set_covariance(R, v):
    """Area of the intersection of two radius-R disks at centre distance v."""
    v = np.minimum(np.asarray(v, dtype=float), 2 * R)
    return 2 * R * R * np.arccos(v / (2 * R)) - v / 2 * np.sqrt(4 * R * R - v * v)


def ginibre_count_variance(params, R):
    """Exact Var|Xi|(R) for the alpha-Ginibre process."""
    rho = params.intensity
    k = params.c / params.alpha
    integral = integrate.quad(lambda v: disk_set_covariance(R, v) * math.exp(-k * v * v) * 2 * math.pi * v,
                              0, 2 * R, limit=200)[0]
    return rho * math.pi * R * R - rho * rho * integral


def pair_correlation_bins(params, R, u, du):
    """Expected ordered-pair count normalizer and bin-averaged g for |x-y| in [u-du, u+du)."""
    rho = params.intensity
    lo, hi = max(u - du, 0.0), u + du
    w = lambda v: disk_set_covariance(R, v) * 2 * math.pi * v
    base = integrate.quad(w, lo, hi)[0]
    model = integrate.quad(lambda v: w(v) * float(params.pair_correlation(v)), lo, hi)[0] / base
    return rho * rho * base, model


def ginibre_statistics(params, R, u_grid, n_reps, seed, method="eigen", du=0.05, threads=1):
    """Per-realization counts in the disk and ordered-pair counts in distance bins."""
    sampler, _ = pattern_sampler({"kind": "ginibre", "alpha": params.alpha, "c": params.c,
                                  "method": method}, R)
    u_grid = np.asarray(u_grid, dtype=float)

    def one(i, rng):
        pat = sampler(rng)
        d = pdist(pat.points) if len(pat) > 1 else np.zeros(0)
        pairs = [2 * np.count_nonzero((d >= max(u - du, 0)) & (d < u + du)) for u in u_grid]
        return [len(pat), *pairs]

    rows = np.array(map_reps(one, n_reps, seed, stream=21, threads=threads), dtype=float)
    return rows[:, 0], rows[:, 1:]


def ginibre_check_table(cfg, threads=1, du=0.05):
    spec = cfg.pattern
    if spec["kind"] != "ginibre":
        raise ConfigError("ginibre-check needs a ginibre pattern", "pattern.kind")
    params = GinibreParams(spec["alpha"], spec.get("c", 1.0))
    R = cfg.r_max
    u_grid = cfg.u_grid or [0.2, 0.5, 1.0]
    counts, pairs = ginibre_statistics(params, R, u_grid, cfg.n_reps, cfg.seed,
                                       spec.get("method", "eigen"), du, threads)
    n = counts.size
    mean = counts.mean()
    var = counts.var(ddof=1)
    m4 = np.mean((counts - mean) ** 4)
    var_se = math.sqrt(max(m4 - var * var * (n - 3) / (n - 1), 0.0) / n)
    rows = [["mean_count", R, mean, counts.std(ddof=1) / math.sqrt(n), params.intensity * math.pi * R * R],
            ["var_count", R, var, var_se, ginibre_count_variance(params, R)],
            ["poisson_var_bound", R, var, var_se, params.intensity * math.pi * R * R]]
    for j, u in enumerate(u_grid):
        norm, model = pair_correlation_bins(params, R, u, du)
        g = pairs[:, j] / norm
        rows.append(["pair_correlation", u, g.mean(), g.std(ddof=1) / math.sqrt(n), model])
    return rows


def run_ginibre_check(cfg, threads=1):
    rows = ginibre_check_table(cfg, threads)
    return [io.write_csv(_out(cfg, "ginibre_check.csv"), ["quantity", "x", "empirical", "stderr", "theory"],
                         rows, _meta(cfg, "ginibre-check"))]


# --------------------------------------------------------------------------
# cox-compare

DEFAULT_COMPARE = (
    {"kind": "poisson", "lambda": 1.0},
    {"kind": "cox-mixture", "lambda1": 1.0, "lambda2": 3.0},
    {"kind": "ginibre", "alpha": 0.5, "c": 1.0},
    {"kind": "square", "s": 1.0},
)


def variance_ratio_theory(spec, r):
    """Var|Xi|(r) / E|Xi|(r)^2 where known in closed form, else nan."""
    r = np.asarray(r, dtype=float)
    area = math.pi * r * r
    kind = spec["kind"]
    if kind == "poisson":
        return 1.0 / (spec["lambda"] * area)
    if kind == "cox-mixture":
        l1, l2 = spec["lambda1"], spec["lambda2"]
        m = 0.5 * (l1 + l2)
        v = 0.25 * (l1 - l2) ** 2
        return (m * area + v * area * area) / (m * area) ** 2
    if kind == "ginibre":
        params = GinibreParams(spec["alpha"], spec.get("c", 1.0))
        return np.array([ginibre_count_variance(params, ri) / (params.intensity * math.pi * ri * ri) ** 2
                         for ri in np.atleast_1d(r)])
    return np.full(np.shape(r), np.nan)


def _label(spec, i):
    return f"{i}-{spec['kind']}"


def run_cox_compare(cfg, threads=1):
    specs = cfg.compare or [dict(s) for s in DEFAULT_COMPARE]
    r_grid = np.array(cfg.r_grid or np.linspace(cfg.r_max / 10, cfg.r_max, 10), dtype=float)
    written, rows = [], []
    meta = _meta(cfg, "cox-compare")
    for i, spec in enumerate(specs):
        sampler, _ = pattern_sampler(spec, cfg.r_max)
        curve = variance_ratio(sampler, r_grid, cfg.n_reps, cfg.seed + i, threads)
        theory = np.broadcast_to(variance_ratio_theory(spec, r_grid), r_grid.shape)
        label = _label(spec, i)
        written.append(io.write_csv(_out(cfg, f"variance_ratio_{label}.csv"), ["r", "ratio", "stderr"],
                                    zip(r_grid, curve.ratio, curve.stderr), {**meta, "pattern": spec}))
        rows.extend([label, *vals] for vals in zip(r_grid, curve.ratio, curve.stderr, theory))
    written.append(io.write_csv(_out(cfg, "cox_compare.csv"), ["pattern", "r", "ratio", "stderr", "theory"],
                                rows, meta))
    return written


COMMANDS = {
    "sample": run_sample,
    "mean-measure": run_mean_measure,
    "tv-bound": run_tv_bound,
    "converge": run_converge,
    "diagnose": run_diagnose,
    "ginibre-check": run_ginibre_check,
    "cox-compare": run_cox_compare,
}
