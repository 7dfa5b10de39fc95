import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from poissonprop import fading as F
from poissonprop import geometry as G
from poissonprop.errors import ParameterError, TruncationRiskError
from poissonprop.path_loss import PowerLaw
from poissonprop.propagation import (FarField, PropagationProcess, ThinningSampler, check_truncation,
                                     far_field_sum_sq, generate, invert_to_powers, invert_to_propagation,
                                     point_probability, restrict, simulate, suggest_r_max)

SQ = PowerLaw(1.0, 2.0)


def two_points():
    return G.PointPattern2D.from_radii([1.0, 2.0], 3.0)


def test_generate_examples():
    assert np.allclose(generate(two_points(), SQ, F.Deterministic(1.0), 0).values, [1.0, 4.0])
    assert np.allclose(generate(two_points(), SQ, F.Deterministic(2.0), 0).values, [0.5, 2.0])
    empty = G.PointPattern2D(np.zeros((0, 2)), 1.0)
    assert len(generate(empty, SQ, F.Exponential(1.0), 0)) == 0


def test_restrict_examples():
    N = PropagationProcess([1.0, 4.0])
    assert list(restrict(N, 2.0).values) == [1.0]
    assert list(restrict(N, 5.0).values) == [1.0, 4.0]
    assert len(restrict(PropagationProcess([]), 3.0)) == 0
    with pytest.raises(ParameterError):
        restrict(N, 0.0)


def test_inversion_examples():
    assert list(invert_to_powers(PropagationProcess([1.0, 4.0])).values) == [1.0, 0.25]
    assert list(invert_to_powers(PropagationProcess([0.5])).values) == [2.0]
    N = restrict(PropagationProcess([0.3, 1.0, 4.0]), 2.0)
    P = invert_to_powers(N)
    assert P.tau == 0.5
    back = invert_to_propagation(P)
    assert np.array_equal(back.values, N.values) and back.tau == N.tau


@given(st.lists(st.floats(1e-6, 1e6), max_size=30))
def test_duality_exact(vals):
    N = PropagationProcess(vals)
    P = invert_to_powers(N)
    for k in range(len(vals)):
        assert P.values[k] == 1.0 / N.values[k]
    assert np.array_equal(invert_to_propagation(P).values, 1.0 / (1.0 / N.values))


def test_point_probability_examples():
    assert point_probability(SQ, F.Exponential(1.0), 2.0, 4.0) == pytest.approx(math.exp(-1))
    assert point_probability(PowerLaw(1.0, 4.0), F.Lognormal(2.0, 4.0), 1.0, 1.0) == pytest.approx(0.308538, abs=1e-6)
    assert point_probability(SQ, F.Deterministic(1.0), 2.0, 1.0) == 0.0


@pytest.mark.parametrize("fading", [F.Exponential(1.0), F.Lognormal(2.0, 4.0), F.suzuki(1.0, 4.0)], ids=repr)
def test_count_law_per_point(fading):
    pat = G.PointPattern2D.from_radii([1.3], 2.0)
    t = 1.5
    rng = np.random.default_rng(0)
    hits = 0
    n = 100_000
    s = fading.sample(n, rng)
    hits = np.count_nonzero(SQ.evaluate(1.3) / s <= t)
    p = float(point_probability(SQ, fading, 1.3, t))
    assert abs(hits / n - p) <= 4 * math.sqrt(p * (1 - p) / n)


@given(st.floats(0.01, 10.0), st.floats(0.01, 10.0), st.integers(0, 2 ** 32))
def test_restrict_monotone_coupling(t1, t2, seed):
    lo, hi = min(t1, t2), max(t1, t2)
    pat = G.sample_poisson(1.0, 3.0, seed)
    N = generate(pat, SQ, F.Exponential(1.0), seed)
    assert set(restrict(N, lo).values) <= set(restrict(N, hi).values)


def test_suggest_r_max_passes_guard():
    pl, fad = PowerLaw(1.0, 4.0), F.Lognormal(4.0, 4.0)
    r = suggest_r_max(pl, fad, 1.0, 1e-6)
    check_truncation(pl, fad, 1.0, r, 1e-6)
    assert point_probability(pl, fad, r / 1.01, 1.0) > 1e-6
    with pytest.raises(TruncationRiskError) as err:
        check_truncation(pl, fad, 1.0, r / 2, 1e-6)
    assert err.value.suggested_r_max == pytest.approx(r)


@pytest.mark.parametrize("fading", [F.Exponential(1.0), F.Lognormal(3.0, 4.0)], ids=repr)
def test_thinning_sampler_matches_brute_force(fading):
    pl = PowerLaw(1.0, 4.0)
    pat = G.make_lattice("square", 1.0, 6.0)
    tau = 2.0
    sampler = ThinningSampler(pat.radii, pl, fading, tau)
    rng = np.random.default_rng(1)
    fast = [sampler.sample(rng) for _ in range(20_000)]
    rng = np.random.default_rng(2)
    slow = []
    g = pl.evaluate(pat.radii)
    for _ in range(20_000):
        y = g / fading.sample(len(pat), rng)
        slow.append(np.sort(y[y <= tau]))
    cf = np.array([len(v) for v in fast])
    cs = np.array([len(v) for v in slow])
    expected = float(np.sum(point_probability(pl, fading, pat.radii, tau)))
    assert abs(cf.mean() - expected) <= 4 * cf.std() / math.sqrt(cf.size)
    assert stats.ks_2samp(np.concatenate(fast), np.concatenate(slow)).pvalue > 0.001
    # count laws agree
    assert abs(cf.var() - cs.var()) <= 0.1 * cs.var() + 0.02


def test_simulate_thread_independent():
    pat = G.make_lattice("square", 1.0, 10.0)
    args = (PowerLaw(1.0, 4.0), F.Lognormal(2.0, 4.0), 1.0, 500, 9)
    a = simulate(pat, *args, far_field=pat.growth, threads=1)
    b = simulate(pat, *args, far_field=pat.growth, threads=4)
    assert all(np.array_equal(x, y) for x, y in zip(a.values, b.values))
    src = lambda rng: G.sample_poisson(1.0, 10.0, rng)
    a = simulate(src, *args, far_field=G.GrowthFunction("disk-area", 1.0), threads=1)
    b = simulate(src, *args, far_field=G.GrowthFunction("disk-area", 1.0), threads=3)
    assert all(np.array_equal(x, y) for x, y in zip(a.values, b.values))


def test_simulate_guards_truncation():
    pat = G.make_lattice("square", 1.0, 3.0)
    with pytest.raises(TruncationRiskError):
        simulate(pat, PowerLaw(1.0, 4.0), F.Lognormal(4.0, 4.0), 1.0, 10, 0)


def test_far_field_mean_for_poisson():
    # beyond r_max the far field is Poisson: its mean is the intensity-form integral over r > r_max
    pl, fad, lam, r0, tau = PowerLaw(1.0, 4.0), F.Exponential(1.0), 1.0, 1.5, 3.0
    ff = FarField(G.GrowthFunction("disk-area", lam), pl, fad, r0, tau)
    from scipy import integrate
    direct = integrate.quad(lambda r: 2 * math.pi * lam * r * math.exp(-r ** 4 / tau), r0, np.inf)[0]
    assert ff.total == pytest.approx(direct, rel=1e-8)
    sq = integrate.quad(lambda r: 2 * math.pi * lam * r * math.exp(-2 * r ** 4 / tau), r0, np.inf)[0]
    assert far_field_sum_sq(G.GrowthFunction("disk-area", lam), pl, fad, r0, tau) == pytest.approx(sq, rel=1e-8)
    rng = np.random.default_rng(0)
    draws = [ff.sample(rng) for _ in range(20_000)]
    counts = np.array([d.size for d in draws])
    assert abs(counts.mean() - direct) <= 4 * math.sqrt(direct / counts.size)
    pooled = np.concatenate(draws)
    u = np.array([ff.mean(t) for t in pooled[:3000]]) / ff.total
    assert stats.kstest(u, "uniform").pvalue > 0.001
    with pytest.raises(ParameterError):
        FarField(G.GrowthFunction("disk-area", lam), pl,
                 F.SharedFactor(F.Exponential(1.0), F.Lognormal(1.0)), r0, tau)


def test_far_field_completion_is_exact_for_poisson():
    # small disk + far field gives the same count law as a large disk
    pl, fad, tau = PowerLaw(1.0, 4.0), F.Exponential.unit_moment(4.0), 1.0
    g = G.GrowthFunction("disk-area", 1.0)
    a = simulate(lambda rng: G.sample_poisson(1.0, 1.0, rng), pl, fad, tau, 20_000, 1, far_field=g)
    b = simulate(lambda rng: G.sample_poisson(1.0, 4.0, rng), pl, fad, tau, 20_000, 2)
    ca, cb = a.counts(), b.counts()
    assert abs(ca.mean() - cb.mean()) <= 4 * math.sqrt(ca.var() / ca.size + cb.var() / cb.size)
    assert abs(ca.mean() - math.pi) <= 4 * ca.std() / math.sqrt(ca.size)
