import numpy as np
from hypothesis import given, strategies as st

from poissonprop.seeding import map_reps, rep_rng


def draw(i, rng):
    return (i, float(rng.random()))


@given(st.integers(1, 300), st.integers(1, 8), st.integers(0, 2 ** 64 - 1))
def test_map_reps_independent_of_threads(n, threads, seed):
    assert map_reps(draw, n, seed, threads=1) == map_reps(draw, n, seed, threads=threads, chunk=7)


def test_streams_and_replications_differ():
    a = rep_rng(5, 0).random(4)
    assert not np.array_equal(a, rep_rng(5, 1).random(4))
    assert not np.array_equal(a, rep_rng(5, 0, stream=1).random(4))
    assert np.array_equal(a, rep_rng(5, 0).random(4))
