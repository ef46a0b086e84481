"""The compiled kernels and the numpy fallback must agree draw for draw."""
import os
import subprocess
import sys

import numpy as np
import pytest

from iidcast import _pykernels as py
from iidcast.rng import bit_generator, generator, trial_bit_generators
from iidcast.schemes import poisson_arrivals

cy = pytest.importorskip("iidcast._kernels")


def both(fn_name, seed, *args):
    a = getattr(cy, fn_name)(bit_generator(seed, 0), *args)
    b = getattr(py, fn_name)(bit_generator(seed, 0), *args)
    return a, b


def test_bounded_matches_reference_formula():
    raw = np.random.default_rng(0).integers(0, 2 ** 64, size=1000, dtype=np.uint64)
    for m in (1, 2, 3, 7, 1000, 2 ** 40 + 1):
        want = np.array([min(int(int(x >> 11) * 2.0 ** -53 * m), m - 1) for x in raw.tolist()])
        assert np.array_equal(py.bounded(raw, m), want)
    # the largest draw maps to m - 1, never m
    assert py.bounded(np.array([2 ** 64 - 1], dtype=np.uint64), 3)[0] == 2


@pytest.mark.parametrize("n,cells", [(2, 2), (7, 3), (30, 900), (40, 6)])
def test_flood_times_identical(n, cells):
    a = cy.flood_times(trial_bit_generators(5, 0, 200), n, cells, 10_000)
    b = py.flood_times(trial_bit_generators(5, 0, 200), n, cells, 10_000)
    assert np.array_equal(a, b)


def test_flood_times_timeouts_identical():
    a = cy.flood_times(trial_bit_generators(1, 0, 50), 20, 400, 5)
    b = py.flood_times(trial_bit_generators(1, 0, 50), 20, 400, 5)
    assert np.array_equal(a, b) and (a == -1).any()


def test_trajectories_identical():
    for seed in range(5):
        (sa, ta), (sb, tb) = both("flood_trajectory", seed, 25, 60, 10_000)
        assert sa == sb and np.array_equal(ta, tb)


@pytest.mark.parametrize("n,cells,u,rho", [(6, 6, 5, 0.6), (10, 30, 12, 1.05), (4, 1, 1, 0.8)])
def test_fcfs_identical(n, cells, u, rho):
    horizon = 20_000
    gen = generator(2, 1)
    arrival = poisson_arrivals(rho / u, horizon, gen)
    source = gen.integers(0, n, size=arrival.size, dtype=np.int64)
    a, b = both("fcfs_run", 3, n, cells, u, horizon, arrival, source, 7)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


@pytest.mark.parametrize("n,cells", [(5, 5), (8, 3), (12, 144)])
def test_single_hop_identical(n, cells):
    horizon, warmup = 3000, 500
    gen = generator(4, 1)
    arrival_slot = np.floor(poisson_arrivals(n * 0.02, horizon, gen)).astype(np.int64)
    source = gen.integers(0, n, size=arrival_slot.size, dtype=np.int64)
    order = np.argsort(source, kind="stable").astype(np.int64)
    offsets = np.concatenate(([0], np.cumsum(np.bincount(source, minlength=n)))).astype(np.int64)
    a, b = both("single_hop_run", 6, n, cells, horizon, warmup, arrival_slot, source,
                offsets, order, 0, 1, 10)
    assert a[0] == b[0]
    for x, y in zip(a[1:], b[1:]):
        assert np.array_equal(x, y)


def test_generator_state_advances_identically():
    bg_a, bg_b = bit_generator(9, 1), bit_generator(9, 1)
    cy.flood_times([bg_a], 15, 20, 1000)
    py.flood_times([bg_b], 15, 20, 1000)
    assert bg_a.random_raw() == bg_b.random_raw()


def test_env_var_selects_fallback():
    code = "import iidcast; print(iidcast.BACKEND)"
    env = dict(os.environ, IIDCAST_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"
    env.pop("IIDCAST_PURE_PYTHON")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "cython"
