"""Shared fixtures: heavy Monte Carlo runs reused across test modules."""

from __future__ import annotations

import time
from types import SimpleNamespace

import numpy as np
import pytest

from emspec import (Deformation, EnsembleShape, build_one_block, cwoe_sample,
                    derive_seed, empirical_moments, sample_gaussian,
                    split_spectrum, wishart)

ACCEPT_SEED = 12345
ONEBLOCK_SEED = 777


def woe_splits(n, t, q, realizations, master_seed):
    shape = EnsembleShape(n_series=n, horizon=t)
    deformation = Deformation(q)
    return [
        split_spectrum(wishart(sample_gaussian(shape, derive_seed(master_seed, i))),
                       deformation)
        for i in range(realizations)
    ]


def oneblock_splits(n, t, c, q, realizations, master_seed):
    shape = EnsembleShape(n_series=n, horizon=t)
    xi = build_one_block(n, c)
    deformation = Deformation(q)
    return [
        split_spectrum(cwoe_sample(xi, shape, derive_seed(master_seed, i)),
                       deformation)
        for i in range(realizations)
    ]


def _timed_run(builder):
    start = time.perf_counter()
    splits = builder()
    moments = empirical_moments(splits)
    return SimpleNamespace(splits=splits, moments=moments,
                           seconds=time.perf_counter() - start)


@pytest.fixture(scope="session")
def woe_256x128_run():
    """200 seeded WOE realizations at N=256, T=128, q=1.001."""
    return _timed_run(lambda: woe_splits(256, 128, 1.001, 200, ACCEPT_SEED))


@pytest.fixture(scope="session")
def woe_512x256_run():
    """200 seeded WOE realizations at N=512, T=256, q=1.001."""
    return _timed_run(lambda: woe_splits(512, 256, 1.001, 200, ACCEPT_SEED))


@pytest.fixture(scope="session")
def oneblock_1024_run():
    """50 seeded one-block realizations at N=1024, T=512, c=0.5, q=1.001."""
    return _timed_run(
        lambda: oneblock_splits(1024, 512, 0.5, 1.001, 50, ONEBLOCK_SEED))


@pytest.fixture(scope="session")
def mp_eigenvalues_kappa2():
    """Pooled eigenvalues of 50 WOE realizations at N=1024, T=2048."""
    shape = EnsembleShape(n_series=1024, horizon=2048)
    pools = []
    for i in range(50):
        sample = wishart(sample_gaussian(shape, derive_seed(ACCEPT_SEED, i)))
        pools.append(np.linalg.eigvalsh(sample.entries))
    return np.concatenate(pools)
