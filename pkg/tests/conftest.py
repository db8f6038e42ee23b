"""Shared fixtures. BLAS threading is pinned before numpy loads so results
are reproducible and the small matrices here avoid thread-contention slowdown."""

import os

os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("MKL_NUM_THREADS", "1")

import pytest

from gridseer import build_default_grid


@pytest.fixture(scope="session")
def default_grid():
    return build_default_grid()


@pytest.fixture(scope="session")
def tiny_fault_dataset(default_grid):
    """Two runs per case: 368 traces; enough for structural checks."""
    from gridseer.faultsim import gen_fault_dataset
    return gen_fault_dataset(default_grid, runs_per_case=2, seed=7)
