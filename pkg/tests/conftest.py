import functools

import numpy as np
import pytest

from eqdisco.grid_data import PROBLEMS, generate_manufactured


@functools.lru_cache(maxsize=None)
def bundle_for(problem: str, solution: str | None = None):
    return generate_manufactured(problem, PROBLEMS[problem].default_grid(), solution)


def truth_residual(bundle) -> np.ndarray:
    """Pointwise sum of coefficient * term over the ground truth."""
    gt = bundle.ground_truth
    return sum(c * bundle.product(sig.split("*")) for sig, c in gt.terms.items())


@pytest.fixture
def burgers():
    return bundle_for("burgers_inviscid")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
