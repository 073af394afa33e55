"""Shared fixtures for vgfit tests.

This module contains pytest configuration and reusable test fixtures
that are available to all test modules in the vgfit test suite.

Includes Hypothesis composite strategies for generating parameter vectors.
"""

from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

from vgfit.config import load_config
from vgfit.data import filter_outliers, load_prices, log_returns
from vgfit.models import FrftGrid, ReturnSample, VgParams
from vgfit.variance_gamma import sample

FIXTURES_DIR = Path(__file__).parent / "fixtures"
CONFIGS_DIR = Path(__file__).parent.parent / "configs"

# User-supplied SPY 2010-01-04..2020-12-30 adjusted closes; tests needing it skip when absent.
SPY_FILE = FIXTURES_DIR / "spy_2010_2020.csv"

requires_spy = pytest.mark.skipif(not SPY_FILE.exists(), reason="SPY price file not supplied")


# Shared fixtures for vgfit tests


@pytest.fixture
def default_grid() -> FrftGrid:
    """Default grid a=20, n=2048 with gamma = beta."""
    return FrftGrid()


@pytest.fixture
def wide_grid() -> FrftGrid:
    """Grid whose support makes truncation negligible for moderate parameters."""
    return FrftGrid.from_support(a=1024.0, n=16384, gamma=0.005)


@pytest.fixture
def laplace_params() -> VgParams:
    """delta=0, sigma=alpha=theta=1: a Laplace law with density (sqrt(2)/2) exp(-sqrt(2)|y|)."""
    return VgParams.default()


@pytest.fixture
def skewed_params() -> VgParams:
    return VgParams(mu=0.05, delta=-0.3, sigma=0.8, alpha=1.5, theta=0.8)


@pytest.fixture
def vg_sample(skewed_params) -> ReturnSample:
    """2000 draws from skewed_params with a fixed seed."""
    return ReturnSample(values=sample(skewed_params, 2000, seed=11), source_meta="simulated")


@pytest.fixture
def prices_csv(tmp_path) -> Path:
    """Five well-formed price rows."""
    path = tmp_path / "prices.csv"
    path.write_text(
        "date,adjusted_close\n"
        "2020-01-02,100.0\n"
        "2020-01-03,101.0\n"
        "2020-01-06,99.5\n"
        "2020-01-07,100.25\n"
        "2020-01-08,102.0\n"
    )
    return path


@pytest.fixture(scope="module")
def spy_sample() -> ReturnSample:
    """SPY percent log returns with the 13 largest moves removed (configs/spy.yaml)."""
    if not SPY_FILE.exists():
        pytest.skip("SPY price file not supplied")
    config = load_config(CONFIGS_DIR / "spy.yaml")
    return filter_outliers(log_returns(load_prices(SPY_FILE), config.scale), config.outlier_rule)


# Hypothesis composite strategies for property-based testing


@st.composite
def vg_params(draw, min_alpha=0.5, max_alpha=3.0):
    """Generate a VG parameter vector in the range used by the numerical tests.

    Args:
        draw: Hypothesis draw function
        min_alpha: Smallest gamma shape
        max_alpha: Largest gamma shape

    Returns:
        VgParams
    """
    return VgParams(
        mu=draw(st.floats(min_value=-0.5, max_value=0.5)),
        delta=draw(st.floats(min_value=-0.5, max_value=0.5)),
        sigma=draw(st.floats(min_value=0.5, max_value=1.5)),
        alpha=draw(st.floats(min_value=min_alpha, max_value=max_alpha)),
        theta=draw(st.floats(min_value=0.5, max_value=1.5)),
    )


def random_params(rng: np.random.Generator, count: int) -> list[VgParams]:
    """Deterministic parameter points for numerical grids of tests."""
    return [
        VgParams(
            mu=rng.uniform(-0.5, 0.5),
            delta=rng.uniform(-0.5, 0.5),
            sigma=rng.uniform(0.5, 1.5),
            alpha=rng.uniform(0.5, 3.0),
            theta=rng.uniform(0.5, 1.5),
        )
        for _ in range(count)
    ]
