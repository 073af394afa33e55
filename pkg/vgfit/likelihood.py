"""Log-likelihood, score and observed Hessian of a return sample under VG.

One density grid (with derivative grids) is built per parameter vector and
interpolated at every observation:

    l        = sum_i log f_i
    dl/dV_j  = sum_i f'_ij / f_i
    d2l/dV_k dV_j = sum_i (f''_ikj / f_i - (f'_ik / f_i) * (f'_ij / f_i))

Each sum is accumulated with math.fsum per chunk of observations and the
chunk totals are merged with math.fsum, so partitioning the sample moves the
result by at most a few units in the last place.
"""

import logging
import math
import warnings
from typing import NamedTuple

import numpy as np

from .errors import DiagnosticsError, TailDecayWarning
from .models import FrftGrid, ReturnSample, VgParams
from .variance_gamma import DENSITY_FLOOR, HESSIAN_PAIRS, density_grid, interpolator

logger = logging.getLogger(__name__)


class LikelihoodState(NamedTuple):
    """Log-likelihood and its derivatives at one parameter vector.

    Attributes:
        value: Log-likelihood (nats)
        score: Gradient in PARAM_NAMES order, or None for order 0
        hessian: Symmetric 5x5 second-derivative matrix, or None for order < 2
        params: Parameters the state was evaluated at
        grid_diagnostics: Tail magnitude and grid size of the density build
    """

    value: float
    score: np.ndarray | None
    hessian: np.ndarray | None
    params: VgParams
    grid_diagnostics: dict


def _compensated_sums(terms: np.ndarray, chunk_size: int | None) -> np.ndarray:
    """Row-wise compensated sums of a (rows, m) array, chunked along m."""
    m = terms.shape[-1]
    step = chunk_size or m or 1
    totals = []
    for row in terms:
        partials = [math.fsum(row[start:start + step]) for start in range(0, m, step)]
        totals.append(math.fsum(partials))
    return np.array(totals)


def _check_finite(terms: np.ndarray, what: str) -> None:
    bad = ~np.isfinite(terms)
    if np.any(bad):
        index = int(np.flatnonzero(bad.any(axis=0))[0])
        raise DiagnosticsError(f"non-finite {what} term", index=index)


def evaluate(
    sample: ReturnSample,
    params: VgParams,
    order: int = 2,
    grid: FrftGrid | None = None,
    chunk_size: int | None = None,
) -> LikelihoodState:
    """Evaluate the log-likelihood (and score/Hessian up to ``order``).

    Args:
        sample: Non-empty return sample
        params: VG parameters
        order: 0 value only, 1 adds the score, 2 adds the Hessian
        grid: FRFT grid for the density build (default a=20, n=2048)
        chunk_size: Observations per compensated partial sum (default: one chunk)

    Returns:
        LikelihoodState

    Raises:
        GridSupportError: If an observation lies outside the interpolation span
        DiagnosticsError: If a term is not finite (index of the observation given)
    """
    y = sample.values
    if y.size == 0:
        raise ValueError("sample is empty")
    grid = grid or FrftGrid()

    # The likelihood is defined on the band-limited density; the tail is
    # reported in grid_diagnostics instead of warned about on every call.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TailDecayWarning)
        dg = density_grid(params, grid, order=order, tail_tolerance=None)

    rows = [dg.f[None, :]]
    if order >= 1:
        rows.append(dg.df)
    if order == 2:
        rows.append(dg.d2f)
    values = interpolator(np.concatenate(rows), grid, y)(y)

    # Observations where the band-limited density rings to or below the floor
    # carry the floor's log value and no derivative terms.
    floored = values[0] <= DENSITY_FLOOR
    n_floored = int(np.sum(floored))
    if n_floored:
        logger.debug("%d observations at the density floor at %s", n_floored, params)
    f = np.where(floored, DENSITY_FLOOR, values[0])
    divisor = np.where(floored, 1.0, values[0])
    log_terms = np.log(f)[None, :]
    _check_finite(log_terms, "log-density")
    value = float(_compensated_sums(log_terms, chunk_size)[0])

    score = hessian = None
    if order >= 1:
        ratios = np.where(floored, 0.0, values[1:6] / divisor)
        _check_finite(ratios, "score")
        score = _compensated_sums(ratios, chunk_size)
    if order == 2:
        k_idx = [k for k, _ in HESSIAN_PAIRS]
        j_idx = [j for _, j in HESSIAN_PAIRS]
        terms = np.where(floored, 0.0, values[6:21] / divisor - ratios[k_idx] * ratios[j_idx])
        _check_finite(terms, "Hessian")
        packed = _compensated_sums(terms, chunk_size)
        hessian = np.zeros((5, 5))
        hessian[k_idx, j_idx] = packed
        hessian[j_idx, k_idx] = packed

    diagnostics = {"tail": dg.tail, "a": grid.a, "n": grid.n, "floored": n_floored}
    logger.debug("loglik %.6f at %s", value, params)
    return LikelihoodState(value, score, hessian, params, diagnostics)
