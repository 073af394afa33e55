"""One-sample Kolmogorov-Smirnov test against a fitted model CDF.

The null distribution of D_n is computed exactly with the Durbin matrix
method in the Marsaglia-Tsang-Wang formulation: write n*d = k - h with
integer k and 0 <= h < 1, build the (2k-1)x(2k-1) matrix H, and read
P(D_n <= d) = n!/n^n * (H^n)[k-1, k-1]. Powers are taken by repeated squaring
with the running product rescaled by 2^128 to stay inside double range.
Beyond a 2000x2000 matrix the Pelz-Good expansion is used instead.
"""

import logging
import math
from collections.abc import Callable

import numpy as np
from scipy import special, stats

from .errors import KsDomainError, ModelCdfError
from .models import ClmParams, FrftGrid, KsResult, ReturnSample, VgParams
from .variance_gamma import cdf_grid, density_grid, eval_at

logger = logging.getLogger(__name__)

MAX_DURBIN_DIM = 2000
MONOTONE_TOL = 1e-12

_E128 = 128
_EP128 = math.ldexp(1.0, _E128)
_EM128 = math.ldexp(1.0, -_E128)


def ks_statistic(sample: ReturnSample, cdf: Callable[[np.ndarray], np.ndarray]) -> KsResult:
    """Two-sided statistic d_n = max(d_plus, d_minus) over the sorted sample.

    d_plus = max_j |F(x_j) - F_n(x_j)| and d_minus = max_j |F(x_j) - F_n(x_j-)|,
    where F_n steps by multiplicity/n at each distinct point.

    Args:
        sample: Return sample
        cdf: Model CDF, vectorized over a numpy array

    Raises:
        ModelCdfError: If the CDF decreases or leaves [0, 1] on the sample range
    """
    n = len(sample)
    if n == 0:
        raise ValueError("sample is empty")
    points, counts = np.unique(sample.values, return_counts=True)
    model = np.asarray(cdf(points), dtype=float)

    if not np.all(np.isfinite(model)):
        raise ModelCdfError("model CDF is not finite on the sample range")
    drops = np.diff(model) < -MONOTONE_TOL
    if np.any(drops):
        at = float(points[np.flatnonzero(drops)[0] + 1])
        raise ModelCdfError("model CDF decreases on the sample range", observation=at)
    if model.min() < -MONOTONE_TOL or model.max() > 1 + MONOTONE_TOL:
        raise ModelCdfError(f"model CDF leaves [0, 1]: range [{model.min():.3e}, {model.max():.6f}]")

    after = np.cumsum(counts) / n
    before = after - counts / n
    d_plus = float(min(np.max(np.abs(model - after)), 1.0))
    d_minus = float(min(np.max(np.abs(model - before)), 1.0))
    return KsResult(d_plus=d_plus, d_minus=d_minus, d_n=max(d_plus, d_minus), n=n)


def _check_domain(n: int, d: float) -> None:
    if n < 1:
        raise KsDomainError(f"sample size must be at least 1, got {n}")
    if not (0.0 < d <= 1.0):
        raise KsDomainError(f"d must lie in (0, 1], got {d}", n=n)


def _durbin_cdf(n: int, d: float) -> float:
    """P(D_n <= d) by the Durbin matrix power; requires 2*ceil(n*d) - 1 <= MAX_DURBIN_DIM."""
    nd = n * d
    if nd <= 0.5:
        return 0.0
    k = math.ceil(nd)
    h = k - nd
    m = 2 * k - 1

    # First column v_j = (1 - h^j)/j!, last row its reverse, 1/(i-j+1)! below the diagonal band
    steps = np.arange(1, m + 1)
    factorials = np.exp(-special.gammaln(steps + 1))
    v = (1.0 - h**steps) * factorials
    v[-1] = (1.0 - 2 * h**m + max(2 * h - 1.0, 0.0) ** m) * factorials[-1]
    w = np.concatenate([[1.0], factorials[:-1]])

    H = np.zeros((m, m))
    for i in range(1, m):
        H[i - 1:, i] = w[: m - i + 1]
    H[:, 0] = v
    H[-1, :] = v[::-1]

    power = np.eye(m)
    expnt, h_expnt = 0, 0
    nn = n
    while nn > 0:
        if nn % 2:
            power = power @ H
            expnt += h_expnt
        H = H @ H
        h_expnt *= 2
        if abs(H[k - 1, k - 1]) > _EP128:
            H /= _EP128
            h_expnt += _E128
        nn //= 2

    p = power[k - 1, k - 1]
    for i in range(1, n + 1):
        p = i * p / n
        if abs(p) < _EM128:
            p *= _EP128
            expnt -= _E128
    return min(max(math.ldexp(p, expnt), 0.0), 1.0)


def kolmogorov_asymptotic_cdf(x: float) -> float:
    """Limiting law P(sqrt(n) D_n <= x) = 1 - 2 sum_k (-1)^(k-1) exp(-2 k^2 x^2)."""
    if x <= 0:
        return 0.0
    return float(1.0 - special.kolmogorov(x))


def pelz_good_cdf(n: int, d: float) -> float:
    """Pelz-Good expansion of P(D_n <= d) to order n^(-3/2)."""
    _check_domain(n, d)
    if d >= 1.0:
        return 1.0
    z = math.sqrt(n) * d
    z2 = z * z
    pi2 = math.pi**2
    qlog = -pi2 / 8 / z2
    if qlog < -708:
        return 0.0
    q = math.exp(qlog)

    k1a, k1b = -z2, pi2 / 4
    k2a = 6 * z2**3 + 2 * z2**2
    k2b = (2 * z2**2 - 5 * z2) * pi2 / 4
    k2c = pi2**2 * (1 - 2 * z2) / 16
    k3d = pi2**3 * (5 - 30 * z2) / 64
    k3c = pi2**2 * (-60 * z2 + 212 * z2**2) / 16
    k3b = pi2 * (135 * z2**2 - 96 * z2**3) / 4
    k3a = -30 * z2**3 - 90 * z2**4

    terms = np.zeros(4)
    maxk = math.ceil(16 * z / math.pi)
    for k in range(maxk, 0, -1):
        m2 = (2 * k - 1) ** 2
        coeffs = np.array([
            1.0,
            k1a + k1b * m2,
            k2a + k2b * m2 + k2c * m2**2,
            k3a + k3b * m2 + k3c * m2**2 + k3d * m2**3,
        ])
        terms = terms * q ** (8 * k) + coeffs
    terms *= q * math.sqrt(2 * math.pi)
    terms /= np.array([z, 6 * z2**2, 72 * z**7, 6480 * z**10])

    ks = np.arange(maxk, 0, -1, dtype=float)
    qk = math.exp(-pi2 / 2 / z2) ** (ks * ks)
    terms[2] += np.sum(ks * ks * qk) * pi2 * math.sqrt(2 * math.pi) / (-36 * z**3)
    sqrt3z = math.sqrt(3) * z
    terms[3] += (
        np.sum((sqrt3z + math.pi * ks) * (sqrt3z - math.pi * ks) * ks * ks * qk)
        * pi2 * math.sqrt(2 * math.pi) / (216 * z2**3)
    )
    terms /= float(n) ** (np.arange(4) / 2.0)
    return float(min(max(terms.sum(), 0.0), 1.0))


def ks_null_cdf(n: int, d: float) -> float:
    """Exact P(D_n <= d) under H0.

    Raises:
        KsDomainError: If n < 1 or d is outside (0, 1]
    """
    _check_domain(n, d)
    if d == 1.0:
        return 1.0
    if 2 * math.ceil(n * d) - 1 > MAX_DURBIN_DIM:
        logger.debug("n*d = %.1f beyond the Durbin matrix limit; using Pelz-Good", n * d)
        return pelz_good_cdf(n, d)
    return _durbin_cdf(n, d)


def ks_null_pdf(n: int, d_grid) -> np.ndarray:
    """Density of D_n on a grid by central differences of ks_null_cdf.

    One-sided differences are used at the two ends of the grid.

    Raises:
        ValueError: If the grid is not strictly increasing or has fewer than 3 points
        KsDomainError: If a grid point is outside (0, 1]
    """
    d = np.asarray(d_grid, dtype=float)
    if d.ndim != 1 or d.size < 3:
        raise ValueError("d grid must be one-dimensional with at least 3 points")
    if np.any(np.diff(d) <= 0):
        raise ValueError("d grid must be strictly increasing")
    cdf = np.array([ks_null_cdf(n, float(x)) for x in d])
    return np.gradient(cdf, d)


def p_value(n: int, d_n: float) -> float:
    """P(D_n > d_n | H0) = 1 - ks_null_cdf(n, d_n); d_n = 0 gives 1."""
    if d_n == 0.0 and n >= 1:
        return 1.0
    return max(0.0, 1.0 - ks_null_cdf(n, d_n))


def model_cdf(params: VgParams | ClmParams, grid: FrftGrid | None = None) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized CDF of a fitted model.

    VG CDFs are integrated from the FRFT density on ``grid`` (band-limited,
    as in the likelihood) and interpolated; CLM CDFs are Gaussian.
    """
    if isinstance(params, ClmParams):
        if params.sigma == 0.0:
            raise ModelCdfError("CLM fit is degenerate (sigma = 0)")
        return lambda y: stats.norm.cdf(y, loc=params.mu, scale=params.sigma)

    grid = grid or FrftGrid()
    dg = density_grid(params, grid, tail_tolerance=None)
    table = cdf_grid(dg)
    return lambda y: np.clip(eval_at(table, y, grid), 0.0, 1.0)


def ks_test(sample: ReturnSample, params: VgParams | ClmParams, grid: FrftGrid | None = None) -> KsResult:
    """KS statistic of the sample against the fitted model, with its p-value."""
    result = ks_statistic(sample, model_cdf(params, grid))
    p = p_value(result.n, result.d_n)
    logger.info("KS: d_n %.6f (d+ %.6f, d- %.6f), p-value %.6g", result.d_n, result.d_plus, result.d_minus, p)
    return result.model_copy(update={"p_value": p})
