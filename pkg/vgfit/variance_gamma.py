"""Variance-Gamma distribution: characteristic function, derivatives and densities.

Y = mu + delta*V + sigma*sqrt(V)*Z with Z ~ N(0, 1) and V ~ Gamma(alpha, scale=theta).
The characteristic function (with the e^{-ixy} convention)

    F(t) = exp(-i*mu*t) / D(t)^alpha,   D(t) = 1 + theta*sigma^2*t^2/2 + i*delta*theta*t

has Re D(t) >= 1 for real t, so D^-alpha = exp(-alpha * Log D) on the principal
branch never crosses the cut. Densities and their parameter derivatives are
obtained by FRFT inversion of F and of its analytic derivatives; they are the
exact derivatives of the density band-limited to the grid's support [-a/2, a/2].
"""

import logging
import math
import warnings
from typing import NamedTuple

import numpy as np
from scipy import integrate, stats
from scipy.interpolate import CubicSpline
from scipy.special import gammaln

from .errors import GridSupportError, TailDecayWarning
from .frft import TAIL_WARN, invert_cf, tail_magnitude
from .models import PARAM_NAMES, FrftGrid, VgParams

logger = logging.getLogger(__name__)

# Upper-triangle (k <= j) pairs in row-major order; index into d2f / cf_hessian.
HESSIAN_PAIRS = tuple((k, j) for k in range(5) for j in range(k, 5))

DENSITY_FLOOR = 1e-300
TAIL_ERROR = 1e-6

_MU, _DELTA, _SIGMA, _ALPHA, _THETA = range(5)


class DensityGrid(NamedTuple):
    """Tabulated density and parameter derivatives on an FRFT output grid.

    Attributes:
        grid: Grid the values live on
        x: Output nodes x_k
        f: Density values
        df: (5, n) array of df/dV_j in PARAM_NAMES order, or None (order 0)
        d2f: (15, n) array of d2f/dV_k dV_j for HESSIAN_PAIRS, or None (order < 2)
        tail: max |cf| at the edge of the input grid
    """

    grid: FrftGrid
    x: np.ndarray
    f: np.ndarray
    df: np.ndarray | None = None
    d2f: np.ndarray | None = None
    tail: float = 0.0

    @property
    def order(self) -> int:
        if self.d2f is not None:
            return 2
        return 1 if self.df is not None else 0

    def mass(self) -> float:
        return float(integrate.trapezoid(self.f, self.x))

    def check(self, negative_tol: float = 1e-8, mass_tol: float = 1e-5) -> None:
        """Assert the tabulated density is a density.

        Raises:
            GridSupportError: If f dips below -negative_tol, the mass is not
                within mass_tol of 1, or a derivative does not integrate to 0
        """
        lowest = float(self.f.min())
        if lowest < -negative_tol:
            raise GridSupportError(f"density ringing reaches {lowest:.3e}", tail=f"{self.tail:.3e}")
        mass = self.mass()
        if abs(mass - 1.0) > mass_tol:
            raise GridSupportError(f"density integrates to {mass:.8f}, not 1", a=self.grid.a)
        if self.df is not None:
            masses = integrate.trapezoid(self.df, self.x, axis=-1)
            worst = int(np.argmax(np.abs(masses)))
            if abs(masses[worst]) > mass_tol:
                raise GridSupportError(
                    f"df/d{PARAM_NAMES[worst]} integrates to {masses[worst]:.3e}, not 0"
                )


def _denominator(params: VgParams, t: np.ndarray) -> np.ndarray:
    return 1.0 + 0.5 * params.theta * params.sigma**2 * t * t + 1j * params.delta * params.theta * t


def cf(params: VgParams, t):
    """Characteristic function exp(-i*mu*t) * D(t)^-alpha (principal branch)."""
    t_arr = np.asarray(t, dtype=float)
    d = _denominator(params, t_arr)
    value = np.exp(-1j * params.mu * t_arr - params.alpha * np.log(d))
    return value[()] if value.ndim == 0 else value


def _log_derivatives(params: VgParams, t: np.ndarray):
    """First and second derivatives of log F with respect to V.

    Returns (F, dL, d2L) where dL has shape (5, ...) and d2L (5, 5, ...).
    With L = -i*mu*t - alpha*log D:  L_x = -alpha*D_x/D for x in (delta, sigma, theta),
    L_alpha = -log D,  L_xy = -alpha*(D_xy/D - D_x*D_y/D^2),  L_alpha,x = -D_x/D.
    """
    mu, delta, sigma, alpha, theta = params.as_vector()
    d = _denominator(params, t)
    log_d = np.log(d)
    value = np.exp(-1j * mu * t - alpha * log_d)
    zeros = np.zeros_like(d)

    dd = np.stack([
        zeros,
        1j * theta * t,
        theta * sigma * t * t + zeros,
        zeros,
        0.5 * sigma * sigma * t * t + 1j * delta * t,
    ])
    d2d = np.zeros((5, 5) + d.shape, dtype=complex)
    d2d[_DELTA, _THETA] = d2d[_THETA, _DELTA] = 1j * t
    d2d[_SIGMA, _SIGMA] = theta * t * t
    d2d[_SIGMA, _THETA] = d2d[_THETA, _SIGMA] = sigma * t * t

    dl = -alpha * dd / d
    dl[_MU] = -1j * t
    dl[_ALPHA] = -log_d

    d2l = -alpha * (d2d / d - dd[:, None] * dd[None, :] / (d * d))
    d2l[_MU, :] = 0
    d2l[:, _MU] = 0
    d2l[_ALPHA, :] = -dd / d
    d2l[:, _ALPHA] = -dd / d
    d2l[_ALPHA, _ALPHA] = 0
    return value, dl, d2l


def cf_gradient(params: VgParams, t) -> np.ndarray:
    """dF/dV_j for j in PARAM_NAMES order; shape (5,) for scalar t, else (5, len(t)).

    dF/dmu = -i*t*F, dF/ddelta = -alpha*i*theta*t*F/D, dF/dsigma = -alpha*theta*sigma*t^2*F/D,
    dF/dalpha = -log(D)*F, dF/dtheta = -alpha*(sigma^2*t^2/2 + i*delta*t)*F/D.
    """
    value, dl, _ = _log_derivatives(params, np.asarray(t, dtype=float))
    return dl * value


def cf_hessian(params: VgParams, t) -> np.ndarray:
    """Distinct second derivatives d2F/dV_k dV_j, ordered as HESSIAN_PAIRS.

    Uses d2F = F * (L_k * L_j + L_kj) with L = log F.
    """
    value, dl, d2l = _log_derivatives(params, np.asarray(t, dtype=float))
    return np.stack([value * (dl[k] * dl[j] + d2l[k, j]) for k, j in HESSIAN_PAIRS])


def density_grid(
    params: VgParams,
    grid: FrftGrid | None = None,
    order: int = 0,
    tail_tolerance: float | None = TAIL_ERROR,
) -> DensityGrid:
    """Tabulate the density (and derivatives up to ``order``) on the FRFT output grid.

    Args:
        params: VG parameters
        grid: FRFT grid (default a=20, n=2048)
        order: 0 for f only, 1 adds df, 2 adds d2f
        tail_tolerance: Raise when |cf(+-a/2)| exceeds this; None keeps the
            band-limited density and only warns

    Returns:
        DensityGrid on grid.output_nodes

    Raises:
        GridSupportError: If the tail exceeds tail_tolerance, or (when strict)
            the tabulated density fails DensityGrid.check
    """
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    grid = grid or FrftGrid()
    t = grid.input_nodes

    if order == 0:
        stack = cf(params, t)[None, :]
    else:
        value, dl, d2l = _log_derivatives(params, t)
        rows = [value[None, :], dl * value]
        if order == 2:
            rows.append(np.stack([value * (dl[k] * dl[j] + d2l[k, j]) for k, j in HESSIAN_PAIRS]))
        stack = np.concatenate(rows)

    tail = tail_magnitude(stack[0])
    if tail_tolerance is not None and tail > tail_tolerance:
        raise GridSupportError(
            f"|cf| = {tail:.3e} at the grid edge exceeds {tail_tolerance:.1e}; increase a",
            a=grid.a,
        )
    if tail > TAIL_WARN:
        warnings.warn(TailDecayWarning(tail), stacklevel=2)

    if not grid.alias_free:
        logger.warning(
            "output span %.4g exceeds the alias period %.4g; copies of the density overlap the grid",
            grid.n * grid.gamma, 2 * math.pi / grid.beta,
        )
    values = invert_cf(stack, grid, warn_tail=False)
    values.setflags(write=False)
    dg = DensityGrid(
        grid=grid,
        x=grid.output_nodes,
        f=values[0],
        df=values[1:6] if order >= 1 else None,
        d2f=values[6:21] if order == 2 else None,
        tail=tail,
    )
    if tail_tolerance is not None:
        dg.check(negative_tol=max(1e-8, tail))
    logger.debug("density grid for %s (order %d, tail %.2e)", params, order, tail)
    return dg


def cdf_grid(dg: DensityGrid) -> np.ndarray:
    """Cumulative trapezoid of the density, clamped to [0, 1] and non-decreasing.

    Raises:
        GridSupportError: If the total mass deviates from 1 by more than 1e-4
    """
    cumulative = integrate.cumulative_trapezoid(dg.f, dg.x, initial=0.0)
    total = cumulative[-1]
    if abs(total - 1.0) > 1e-4:
        raise GridSupportError(f"density mass {total:.6f} on the grid; support too narrow", a=dg.grid.a)
    return np.clip(np.maximum.accumulate(cumulative), 0.0, 1.0)


def _check_span(grid: FrftGrid, y: np.ndarray) -> None:
    lo, hi = grid.safe_span
    outside = (y < lo) | (y > hi)
    if np.any(outside):
        first = float(y[np.flatnonzero(outside)[0]])
        raise GridSupportError(
            f"point outside the interpolation span [{lo:.4g}, {hi:.4g}]", observation=first
        )


def interpolator(values: np.ndarray, grid: FrftGrid, y) -> CubicSpline:
    """Cubic spline through the tabulated values on the nodes covering ``y``.

    Only the window of nodes spanning [min(y), max(y)] (plus a margin) is used.

    Raises:
        GridSupportError: If any point of y lies outside grid.safe_span
    """
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    _check_span(grid, y_arr)
    x = grid.output_nodes
    margin = 8
    lo = max(int(np.searchsorted(x, y_arr.min())) - margin, 0)
    hi = min(int(np.searchsorted(x, y_arr.max())) + margin, grid.n)
    return CubicSpline(x[lo:hi], np.asarray(values)[..., lo:hi], axis=-1)


def eval_at(table, y, grid: FrftGrid | None = None):
    """Evaluate tabulated values at y by cubic interpolation.

    Args:
        table: A DensityGrid (its density is interpolated and floored at 1e-300)
            or an array of values on ``grid`` (e.g. a CDF from cdf_grid)
        y: Point or array of points
        grid: Grid of ``table`` when it is a plain array

    Raises:
        GridSupportError: If y lies outside the central 90% of the grid span
    """
    if isinstance(table, DensityGrid):
        values, grid, floor = table.f, table.grid, DENSITY_FLOOR
    else:
        if grid is None:
            raise ValueError("grid is required when interpolating a plain array")
        values, floor = np.asarray(table, dtype=float), None
    result = interpolator(values, grid, y)(np.asarray(y, dtype=float))
    if floor is not None:
        result = np.maximum(result, floor)
    return float(result) if np.ndim(result) == 0 else result


def moments(params: VgParams) -> tuple[float, float, float, float]:
    """Mean, variance, skewness and kurtosis from the cumulant-generating function.

    K(s) = mu*s - alpha*log(1 - theta*sigma^2*s^2/2 - delta*theta*s) gives
    k1 = mu + alpha*theta*delta, k2 = alpha*theta*(sigma^2 + delta^2*theta),
    k3 = alpha*(2*c1^3 + 3*c1*c2), k4 = alpha*(6*c1^4 + 12*c1^2*c2 + 3*c2^2)
    with c1 = delta*theta and c2 = theta*sigma^2. For delta = 0 this reduces to
    (mu, alpha*theta*sigma^2, 0, 3*(1 + 1/alpha)).
    """
    c1 = params.delta * params.theta
    c2 = params.theta * params.sigma**2
    a = params.alpha
    k1 = params.mu + a * c1
    k2 = a * (c2 + c1 * c1)
    k3 = a * (2 * c1**3 + 3 * c1 * c2)
    k4 = a * (6 * c1**4 + 12 * c1 * c1 * c2 + 3 * c2 * c2)
    return k1, k2, k3 / k2**1.5, 3.0 + k4 / (k2 * k2)


def grid_moments(dg: DensityGrid) -> tuple[float, float, float, float]:
    """Mean, variance, skewness and kurtosis of a tabulated density (trapezoid)."""
    x, f = dg.x, dg.f
    mass = integrate.trapezoid(f, x)
    mean = integrate.trapezoid(x * f, x) / mass
    centred = x - mean
    m2, m3, m4 = (integrate.trapezoid(centred**p * f, x) / mass for p in (2, 3, 4))
    return float(mean), float(m2), float(m3 / m2**1.5), float(m4 / (m2 * m2))


def sample(params: VgParams, count: int, seed: int) -> np.ndarray:
    """Draw mu + delta*v + sigma*sqrt(v)*z with v ~ Gamma(alpha, scale=theta), z ~ N(0, 1)."""
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    rng = np.random.default_rng(seed)
    v = rng.gamma(params.alpha, params.theta, size=count)
    z = rng.standard_normal(count)
    return params.mu + params.delta * v + params.sigma * np.sqrt(v) * z


def clm_density(mu: float, sigma: float, y):
    """Gaussian return density of the classical lognormal model."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    return stats.norm.pdf(y, loc=mu, scale=sigma)


def mixture_density(params: VgParams, y: float) -> float:
    """Density by adaptive quadrature of the normal variance-mean mixture integral.

    f(y) = int_0^inf N(y; mu + delta*v, sigma^2*v) * Gamma(v; alpha, theta) dv
    """
    mu, delta, sigma, alpha, theta = params.as_vector()
    log_norm = -math.log(sigma) - gammaln(alpha) - alpha * math.log(theta) - 0.5 * math.log(2 * math.pi)

    def integrand(v: float) -> float:
        if v <= 0.0:
            return 0.0
        r = y - mu - delta * v
        return math.exp(log_norm + (alpha - 1.5) * math.log(v) - r * r / (2 * v * sigma * sigma) - v / theta)

    split = alpha * theta
    left, _ = integrate.quad(integrand, 0.0, split, epsabs=1e-14, epsrel=1e-12, limit=500)
    right, _ = integrate.quad(integrand, split, np.inf, epsabs=1e-14, epsrel=1e-12, limit=500)
    return left + right
