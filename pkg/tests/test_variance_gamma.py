"""Tests for the Variance-Gamma characteristic function and tabulated densities."""

import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from conftest import random_params, vg_params
from vgfit.errors import GridSupportError, TailDecayWarning
from vgfit.models import FrftGrid, VgParams
from vgfit.variance_gamma import (
    HESSIAN_PAIRS,
    DensityGrid,
    cdf_grid,
    cf,
    cf_gradient,
    cf_hessian,
    clm_density,
    density_grid,
    eval_at,
    grid_moments,
    mixture_density,
    moments,
    sample,
)

# Alias-free grids whose edge |cf| is small enough for the strict density checks.
MIXTURE_GRID = FrftGrid.from_support(a=512.0, n=32768, gamma=0.01)
MOMENTS_GRID = FrftGrid.from_support(a=512.0, n=16384, gamma=0.005)
LAPLACE_GRID = FrftGrid.from_support(a=4096.0, n=32768, gamma=0.0015)

SKEWED_ALPHA_2 = VgParams(mu=0.05, delta=-0.3, sigma=0.8, alpha=2.0, theta=0.8)
SKEWED_ALPHA_3 = VgParams(mu=-0.1, delta=0.2, sigma=1.2, alpha=3.0, theta=0.6)

ignore_tail = pytest.mark.filterwarnings("ignore::vgfit.errors.TailDecayWarning")


def _shift(params: VgParams, index: int, h: float) -> VgParams:
    v = params.as_vector()
    v[index] += h
    return VgParams.from_vector(v)


def _band_limited(params: VgParams, y: float, half_width: float) -> float:
    """(1/pi) int_0^T Re(F(t) e^{ity}) dt: the density with the cf cut at |t| = T."""
    value, _ = integrate.quad(
        lambda t: (cf(params, t) * np.exp(1j * t * y)).real, 0.0, half_width, limit=1000, epsabs=1e-13
    )
    return value / math.pi


class TestCharacteristicFunction:
    """Tests for F(t) = exp(-i*mu*t) / D(t)^alpha."""

    @settings(max_examples=50, deadline=None)
    @given(params=vg_params())
    def test_unit_at_origin(self, params):
        """F(0) = 1."""
        assert cf(params, 0.0) == pytest.approx(1.0)

    @settings(max_examples=50, deadline=None)
    @given(params=vg_params(), t=st.floats(min_value=-200.0, max_value=200.0))
    def test_bounded_by_one(self, params, t):
        """|F(t)| <= 1 because Re D(t) >= 1."""
        assert abs(cf(params, t)) <= 1.0 + 1e-15

    @settings(max_examples=30, deadline=None)
    @given(params=vg_params())
    def test_hermitian(self, params):
        """F(-t) is the conjugate of F(t)."""
        t = np.linspace(0.1, 8.0, 17)
        np.testing.assert_allclose(cf(params, -t), np.conj(cf(params, t)), atol=1e-15)

    def test_symmetric_centred_is_real(self):
        """delta = mu = 0 gives a real, even characteristic function."""
        params = VgParams(sigma=0.7, alpha=1.3, theta=1.1)
        values = cf(params, np.linspace(-5, 5, 41))
        assert np.max(np.abs(values.imag)) < 1e-16

    def test_laplace_closed_form(self, laplace_params):
        """sigma = alpha = theta = 1, delta = 0 is 1/(1 + t^2/2)."""
        t = np.linspace(-10, 10, 101)
        np.testing.assert_allclose(cf(laplace_params, t), 1.0 / (1.0 + 0.5 * t * t), rtol=1e-14)

    def test_scalar_and_array_shapes(self, skewed_params):
        """Scalar t gives a scalar, arrays keep their shape."""
        assert np.ndim(cf(skewed_params, 0.5)) == 0
        assert cf(skewed_params, np.zeros(7)).shape == (7,)
        assert cf_gradient(skewed_params, 0.5).shape == (5,)
        assert cf_gradient(skewed_params, np.zeros(7)).shape == (5, 7)
        assert cf_hessian(skewed_params, np.zeros(7)).shape == (15, 7)


class TestCfDerivatives:
    """Analytic parameter derivatives of F against central differences."""

    T_VALUES = np.array([-3.0, -0.7, 0.2, 1.5, 4.0])

    @pytest.mark.parametrize("index", range(5))
    def test_gradient(self, skewed_params, index):
        """dF/dV_j matches (F(V + h e_j) - F(V - h e_j)) / 2h."""
        h = 1e-6
        t = self.T_VALUES
        fd = (cf(_shift(skewed_params, index, h), t) - cf(_shift(skewed_params, index, -h), t)) / (2 * h)
        np.testing.assert_allclose(cf_gradient(skewed_params, t)[index], fd, atol=1e-8)

    @pytest.mark.parametrize("pair", HESSIAN_PAIRS)
    def test_hessian(self, skewed_params, pair):
        """d2F/dV_k dV_j matches central differences of the gradient."""
        k, j = pair
        h = 1e-6
        t = self.T_VALUES
        plus = cf_gradient(_shift(skewed_params, k, h), t)[j]
        minus = cf_gradient(_shift(skewed_params, k, -h), t)[j]
        np.testing.assert_allclose(
            cf_hessian(skewed_params, t)[HESSIAN_PAIRS.index(pair)], (plus - minus) / (2 * h), atol=1e-7
        )

    def test_hessian_pairs_cover_upper_triangle(self):
        """15 distinct pairs with k <= j."""
        assert len(HESSIAN_PAIRS) == 15
        assert all(k <= j for k, j in HESSIAN_PAIRS)
        assert len(set(HESSIAN_PAIRS)) == 15


class TestDensityGrid:
    """Tests for FRFT-tabulated densities."""

    def test_band_limited_laplace_at_zero(self, default_grid, laplace_params):
        """On a=20 the density at 0 is the truncated integral (sqrt(2)/pi) arctan(T/sqrt(2))."""
        with pytest.warns(TailDecayWarning):
            dg = density_grid(laplace_params, default_grid, tail_tolerance=None)
        half_width = default_grid.a / 2
        expected = math.sqrt(2) / math.pi * math.atan(half_width / math.sqrt(2))
        assert dg.f[default_grid.n // 2] == pytest.approx(expected, abs=1e-7)

    @ignore_tail
    @pytest.mark.parametrize("offset", [-150, -40, 0, 33, 200])
    def test_band_limited_oracle_at_nodes(self, default_grid, skewed_params, offset):
        """Node values equal the quadrature of the cf truncated at +-a/2."""
        dg = density_grid(skewed_params, default_grid, tail_tolerance=None)
        k = default_grid.n // 2 + offset
        expected = _band_limited(skewed_params, float(dg.x[k]), default_grid.a / 2)
        assert dg.f[k] == pytest.approx(expected, abs=1e-6)

    @ignore_tail
    def test_band_limited_oracle_between_nodes(self, default_grid, skewed_params):
        """Spline interpolation between nodes keeps the band-limited accuracy."""
        dg = density_grid(skewed_params, default_grid, tail_tolerance=None)
        expected = _band_limited(skewed_params, 0.33, default_grid.a / 2)
        assert eval_at(dg, 0.33) == pytest.approx(expected, abs=1e-6)

    @pytest.mark.parametrize("params", [SKEWED_ALPHA_2, SKEWED_ALPHA_3])
    @pytest.mark.parametrize("y", [-2.0, -0.5, 0.7, 2.5])
    def test_matches_mixture_integral(self, params, y):
        """A wide alias-free grid reproduces the normal variance-mean mixture density."""
        dg = density_grid(params, MIXTURE_GRID)
        assert eval_at(dg, y) == pytest.approx(mixture_density(params, y), abs=1e-7)

    def test_strict_laplace_on_wide_grid(self, laplace_params):
        """With |cf| <= 1e-6 at the edge the Laplace density passes the strict checks."""
        dg = density_grid(laplace_params, LAPLACE_GRID)
        half_width = LAPLACE_GRID.a / 2
        expected = math.sqrt(2) / math.pi * math.atan(half_width / math.sqrt(2))
        assert dg.f[LAPLACE_GRID.n // 2] == pytest.approx(expected, abs=1e-7)
        assert eval_at(dg, 1.0) == pytest.approx(math.sqrt(2) / 2 * math.exp(-math.sqrt(2)), abs=1e-5)

    def test_strict_rejects_slow_tail(self, default_grid, skewed_params):
        """The default 1e-6 tail tolerance refuses the a=20 grid for a slowly decaying cf."""
        with pytest.raises(GridSupportError) as exc_info:
            density_grid(skewed_params, default_grid)
        assert exc_info.value.context["a"] == 20.0

    def test_relaxed_tail_warns(self, default_grid, skewed_params):
        """tail_tolerance=None keeps the band-limited density and warns."""
        with pytest.warns(TailDecayWarning) as record:
            dg = density_grid(skewed_params, default_grid, tail_tolerance=None)
        assert record[0].message.magnitude == pytest.approx(dg.tail)
        assert dg.tail == pytest.approx(abs(cf(skewed_params, -default_grid.a / 2)))

    def test_aliasing_grid_logs(self, caplog):
        """A grid whose output span exceeds 2*pi/beta is reported."""
        grid = FrftGrid.from_support(a=2048.0, n=8192, gamma=0.01)
        assert not grid.alias_free
        with caplog.at_level(logging.WARNING, logger="vgfit.variance_gamma"):
            density_grid(SKEWED_ALPHA_3, grid, tail_tolerance=None)
        assert "alias period" in caplog.text

    def test_order_selects_derivatives(self):
        """order 0, 1, 2 fill f, df and d2f."""
        shapes = []
        for order in (0, 1, 2):
            dg = density_grid(SKEWED_ALPHA_3, MOMENTS_GRID, order=order)
            assert dg.order == order
            shapes.append((dg.df is None, dg.d2f is None))
        assert shapes == [(True, True), (False, True), (False, False)]
        assert dg.df.shape == (5, MOMENTS_GRID.n)
        assert dg.d2f.shape == (15, MOMENTS_GRID.n)

    def test_rejects_bad_order(self):
        """Only orders 0, 1 and 2 exist."""
        with pytest.raises(ValueError, match="order"):
            density_grid(SKEWED_ALPHA_3, MOMENTS_GRID, order=3)

    def test_values_are_read_only(self):
        """Tabulated values cannot be modified in place."""
        dg = density_grid(SKEWED_ALPHA_3, MOMENTS_GRID, order=1)
        assert not dg.f.flags.writeable
        assert not dg.df.flags.writeable

    def test_derivatives_integrate_to_zero(self):
        """Every df/dV_j has zero mass because f has mass 1 for all V."""
        dg = density_grid(SKEWED_ALPHA_3, MOMENTS_GRID, order=2)
        masses = integrate.trapezoid(dg.df, dg.x, axis=-1)
        np.testing.assert_allclose(masses, 0.0, atol=1e-8)
        assert dg.mass() == pytest.approx(1.0, abs=1e-8)


@ignore_tail
class TestDensityDerivatives:
    """Tabulated df and d2f against central differences of the tabulated density."""

    NODE_OFFSETS = np.array([-200, -50, 0, 77, 300])
    H = 1e-5

    def _close(self, actual: np.ndarray, expected: np.ndarray, row: np.ndarray) -> None:
        np.testing.assert_allclose(actual, expected, rtol=1e-4, atol=1e-6 * np.max(np.abs(row)))

    def test_first_and_second_derivatives(self, default_grid):
        """df and d2f at 10 random parameter points and 5 nodes match differences."""
        nodes = default_grid.n // 2 + self.NODE_OFFSETS
        for params in random_params(np.random.default_rng(2024), 10):
            dg = density_grid(params, default_grid, order=2, tail_tolerance=None)
            for j in range(5):
                plus = density_grid(_shift(params, j, self.H), default_grid, order=1, tail_tolerance=None)
                minus = density_grid(_shift(params, j, -self.H), default_grid, order=1, tail_tolerance=None)
                fd = (plus.f - minus.f) / (2 * self.H)
                self._close(dg.df[j, nodes], fd[nodes], dg.df[j])
                for k in range(5):
                    pair = (min(j, k), max(j, k))
                    row = dg.d2f[HESSIAN_PAIRS.index(pair)]
                    fd2 = (plus.df[k] - minus.df[k]) / (2 * self.H)
                    self._close(row[nodes], fd2[nodes], row)


class TestCdfAndInterpolation:
    """Tests for cdf_grid and eval_at."""

    def test_cdf_monotone_and_bounded(self):
        """The CDF table starts at 0, ends at 1 and never decreases."""
        cdf = cdf_grid(density_grid(SKEWED_ALPHA_2, MIXTURE_GRID))
        assert cdf[0] == 0.0
        assert cdf[-1] == pytest.approx(1.0, abs=1e-6)
        assert np.all(np.diff(cdf) >= 0)

    def test_cdf_symmetric_median(self):
        """A symmetric density centred at 0 has CDF 1/2 there."""
        params = VgParams(sigma=1.0, alpha=2.0, theta=1.0)
        cdf = cdf_grid(density_grid(params, MIXTURE_GRID))
        assert eval_at(cdf, 0.0, MIXTURE_GRID) == pytest.approx(0.5, abs=1e-6)

    def test_cdf_rejects_missing_mass(self, default_grid):
        """A density whose mass is cut off by the grid is refused."""
        x = default_grid.output_nodes
        dg = DensityGrid(grid=default_grid, x=x, f=stats.norm.pdf(x, scale=8.0))
        with pytest.raises(GridSupportError):
            cdf_grid(dg)

    def test_eval_outside_span(self, default_grid):
        """Points beyond the central 90% of the grid are refused."""
        x = default_grid.output_nodes
        dg = DensityGrid(grid=default_grid, x=x, f=stats.norm.pdf(x))
        with pytest.raises(GridSupportError) as exc_info:
            eval_at(dg, np.array([0.0, 9.5]))
        assert exc_info.value.context["observation"] == 9.5

    def test_eval_floor(self):
        """Interpolated densities are floored at a positive value."""
        dg = density_grid(SKEWED_ALPHA_3, MIXTURE_GRID)
        assert eval_at(dg, 140.0) > 0.0

    def test_eval_shapes(self, default_grid):
        """A scalar gives a float, an array gives an array."""
        x = default_grid.output_nodes
        dg = DensityGrid(grid=default_grid, x=x, f=stats.norm.pdf(x))
        assert isinstance(eval_at(dg, 0.1), float)
        values = eval_at(dg, np.array([-1.0, 0.0, 1.0]))
        np.testing.assert_allclose(values, stats.norm.pdf([-1.0, 0.0, 1.0]), atol=1e-9)

    def test_plain_array_needs_grid(self, default_grid):
        """Interpolating a bare array without its grid is an error."""
        with pytest.raises(ValueError, match="grid"):
            eval_at(np.zeros(default_grid.n), 0.0)

    def test_check_rejects_negative_density(self, default_grid):
        """DensityGrid.check refuses ringing below the tolerance."""
        x = default_grid.output_nodes
        f = stats.norm.pdf(x).copy()
        f[10] = -1e-3
        with pytest.raises(GridSupportError, match="ringing"):
            DensityGrid(grid=default_grid, x=x, f=f).check()


class TestMoments:
    """Closed-form and tabulated moments."""

    def test_symmetric_reduction(self):
        """delta = 0 gives (mu, alpha*theta*sigma^2, 0, 3(1 + 1/alpha))."""
        mean, var, skew, kurt = moments(VgParams(mu=0.2, sigma=1.5, alpha=2.0, theta=0.5))
        assert mean == pytest.approx(0.2)
        assert var == pytest.approx(2.25)
        assert skew == 0.0
        assert kurt == pytest.approx(4.5)

    def test_implied_std(self, skewed_params):
        """VgParams.implied_std is the square root of the model variance."""
        assert skewed_params.implied_std == pytest.approx(math.sqrt(moments(skewed_params)[1]))

    def test_skew_sign_follows_delta(self):
        """Positive delta skews right, negative left."""
        assert moments(VgParams(delta=0.4))[2] > 0
        assert moments(VgParams(delta=-0.4))[2] < 0

    def test_grid_moments_match_closed_form(self):
        """Trapezoid moments of the tabulated density agree with the cumulants."""
        mean, var, skew, kurt = grid_moments(density_grid(SKEWED_ALPHA_3, MOMENTS_GRID))
        e_mean, e_var, e_skew, e_kurt = moments(SKEWED_ALPHA_3)
        assert mean == pytest.approx(e_mean, abs=1e-6)
        assert var == pytest.approx(e_var, rel=1e-5)
        assert skew == pytest.approx(e_skew, abs=1e-4)
        assert kurt == pytest.approx(e_kurt, abs=1e-3)

    def test_implied_std_scales_with_returns(self, skewed_params):
        """Returns scaled by c have mu, delta and sigma scaled by c and c times the std."""
        c = 100.0
        scaled = VgParams(
            mu=c * skewed_params.mu,
            delta=c * skewed_params.delta,
            sigma=c * skewed_params.sigma,
            alpha=skewed_params.alpha,
            theta=skewed_params.theta,
        )
        assert scaled.implied_std == pytest.approx(c * skewed_params.implied_std, rel=1e-12)
        draws = sample(skewed_params, 1000, seed=2)
        np.testing.assert_allclose(sample(scaled, 1000, seed=2), c * draws, rtol=1e-12, atol=1e-12)


class TestDensityShape:
    """Shape of tabulated densities as delta, alpha and the ridge move."""

    def test_gaussian_limit(self, default_grid):
        """alpha = 1/theta = 1000 is within 1e-3 of N(mu, sigma^2)."""
        dg = density_grid(VgParams(alpha=1000.0, theta=1e-3), default_grid)
        assert np.max(np.abs(dg.f - stats.norm.pdf(dg.x))) < 1e-3

    @ignore_tail
    def test_symmetric_about_mu(self, default_grid):
        """delta = 0 gives a density even about mu (mu on a node)."""
        offset = 64
        params = VgParams(mu=offset * default_grid.gamma, sigma=1.1, alpha=2.0, theta=0.9)
        f = density_grid(params, default_grid, tail_tolerance=None).f
        centre = default_grid.n // 2 + offset
        u = np.arange(1, default_grid.n - centre)
        assert np.max(np.abs(f[centre + u] - f[centre - u])) < 1e-7

    @ignore_tail
    def test_kurtosis_grows_as_alpha_falls(self):
        """Smaller alpha means heavier tails: grid kurtosis increases over alpha = 4, 2, 1, 0.5."""
        alphas = (4.0, 2.0, 1.0, 0.5)
        kurtosis = [
            grid_moments(density_grid(VgParams(alpha=alpha), LAPLACE_GRID, tail_tolerance=None))[3]
            for alpha in alphas
        ]
        assert all(b > a for a, b in zip(kurtosis, kurtosis[1:]))
        np.testing.assert_allclose(kurtosis, [3.0 * (1.0 + 1.0 / alpha) for alpha in alphas], rtol=1e-2)

    @pytest.mark.parametrize("delta", [-0.4, 0.4])
    def test_delta_sets_skew_sign(self, delta):
        """Grid skewness has the sign of delta, and -delta mirrors the density."""
        dg = density_grid(VgParams(delta=delta, alpha=2.0), MOMENTS_GRID)
        mirrored = density_grid(VgParams(delta=-delta, alpha=2.0), MOMENTS_GRID)
        assert math.copysign(1.0, grid_moments(dg)[2]) == math.copysign(1.0, delta)
        mid = MOMENTS_GRID.n // 2
        u = np.arange(1, mid)
        np.testing.assert_allclose(dg.f[mid + u], mirrored.f[mid - u], atol=1e-9)

    @pytest.mark.parametrize("c", [0.5, 2.5])
    def test_theta_sigma_ridge(self, c):
        """(theta, sigma) -> (c*theta, sigma/sqrt(c)) leaves the delta = 0 density and its moments unchanged."""
        base = VgParams(mu=0.1, sigma=1.2, alpha=2.0, theta=0.8)
        moved = VgParams(mu=0.1, sigma=1.2 / math.sqrt(c), alpha=2.0, theta=0.8 * c)
        a = density_grid(base, MOMENTS_GRID)
        b = density_grid(moved, MOMENTS_GRID)
        np.testing.assert_allclose(b.f, a.f, atol=1e-12)
        assert grid_moments(b) == pytest.approx(grid_moments(a), rel=1e-9, abs=1e-12)

    def test_ridge_with_drift(self, skewed_params, default_grid):
        """With delta also divided by c the skewed density is unchanged."""
        c = 1.7
        moved = VgParams(
            mu=skewed_params.mu,
            delta=skewed_params.delta / c,
            sigma=skewed_params.sigma / math.sqrt(c),
            alpha=skewed_params.alpha,
            theta=skewed_params.theta * c,
        )
        with pytest.warns(TailDecayWarning):
            a = density_grid(skewed_params, default_grid, tail_tolerance=None)
        with pytest.warns(TailDecayWarning):
            b = density_grid(moved, default_grid, tail_tolerance=None)
        np.testing.assert_allclose(b.f, a.f, atol=1e-12)


class TestSampling:
    """Tests for the mixture sampler and baseline densities."""

    def test_deterministic(self, skewed_params):
        """The same seed gives the same draws."""
        np.testing.assert_array_equal(sample(skewed_params, 10, seed=3), sample(skewed_params, 10, seed=3))
        assert not np.array_equal(sample(skewed_params, 10, seed=3), sample(skewed_params, 10, seed=4))

    def test_sample_moments(self):
        """Mean and variance of 200000 draws are within five standard errors."""
        draws = sample(SKEWED_ALPHA_3, 200_000, seed=7)
        mean, var, skew, _ = moments(SKEWED_ALPHA_3)
        assert np.mean(draws) == pytest.approx(mean, abs=0.02)
        assert np.var(draws) == pytest.approx(var, rel=0.03)
        assert stats.skew(draws) > 0

    def test_rejects_empty(self, skewed_params):
        """count must be positive."""
        with pytest.raises(ValueError):
            sample(skewed_params, 0, seed=1)

    def test_clm_density(self):
        """The Gaussian baseline is the normal pdf."""
        y = np.array([-1.0, 0.3, 2.0])
        np.testing.assert_allclose(clm_density(0.1, 0.9, y), stats.norm.pdf(y, 0.1, 0.9))
        with pytest.raises(ValueError):
            clm_density(0.0, 0.0, y)

    def test_mixture_laplace(self, laplace_params):
        """The mixture integral reproduces the Laplace density away from the cusp."""
        for y in (-1.5, 0.4, 3.0):
            assert mixture_density(laplace_params, y) == pytest.approx(
                math.sqrt(2) / 2 * math.exp(-math.sqrt(2) * abs(y)), rel=1e-8
            )
