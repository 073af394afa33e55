"""Newton-Raphson maximum likelihood for the Variance-Gamma model.

Newton steps are taken in coordinates phi = (mu, delta, log sigma, log alpha,
log theta) so the positive parameters cannot cross zero. The score and
Hessian are carried over by the chain rule:

    g_phi = J g,   H_phi = J H J + diag(J g) on the log coordinates,

with J = diag(1, 1, sigma, alpha, theta). When -H_phi is positive definite the
step is the Newton direction -H_phi^{-1} g_phi (flat ridge directions are
left out); when it is clearly indefinite the step falls back to gradient
ascent. Every step is backtracked until the log-likelihood does not decrease,
so the accepted trace is monotone.
"""

import logging
import math

import numpy as np
from pydantic import ValidationError as PydanticValidationError
from scipy import optimize, stats

from .errors import DiagnosticsError, GridSupportError, MomentsError
from .likelihood import LikelihoodState, evaluate
from .models import PARAM_NAMES, ClmParams, FitConfig, FitReport, IterationRow, ReturnSample, VgParams
from .variance_gamma import moments

logger = logging.getLogger(__name__)

_LOG_MASK = np.array([False, False, True, True, True])
_DELTA = 1

# Relative to the largest curvature: below RCOND is flat (the sigma-theta ridge),
# below -INDEFINITE the Hessian is indefinite.
RCOND = 1e-9
INDEFINITE = 1e-6


def _to_phi(params: VgParams) -> np.ndarray:
    v = params.as_vector()
    return np.where(_LOG_MASK, np.log(np.abs(v) + (~_LOG_MASK)), v)


def _from_phi(phi: np.ndarray) -> VgParams:
    return VgParams.from_vector(np.where(_LOG_MASK, np.exp(phi), phi))


def _phi_derivatives(state: LikelihoodState) -> tuple[np.ndarray, np.ndarray]:
    v = state.params.as_vector()
    jac = np.where(_LOG_MASK, v, 1.0)
    g = jac * state.score
    h = np.outer(jac, jac) * state.hessian + np.diag(np.where(_LOG_MASK, g, 0.0))
    return g, h


def _row(iteration: int, state: LikelihoodState, free: list[int], step: str, halvings: int) -> IterationRow:
    return IterationRow(
        iteration=iteration,
        **state.params.model_dump(),
        loglik=state.value,
        grad_norm=float(np.linalg.norm(state.score[free])),
        step=step,
        halvings=halvings,
    )


def _try_value(sample: ReturnSample, params: VgParams, config: FitConfig) -> float | None:
    """Log-likelihood at a trial point, or None when the point cannot be evaluated."""
    try:
        return evaluate(sample, params, order=0, grid=config.grid).value
    except (GridSupportError, DiagnosticsError) as e:
        logger.debug("trial point %s rejected: %s", params, e)
        return None


def _newton_direction(g: np.ndarray, h: np.ndarray) -> tuple[np.ndarray, str]:
    """Ascent direction and its kind ("newton" or "gradient").

    The Newton step is (-h)^+ g over the curved eigen-directions of -h; flat
    directions carry no step. A curvature below -INDEFINITE times the largest
    means the quadratic model has no maximum, and the step becomes gradient
    ascent scaled by the largest curvature.
    """
    curvature, vectors = np.linalg.eigh(-h)
    scale = float(np.max(np.abs(curvature)))
    if scale == 0.0:
        return g, "gradient"
    if np.any(curvature < -INDEFINITE * scale):
        return g / scale, "gradient"
    keep = curvature > RCOND * scale
    basis = vectors[:, keep]
    return basis @ ((basis.T @ g) / curvature[keep]), "newton"


def standard_errors(hessian: np.ndarray, free: list[int]) -> dict[str, float] | None:
    """Inverse-Hessian standard errors for the free parameters.

    Returns None unless -H is positive definite beyond RCOND. On the
    sigma-theta ridge only (mu, delta*theta, theta*sigma^2, alpha) are
    identified and the individual errors are unbounded.
    """
    sub = -hessian[np.ix_(free, free)]
    curvature = np.linalg.eigvalsh(sub)
    if curvature[0] <= RCOND * max(float(curvature[-1]), 0.0):
        return None
    cov = np.linalg.inv(sub)
    return {PARAM_NAMES[i]: float(math.sqrt(cov[pos, pos])) for pos, i in enumerate(free)}


def fit_mle(sample: ReturnSample, config: FitConfig | None = None, label: str | None = None) -> FitReport:
    """Maximize the VG log-likelihood by damped Newton-Raphson.

    Args:
        sample: Cleaned return sample
        config: Fit settings (init, tolerances, grid, symmetric flag)
        label: Run label for the report (defaults to the model tag)

    Returns:
        FitReport whose first iteration row is the initial value; converged is
        False when max_iters is reached or no step improves the likelihood
    """
    config = config or FitConfig()
    tag = "SVG" if config.symmetric else "AVG"
    free = [i for i in range(5) if not (config.symmetric and i == _DELTA)]
    damping = config.step_damping

    state = evaluate(sample, config.init, order=2, grid=config.grid)
    if state.grid_diagnostics["tail"] > 1e-10:
        logger.warning(
            "likelihood uses the density band-limited to |t| <= %g (|cf| = %.2e at the edge)",
            config.grid.a / 2, state.grid_diagnostics["tail"],
        )
    rows = [_row(1, state, free, "init", 0)]
    converged = False

    for _ in range(config.max_iters):
        grad_norm = rows[-1].grad_norm
        if grad_norm < config.grad_tol:
            converged = True
            break

        g_full, h_full = _phi_derivatives(state)
        g, h = g_full[free], h_full[np.ix_(free, free)]
        direction, kind = _newton_direction(g, h)
        if kind == "gradient":
            logger.warning("Hessian not negative semi-definite at iteration %d; gradient step", len(rows))

        phi = _to_phi(state.params)
        step, accepted = 1.0, None
        for halvings in range(damping.max_halvings + 1):
            trial_phi = phi.copy()
            trial_phi[free] += step * direction
            try:
                trial = _from_phi(trial_phi)
            except PydanticValidationError:
                trial = None
            value = _try_value(sample, trial, config) if trial is not None else None
            if value is not None and value >= state.value:
                accepted = trial
                break
            step *= damping.shrink
        if accepted is None:
            logger.warning("no improving step after %d halvings; stopping", damping.max_halvings)
            break

        state = evaluate(sample, accepted, order=2, grid=config.grid)
        rows.append(_row(len(rows) + 1, state, free, kind, halvings))
        logger.info(
            "iteration %d: loglik %.6f, |dl/dV| %.3e (%s, %d halvings)",
            len(rows), state.value, rows[-1].grad_norm, kind, halvings,
        )
    else:
        converged = rows[-1].grad_norm < config.grad_tol

    if not converged:
        logger.warning("fit did not reach grad_tol=%g after %d rows", config.grad_tol, len(rows))
    for prev, curr in zip(rows, rows[1:]):
        if curr.loglik < prev.loglik:
            raise DiagnosticsError("accepted log-likelihood decreased", index=curr.iteration)

    hessian = state.hessian[np.ix_(free, free)]
    condition = float(np.linalg.cond(hessian))
    if condition > 1e8:
        logger.warning("Hessian condition number %.2e: likelihood ridge", condition)

    return FitReport(
        label=label or tag,
        model_tag=tag,
        params=state.params,
        loglik=state.value,
        iterations=rows,
        converged=converged,
        n_obs=len(sample),
        hessian_condition=condition,
        standard_errors=standard_errors(state.hessian, free),
        grid=config.grid,
    )


def params_from_moments(mean: float, var: float, skew: float, kurt: float, symmetric: bool) -> VgParams:
    """Invert the VG moment equations under the normalization theta = sigma.

    Symmetric: alpha = 3/(kurt - 3), theta*sigma^2 = var/alpha. Asymmetric: solve
    the variance, skewness and kurtosis equations for (delta, alpha, theta) by
    least squares starting from the symmetric solution, then mu = mean - alpha*theta*delta.

    Raises:
        MomentsError: If kurt <= 3 or var <= 0
    """
    if var <= 0:
        raise MomentsError(f"variance must be positive, got {var}")
    if kurt <= 3:
        raise MomentsError(
            f"sample kurtosis {kurt:.4f} <= 3 leaves alpha undefined; start the MLE from the default init"
        )
    alpha = 3.0 / (kurt - 3.0)
    theta = (var / alpha) ** (1.0 / 3.0)
    if symmetric:
        return VgParams(mu=mean, delta=0.0, sigma=theta, alpha=alpha, theta=theta)

    def residuals(x: np.ndarray) -> np.ndarray:
        delta, log_alpha, log_theta = x
        th = math.exp(log_theta)
        trial = VgParams(delta=delta, sigma=th, alpha=math.exp(log_alpha), theta=th)
        _, v, s, k = moments(trial)
        return np.array([v / var - 1.0, s - skew, (k - kurt) / kurt])

    start = np.array([0.0, math.log(alpha), math.log(theta)])
    solution = optimize.least_squares(residuals, start, method="lm", xtol=1e-14, ftol=1e-14)
    delta, log_alpha, log_theta = solution.x
    if np.max(np.abs(solution.fun)) > 1e-6:
        logger.warning("asymmetric moment equations solved only approximately (residual %.2e)",
                       float(np.max(np.abs(solution.fun))))
    alpha, theta = math.exp(log_alpha), math.exp(log_theta)
    return VgParams(mu=mean - alpha * theta * delta, delta=delta, sigma=theta, alpha=alpha, theta=theta)


def init_method_of_moments(sample: ReturnSample, symmetric: bool = False) -> VgParams:
    """Method-of-moments starting values from the sample's first four moments.

    Raises:
        MomentsError: If the sample has fewer than 4 points or kurtosis <= 3
    """
    y = sample.values
    if y.size < 4:
        raise MomentsError(f"need at least 4 observations, got {y.size}")
    params = params_from_moments(
        float(np.mean(y)),
        float(np.var(y)),
        float(stats.skew(y)),
        float(stats.kurtosis(y, fisher=False)),
        symmetric,
    )
    logger.info("method-of-moments init: %s", params)
    return params


def fit_clm(sample: ReturnSample) -> ClmParams:
    """Gaussian maximum likelihood: sample mean and population (1/n) standard deviation.

    A constant sample gives sigma = 0, which is logged as degenerate.
    """
    y = sample.values
    if y.size < 2:
        raise ValueError(f"need at least 2 observations, got {y.size}")
    mu, sigma = float(np.mean(y)), float(np.std(y))
    if sigma == 0.0:
        logger.warning("constant sample: CLM fit is degenerate (sigma = 0)")
    return ClmParams(mu=mu, sigma=sigma)


def clm_loglik(sample: ReturnSample, params: ClmParams) -> float:
    """Gaussian log-likelihood of the sample."""
    if params.sigma == 0.0:
        return -math.inf
    return math.fsum(stats.norm.logpdf(sample.values, params.mu, params.sigma))
