"""Pydantic models for vgfit parameters, grids, configuration and reports.

Inputs (parameters, grids, rules, fit settings) are validated on construction;
reports are plain serializable models so they round-trip through JSON.
"""

import math
from typing import Annotated, Literal

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    field_validator,
    model_validator,
)

PARAM_NAMES = ("mu", "delta", "sigma", "alpha", "theta")

FiniteFloat = Annotated[float, Field(allow_inf_nan=False)]
PositiveFloat = Annotated[float, Field(gt=0, allow_inf_nan=False)]


class VgParams(BaseModel):
    """Five-parameter Variance-Gamma vector V = (mu, delta, sigma, alpha, theta).

    Attributes:
        mu: Location drift (return units)
        delta: Drift of activity time, controls asymmetry
        sigma: Volatility (> 0)
        alpha: Gamma shape of the activity time (> 0)
        theta: Gamma scale of the activity time (> 0), so E(V) = alpha * theta
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    mu: FiniteFloat = 0.0
    delta: FiniteFloat = 0.0
    sigma: PositiveFloat = 1.0
    alpha: PositiveFloat = 1.0
    theta: PositiveFloat = 1.0

    @classmethod
    def default(cls) -> "VgParams":
        """Initial value sigma = alpha = theta = 1, delta = mu = 0."""
        return cls()

    @classmethod
    def from_vector(cls, vector) -> "VgParams":
        """Build parameters from a length-5 sequence ordered as PARAM_NAMES."""
        values = [float(v) for v in vector]
        if len(values) != 5:
            raise ValueError(f"expected 5 parameter values, got {len(values)}")
        return cls(**dict(zip(PARAM_NAMES, values)))

    def as_vector(self) -> np.ndarray:
        return np.array([self.mu, self.delta, self.sigma, self.alpha, self.theta])

    @property
    def symmetric(self) -> bool:
        return self.delta == 0.0

    @property
    def implied_std(self) -> float:
        """Model standard deviation sqrt(alpha*theta*(sigma^2 + delta^2*theta))."""
        return math.sqrt(self.alpha * self.theta * (self.sigma**2 + self.delta**2 * self.theta))


class ClmParams(BaseModel):
    """Gaussian (classical lognormal model) return parameters."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    mu: FiniteFloat
    sigma: Annotated[float, Field(ge=0, allow_inf_nan=False)]


class FrftGrid(BaseModel):
    """Discretization shared by the forward and inverse fractional transforms.

    Input nodes are t_j = (j - n/2) * beta and output nodes x_k = (k - n/2) * gamma
    for 0 <= j, k < n. Only ``a`` and ``n`` are required; beta defaults to a/n,
    gamma to beta and delta_frft to beta*gamma/(2*pi). Explicit values are kept
    as given and checked by ``validate_contract``.

    Attributes:
        a: Support width of the characteristic function (frequency units)
        n: Grid size, a power of two
        beta: Input step
        gamma: Output step
        delta_frft: Fraction parameter of the transform
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    a: PositiveFloat = 20.0
    n: Annotated[int, Field(ge=2)] = 2048
    beta: PositiveFloat | None = None
    gamma: PositiveFloat | None = None
    delta_frft: FiniteFloat | None = None

    @field_validator("n")
    @classmethod
    def validate_power_of_two(cls, v: int) -> int:
        if v & (v - 1):
            raise ValueError(f"n must be a power of two, got {v}")
        return v

    @model_validator(mode="before")
    @classmethod
    def fill_derived(cls, data):
        """Fill beta, gamma and delta_frft from (a, n) when they are omitted."""
        if not isinstance(data, dict):
            return data
        data = dict(data)
        a = float(data.get("a", 20.0))
        n = int(data.get("n", 2048))
        if n <= 0:
            return data
        if data.get("beta") is None:
            data["beta"] = a / n
        if data.get("gamma") is None:
            data["gamma"] = data["beta"]
        if data.get("delta_frft") is None:
            data["delta_frft"] = float(data["beta"]) * float(data["gamma"]) / (2 * math.pi)
        return data

    @classmethod
    def from_support(cls, a: float = 20.0, n: int = 2048, gamma: float | None = None) -> "FrftGrid":
        """Consistent grid from support width, size and optional output step."""
        return cls(a=a, n=n, gamma=gamma)

    def validate_contract(self) -> None:
        """Check beta = a/n and delta_frft = beta*gamma/(2*pi).

        Raises:
            GridContractError: If either relation does not hold
        """
        from .errors import GridContractError

        if not math.isclose(self.beta, self.a / self.n, rel_tol=1e-12):
            raise GridContractError(
                f"beta={self.beta!r} differs from a/n={self.a / self.n!r}"
            )
        expected = self.beta * self.gamma / (2 * math.pi)
        if not math.isclose(self.delta_frft, expected, rel_tol=1e-12):
            raise GridContractError(
                f"delta_frft={self.delta_frft!r} differs from beta*gamma/(2*pi)={expected!r}"
            )

    @property
    def input_nodes(self) -> np.ndarray:
        return (np.arange(self.n) - self.n / 2) * self.beta

    @property
    def output_nodes(self) -> np.ndarray:
        return (np.arange(self.n) - self.n / 2) * self.gamma

    @property
    def span(self) -> tuple[float, float]:
        """(first, last) output node."""
        return (-self.n / 2 * self.gamma, (self.n / 2 - 1) * self.gamma)

    @property
    def safe_span(self) -> tuple[float, float]:
        """Central 90% of the output span, where interpolation is allowed."""
        lo, hi = self.span
        centre, half = (lo + hi) / 2, (hi - lo) / 2
        return (centre - 0.9 * half, centre + 0.9 * half)

    @property
    def alias_free(self) -> bool:
        """Whether the output span fits inside one period 2*pi/beta of the inverted density."""
        return self.n * self.delta_frft <= 1.0


class OutlierRule(BaseModel):
    """Outlier filtering rule for return samples.

    Attributes:
        kind: "none", "abs_threshold" (|y| > threshold) or "z_score"
            (|y - mean| / std > threshold)
        threshold: Rule parameter; may be omitted when target_count is given
        target_count: Resolve the threshold by sweeping until exactly this many
            observations are flagged
        max_fraction: Largest fraction of the sample the rule may remove
        allow_large_removal: Override the max_fraction refusal
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["none", "abs_threshold", "z_score"] = "none"
    threshold: PositiveFloat | None = None
    target_count: Annotated[int, Field(ge=0)] | None = None
    max_fraction: Annotated[float, Field(gt=0, le=1)] = 0.05
    allow_large_removal: bool = False

    @model_validator(mode="after")
    def validate_parameters(self) -> "OutlierRule":
        if self.kind != "none" and self.threshold is None and self.target_count is None:
            raise ValueError(f"rule '{self.kind}' needs a threshold or a target_count")
        return self


class StepDamping(BaseModel):
    """Backtracking line-search settings."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    shrink: Annotated[float, Field(gt=0, lt=1)] = 0.5
    max_halvings: Annotated[int, Field(ge=0)] = 30


class FitConfig(BaseModel):
    """Newton-Raphson maximum-likelihood settings.

    Attributes:
        init: Starting parameters
        max_iters: Maximum number of Newton iterations
        grad_tol: Stop once the score norm falls below this value
        step_damping: Backtracking parameters
        symmetric: Pin delta = 0 (symmetric VG)
        grid: FRFT grid used for every density build
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    init: VgParams = Field(default_factory=VgParams.default)
    max_iters: Annotated[int, Field(ge=1)] = 100
    grad_tol: PositiveFloat = 1e-4
    step_damping: StepDamping = Field(default_factory=StepDamping)
    symmetric: bool = False
    grid: FrftGrid = Field(default_factory=FrftGrid)

    @model_validator(mode="before")
    @classmethod
    def pin_symmetric_init(cls, data):
        """Symmetric fits start (and stay) at delta = 0."""
        if isinstance(data, dict) and data.get("symmetric") and data.get("init") is not None:
            init = data["init"]
            if isinstance(init, VgParams):
                init = init.model_dump()
            data = {**data, "init": {**init, "delta": 0.0}}
        return data


class RunConfig(BaseModel):
    """Settings for a batch run, loadable from YAML or JSON.

    Attributes:
        grid: FRFT grid settings
        scale: Multiplier applied to log returns (100 gives percent)
        outlier_rule: Filtering rule applied after computing returns
        max_iters: Newton iteration cap
        grad_tol: Newton gradient tolerance
        seed: Seed for every random draw of the run
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    grid: FrftGrid = Field(default_factory=FrftGrid)
    scale: PositiveFloat = 100.0
    outlier_rule: OutlierRule = Field(default_factory=OutlierRule)
    max_iters: Annotated[int, Field(ge=1)] = 100
    grad_tol: PositiveFloat = 1e-4
    seed: Annotated[int, Field(ge=0)] = 0


class RemovedObservation(BaseModel):
    """An observation dropped from a return sample, kept for audit."""

    model_config = ConfigDict(frozen=True)

    index: int
    value: float
    reason: str


class ReturnSample(BaseModel):
    """Cleaned log-return observations with provenance of removed outliers.

    Attributes:
        values: Finite returns (read-only float64 array)
        removed: Observations dropped by filtering, with reasons
        source_meta: Free-text provenance description
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray
    removed: list[RemovedObservation] = Field(default_factory=list)
    source_meta: str = ""

    @field_validator("values", mode="before")
    @classmethod
    def validate_values(cls, v) -> np.ndarray:
        arr = np.array(v, dtype=float).ravel()
        if not np.all(np.isfinite(arr)):
            bad = int(np.flatnonzero(~np.isfinite(arr))[0])
            raise ValueError(f"values must be finite, index {bad} is {arr[bad]}")
        arr.setflags(write=False)
        return arr

    def __len__(self) -> int:
        return int(self.values.size)


class IterationRow(BaseModel):
    """One accepted iterate of the Newton-Raphson trace."""

    iteration: int
    mu: float
    delta: float
    sigma: float
    alpha: float
    theta: float
    loglik: float
    grad_norm: float
    step: Literal["init", "newton", "gradient"] = "newton"
    halvings: int = 0


class FitReport(BaseModel):
    """Result of a maximum-likelihood fit.

    Attributes:
        label: Run label (AVG1, SVG2, CLM, ...)
        model_tag: Model family
        params: Fitted parameters
        loglik: Log-likelihood at params
        iterations: Accepted iterates, first row is the initial value
        converged: Whether the gradient tolerance was met
        n_obs: Sample size
        hessian_condition: Condition number of the final Hessian
        standard_errors: Inverse-Hessian standard errors by parameter name
        grid: FRFT grid used (None for CLM)
    """

    label: str
    model_tag: Literal["AVG", "SVG", "CLM"]
    params: ClmParams | VgParams
    loglik: float
    iterations: list[IterationRow] = Field(default_factory=list)
    converged: bool = True
    n_obs: int
    hessian_condition: float | None = None
    standard_errors: dict[str, float] | None = None
    grid: FrftGrid | None = None


class KsResult(BaseModel):
    """Kolmogorov-Smirnov statistic and p-value.

    Attributes:
        d_plus: sup |F(x_j) - F_n(x_j)|
        d_minus: sup |F(x_j) - F_n(x_{j-1})|
        d_n: max(d_plus, d_minus)
        p_value: P(D_n > d_n | H0), None until computed
        n: Sample size
    """

    model_config = ConfigDict(frozen=True)

    d_plus: Annotated[float, Field(ge=0, le=1)]
    d_minus: Annotated[float, Field(ge=0, le=1)]
    d_n: Annotated[float, Field(ge=0, le=1)]
    p_value: Annotated[float, Field(ge=0, le=1)] | None = None
    n: Annotated[int, Field(ge=1)]

    @model_validator(mode="after")
    def validate_max(self) -> "KsResult":
        if not math.isclose(self.d_n, max(self.d_plus, self.d_minus), rel_tol=0, abs_tol=1e-15):
            raise ValueError("d_n must equal max(d_plus, d_minus)")
        return self


class RunSpec(BaseModel):
    """Everything that determines a CLI run; embedded in artifact headers."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    subcommand: Literal["density", "fit", "ks", "simulate", "report"]
    model: Literal["avg", "svg", "clm"] = "avg"
    init: Literal["moments", "default", "explicit"] = "default"
    params: VgParams | None = None
    config: RunConfig = Field(default_factory=RunConfig)
    input: str | None = None
    summaries: list[str] = Field(default_factory=list)
    out_dir: str = "."
    count: Annotated[int, Field(ge=1)] = 1000
    sweep: dict[str, list[float]] = Field(default_factory=dict)
    histogram_bins: Annotated[int, Field(ge=1)] | None = None
    order: Literal[0, 1, 2] = 0
    null_density: bool = False


class FitSummary(BaseModel):
    """Summary artifact of a fit, optionally with its goodness-of-fit test."""

    tool: str
    version: str
    spec: RunSpec
    source: str
    removed: list[RemovedObservation] = Field(default_factory=list)
    report: FitReport
    ks: KsResult | None = None
