"""Citation trajectory curves and log-scale losses.

The forecast head maps a publication's influence vector through four small
MLPs to the parameters of a generalized logistic (Richards) curve

    C(t) = theta1 / (1 + xi * exp(-theta2 * (t - theta3)))**(1/xi)

whose value at t years past the reference year is the predicted cumulative
citation count. theta1 is the ceiling, theta2 the rise rate, theta3 the lag
midpoint, xi the curve smoothness. A three-parameter log-normal CDF curve is
provided as a drop-in alternative head.

Losses compare predictions and observations in log1p space: MALE is the mean
absolute difference, RMSLE the root of the mean squared difference. log1p
rather than log keeps zero-count years well-defined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, DomainError, NumericError

XI_FLOOR = 1e-3  # keeps 1/xi bounded


@dataclass
class CitationSeries:
    """Cumulative citation counts for the years following ``start_year``."""

    start_year: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.size == 0:
            raise ContractError(f"series must be a non-empty vector, got shape {self.values.shape}")
        if np.any(self.values < 0):
            raise DomainError("citation counts cannot be negative")
        if np.any(np.diff(self.values) < -1e-9):
            raise ContractError("cumulative citation series must be non-decreasing")

    @property
    def horizon(self) -> int:
        return int(self.values.size)

    def years(self) -> list[int]:
        return [self.start_year + k for k in range(1, self.horizon + 1)]


@dataclass
class TrajectoryParams:
    theta1: float  # citation ceiling, > 0
    theta2: float  # rise rate, > 0
    theta3: float  # lag midpoint in years, unconstrained
    xi: float  # smoothness, > 0

    def __post_init__(self):
        if not (self.theta1 > 0 and self.theta2 > 0 and self.xi > 0):
            raise ContractError(
                f"theta1, theta2, xi must be positive: {self.theta1}, {self.theta2}, {self.xi}"
            )
        for v in (self.theta1, self.theta2, self.theta3, self.xi):
            if not math.isfinite(v):
                raise NumericError("non-finite trajectory parameter")


# ---------------------------------------------------------------------------
# parameter heads


@dataclass
class MLPParams:
    """Weights of one fully connected stack, ReLU between hidden layers."""

    layers: list  # [(w, b), ...] as Tensors

    @classmethod
    def init(cls, dims, rng) -> "MLPParams":
        layers = []
        for d_in, d_out in zip(dims, dims[1:]):
            limit = 1.0 / math.sqrt(d_in)
            w = Tensor(rng.uniform(-limit, limit, size=(d_in, d_out)), requires_grad=True)
            b = Tensor(np.zeros(d_out), requires_grad=True)
            layers.append((w, b))
        return cls(layers)

    def parameters(self):
        return [t for pair in self.layers for t in pair]


def mlp_forward(x: Tensor, mlp: MLPParams) -> Tensor:
    """Apply the stack to a batch (B, d_in); returns (B,)."""
    h = x
    last = len(mlp.layers) - 1
    for i, (w, b) in enumerate(mlp.layers):
        h = ad.add(ad.matmul(h, w), b)
        if i != last:
            h = ad.relu(h)
    return ad.reshape(h, (h.shape[0],))


@dataclass
class ParamHeads:
    """Four independent MLPs, one per curve parameter."""

    theta1: MLPParams
    theta2: MLPParams
    theta3: MLPParams
    xi: MLPParams

    @classmethod
    def init(cls, in_dim: int, hidden=(64, 32), seed: int = 0) -> "ParamHeads":
        rng = np.random.default_rng(seed)
        dims = (in_dim, *hidden, 1)
        return cls(*(MLPParams.init(dims, rng) for _ in range(4)))

    def parameters(self):
        return (
            self.theta1.parameters()
            + self.theta2.parameters()
            + self.theta3.parameters()
            + self.xi.parameters()
        )


def heads_forward(m: Tensor, heads: ParamHeads):
    """Batched curve parameters from influence vectors (B, d).

    Returns (theta1, theta2, theta3, xi) as (B,) tensors. Positivity of
    theta1, theta2, xi comes from softplus; xi additionally gets a small
    floor so 1/xi stays bounded.
    """
    theta1 = ad.softplus(mlp_forward(m, heads.theta1))
    theta2 = ad.softplus(mlp_forward(m, heads.theta2))
    theta3 = mlp_forward(m, heads.theta3)
    xi = ad.add(ad.softplus(mlp_forward(m, heads.xi)), Tensor(XI_FLOOR))
    return theta1, theta2, theta3, xi


def logistic_params(m, heads: ParamHeads) -> TrajectoryParams:
    """Curve parameters for a single influence vector (non-batched)."""
    vec = np.asarray(getattr(m, "values", m), dtype=np.float64)
    t1, t2, t3, xi = heads_forward(Tensor(vec.reshape(1, -1)), heads)
    return TrajectoryParams(
        theta1=float(t1.data[0]),
        theta2=float(t2.data[0]),
        theta3=float(t3.data[0]),
        xi=float(xi.data[0]),
    )


# ---------------------------------------------------------------------------
# curves


def citation_count(params: TrajectoryParams, t: float) -> float:
    """Richards curve value at ``t`` years past the reference year.

    Evaluated in log space so extreme rate/lag combinations neither
    overflow nor lose monotonicity.
    """
    u = -params.theta2 * (t - params.theta3)
    if u > 600.0:
        # xi * e^u dwarfs 1; log1p would overflow in exp first
        log_den = (math.log(params.xi) + u) / params.xi
    else:
        log_den = math.log1p(params.xi * math.exp(u)) / params.xi
    return params.theta1 * math.exp(-log_den)


def trajectory(params: TrajectoryParams, start_year: int, horizon: int) -> CitationSeries:
    """Predicted cumulative counts for years start_year+1 .. start_year+horizon."""
    if horizon < 1:
        raise ContractError(f"horizon must be >= 1, got {horizon}")
    values = [citation_count(params, k) for k in range(1, horizon + 1)]
    return CitationSeries(start_year=start_year, values=np.asarray(values))


def richards_tensor(theta1, theta2, theta3, xi, t: float) -> Tensor:
    """Differentiable Richards curve over batched parameter tensors (B,).

    log1p(xi * e^u) is evaluated as softplus(u + ln xi), which is exact for
    any u and keeps gradients alive where a direct exp would saturate.
    """
    u = ad.mul(ad.neg(theta2), ad.add(Tensor(float(t)), ad.neg(theta3)))
    log_den = ad.div(ad.softplus(ad.add(u, ad.log(xi))), xi)
    return ad.mul(theta1, ad.exp(ad.neg(log_den)))


def lognormal_count(scale: float, mu: float, sigma: float, t: float) -> float:
    """Log-normal CDF curve value: scale * Phi((ln t - mu) / sigma)."""
    if sigma <= 0:
        raise ContractError(f"sigma must be positive, got {sigma}")
    return scale * float(ndtr((math.log(t) - mu) / sigma))


def lognormal_trajectory(params3, start_year: int, horizon: int) -> CitationSeries:
    """Alternative curve head: values[i] = scale * Phi((ln(i+1) - mu) / sigma)."""
    scale, mu, sigma = params3
    values = [lognormal_count(scale, mu, sigma, k) for k in range(1, horizon + 1)]
    return CitationSeries(start_year=start_year, values=np.asarray(values))


_SQRT2 = math.sqrt(2.0)


def lognormal_tensor(scale, mu, sigma, t: float) -> Tensor:
    """Differentiable log-normal curve over batched parameter tensors (B,)."""
    z = ad.div(ad.add(Tensor(math.log(t)), ad.neg(mu)), sigma)
    phi = ad.mul(Tensor(0.5), ad.add(Tensor(1.0), ad.erf(ad.div(z, Tensor(_SQRT2)))))
    return ad.mul(scale, phi)


# ---------------------------------------------------------------------------
# losses


def _as_matrix(series_set) -> np.ndarray:
    if isinstance(series_set, np.ndarray):
        mat = series_set
    elif series_set and isinstance(series_set[0], CitationSeries):
        mat = np.stack([s.values for s in series_set])
    else:
        mat = np.asarray(series_set, dtype=np.float64)
    mat = np.atleast_2d(np.asarray(mat, dtype=np.float64))
    if np.any(mat < 0):
        raise DomainError("citation counts cannot be negative")
    return mat


def _log_residuals(pred, obs) -> np.ndarray:
    p = _as_matrix(pred)
    o = _as_matrix(obs)
    if p.shape != o.shape:
        raise ContractError(f"prediction/observation shapes differ: {p.shape} vs {o.shape}")
    return np.log1p(p) - np.log1p(o)


def male(pred, obs) -> float:
    """Mean absolute log1p error over all publications and years."""
    return float(np.mean(np.abs(_log_residuals(pred, obs))))


def rmsle(pred, obs) -> float:
    """Root mean squared log1p error over all publications and years."""
    d = _log_residuals(pred, obs)
    return float(np.sqrt(np.mean(d * d)))


def male_loss(pred_columns, obs_matrix) -> Tensor:
    """Differentiable MALE from per-year prediction tensors.

    ``pred_columns`` is a list of horizon-many (B,) tensors; ``obs_matrix``
    a constant (B, horizon) array of observed counts.
    """
    obs = np.asarray(obs_matrix, dtype=np.float64)
    if np.any(obs < 0):
        raise DomainError("citation counts cannot be negative")
    total = None
    for k, col in enumerate(pred_columns):
        d = ad.sub(ad.log1p(col), Tensor(np.log1p(obs[:, k])))
        term = ad.mean(ad.abs_(d))
        total = term if total is None else ad.add(total, term)
    return ad.div(total, Tensor(float(len(pred_columns))))
