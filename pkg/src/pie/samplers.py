"""Samplers for tempered shard posteriors.

The four conjugate families admit exact draws: the tempering exponent simply
rescales the sufficient statistics entering the Gamma/Beta/normal-inverse-
gamma updates.  A random-walk Metropolis chain covers custom targets.  Every
sampler is a pure function of its inputs and seed, with no cross-shard state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.linalg import solve_triangular

from . import rng
from .errors import ConfigError, DataError, NumericError
from .models import TemperedTarget


@dataclass(frozen=True, eq=False)
class DrawMatrix:
    """T x d matrix of posterior draws for one shard or one combined posterior."""

    values: np.ndarray
    shard_id: Optional[int] = None
    seed_used: Optional[int] = None
    accept_rate: Optional[float] = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] < 1:
            raise ConfigError(f"draws must be a T x d matrix, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise NumericError("draw matrix contains non-finite entries")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def column(self, j: int) -> np.ndarray:
        return self.values[:, j]


@dataclass(frozen=True)
class ChainConfig:
    """Random-walk Metropolis chain settings.

    Defaults mirror the usual regime for this kind of study: 10,000
    iterations, the first half discarded, every fifth sample retained.
    """

    T_total: int = 10000
    burn_fraction: float = 0.5
    thin: int = 5
    proposal_scale: Union[float, str] = "auto"
    seed: int = 0

    def __post_init__(self):
        if self.T_total < 1:
            raise ConfigError("T_total must be >= 1")
        if not 0.0 <= self.burn_fraction < 1.0:
            raise ConfigError("burn_fraction must lie in [0, 1)")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")
        if self.retained < 2:
            raise ConfigError(
                "chain config retains fewer than 2 draws; increase T_total"
            )
        if self.proposal_scale != "auto":
            s = float(self.proposal_scale)
            if not (math.isfinite(s) and s > 0):
                raise ConfigError("proposal_scale must be positive or 'auto'")
            object.__setattr__(self, "proposal_scale", s)

    @property
    def retained(self) -> int:
        return int(self.T_total * (1.0 - self.burn_fraction) / self.thin)


def _check_shard(shard_y, temper, a, b) -> np.ndarray:
    y = np.asarray(shard_y, dtype=float).ravel()
    if y.size == 0:
        raise DataError("empty shard")
    if not np.all(np.isfinite(y)):
        raise DataError("shard contains non-finite values")
    if a <= 0 or b <= 0:
        raise ConfigError(f"hyperparameters must be positive, got a={a}, b={b}")
    if not (math.isfinite(temper) and temper >= 1.0):
        raise ConfigError("temper must be a finite real >= 1")
    return y


def _check_T(T: int):
    if T < 1:
        raise ConfigError("number of draws T must be >= 1")


def poisson_gamma_params(shard_y, temper, a, b) -> tuple[float, float]:
    """(shape, rate) of the tempered Poisson-count shard posterior."""
    y = _check_shard(shard_y, temper, a, b)
    if np.any(y < 0) or np.any(y != np.floor(y)):
        raise DataError("poisson-gamma shard must contain nonnegative counts")
    return temper * y.sum() + a, temper * y.size + b


def exponential_gamma_params(shard_y, temper, a, b) -> tuple[float, float]:
    """(shape, rate) of the tempered exponential-rate shard posterior."""
    y = _check_shard(shard_y, temper, a, b)
    if np.any(y <= 0):
        raise DataError("exponential-gamma shard must contain positive values")
    return temper * y.size + a, temper * y.sum() + b


def bernoulli_beta_params(shard_y, temper, a, b) -> tuple[float, float]:
    """(alpha, beta) of the tempered Bernoulli-probability shard posterior."""
    y = _check_shard(shard_y, temper, a, b)
    if np.any((y != 0) & (y != 1)):
        raise DataError("bernoulli-beta shard must be binary")
    return temper * y.sum() + a, temper * (y.size - y.sum()) + b


def sample_poisson_gamma(shard_y, temper, a, b, T, seed, shard_id=None) -> DrawMatrix:
    """Exact draws from the tempered Poisson-count shard posterior."""
    _check_T(T)
    shape, rate = poisson_gamma_params(shard_y, temper, a, b)
    draws = rng.stream(seed).gamma(shape, 1.0 / rate, size=T)
    return DrawMatrix(draws, shard_id=shard_id, seed_used=seed)


def sample_exponential_gamma(shard_y, temper, a, b, T, seed, shard_id=None) -> DrawMatrix:
    """Exact draws from the tempered exponential-rate shard posterior."""
    _check_T(T)
    shape, rate = exponential_gamma_params(shard_y, temper, a, b)
    draws = rng.stream(seed).gamma(shape, 1.0 / rate, size=T)
    return DrawMatrix(draws, shard_id=shard_id, seed_used=seed)


def sample_bernoulli_beta(shard_y, temper, a, b, T, seed, shard_id=None) -> DrawMatrix:
    """Exact draws from the tempered Bernoulli-probability shard posterior."""
    _check_T(T)
    alpha, beta = bernoulli_beta_params(shard_y, temper, a, b)
    draws = rng.stream(seed).beta(alpha, beta, size=T)
    return DrawMatrix(draws, shard_id=shard_id, seed_used=seed)


@dataclass(frozen=True, eq=False)
class NormalLinearPosterior:
    """Closed-form tempered posterior for the normal linear model.

    The noise variance is inverse-gamma distributed with the given shape and
    rate; conditionally on it, the coefficients are normal with the given
    location and precision-scaled covariance.  Marginally the coefficients
    follow a multivariate t with ``2 * noise_shape`` degrees of freedom and
    covariance ``noise_rate / (noise_shape - 1) * inv(coef_precision)``.
    """

    coef_location: np.ndarray
    coef_precision: np.ndarray
    noise_shape: float
    noise_rate: float

    def coef_covariance(self) -> np.ndarray:
        return self.noise_rate / (self.noise_shape - 1.0) \
            * np.linalg.inv(self.coef_precision)

    def noise_variance_mean(self) -> float:
        return self.noise_rate / (self.noise_shape - 1.0)

    def noise_variance_var(self) -> float:
        s, r = self.noise_shape, self.noise_rate
        return r * r / ((s - 1.0) ** 2 * (s - 2.0))


def normal_linear_nig_params(y, Z, temper, mu_star, omega, a, b) -> NormalLinearPosterior:
    """Conjugate update for the tempered normal linear shard posterior.

    Completes the square in the coefficients, so the inverse-gamma rate is
    exact for any prior location, not only a centered one.
    """
    y = np.asarray(y, dtype=float).ravel()
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if y.size == 0:
        raise DataError("empty shard")
    if Z.shape[0] != y.size:
        raise ConfigError(f"design has {Z.shape[0]} rows for {y.size} responses")
    if a <= 4 or b <= 0:
        raise ConfigError("normal-linear-nig requires a > 4 and b > 0")
    if not (math.isfinite(temper) and temper >= 1.0):
        raise ConfigError("temper must be a finite real >= 1")
    mu_star = np.atleast_1d(np.asarray(mu_star, dtype=float))
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    p = Z.shape[1]
    if mu_star.size != p or omega.shape != (p, p):
        raise ConfigError("mu_star and omega must match the design dimension")
    try:
        omega_inv = np.linalg.inv(omega)
    except np.linalg.LinAlgError:
        raise NumericError("singular prior covariance omega") from None
    precision = temper * (Z.T @ Z) + omega_inv
    rhs = temper * (Z.T @ y) + omega_inv @ mu_star
    try:
        location = np.linalg.solve(precision, rhs)
    except np.linalg.LinAlgError:
        raise NumericError(
            "singular precision matrix temper * Z'Z + inv(omega)"
        ) from None
    m = y.size
    bstar = b + mu_star @ omega_inv @ mu_star + temper * (y @ y) - rhs @ location
    if bstar <= 0:
        raise NumericError("nonpositive posterior rate; data or prior ill-posed")
    return NormalLinearPosterior(
        coef_location=location,
        coef_precision=precision,
        noise_shape=(a + temper * m) / 2.0,
        noise_rate=bstar / 2.0,
    )


def sample_normal_linear_nig(y, Z, temper, mu_star, omega, a, b, T, seed,
                             shard_id=None) -> DrawMatrix:
    """Exact draws of (coefficients, noise variance) for the normal linear model.

    Draws the noise variance from its inverse gamma, then the coefficients
    from the conditional normal, which reproduces the marginal multivariate-t
    law without a dedicated t sampler.
    """
    _check_T(T)
    post = normal_linear_nig_params(y, Z, temper, mu_star, omega, a, b)
    p = post.coef_location.size
    try:
        L = np.linalg.cholesky(post.coef_precision)
    except np.linalg.LinAlgError:
        raise NumericError(
            "singular precision matrix temper * Z'Z + inv(omega)"
        ) from None
    g = rng.stream(seed)
    sigma2 = 1.0 / g.gamma(post.noise_shape, 1.0 / post.noise_rate, size=T)
    z = g.standard_normal((T, p))
    # L^{-T} z has covariance inv(precision)
    white = solve_triangular(L, z.T, lower=True, trans="T").T
    beta = post.coef_location + np.sqrt(sigma2)[:, None] * white
    return DrawMatrix(np.column_stack([beta, sigma2]), shard_id=shard_id,
                      seed_used=seed)


_TARGET_ACCEPT = 0.234
_ADAPT_BATCH = 50


def sample_metropolis(target: TemperedTarget, init, cfg: ChainConfig,
                      shard_id=None) -> DrawMatrix:
    """Isotropic Gaussian random-walk Metropolis over a tempered target.

    Burn-in is discarded and thinning applied.  With ``proposal_scale="auto"``
    the burn-in phase adapts the step size toward acceptance rate 0.234 and
    freezes it before any retained draw; the reported ``accept_rate`` covers
    only the frozen phase.  Bit-identical output for identical (inputs, cfg).
    """
    theta = np.atleast_1d(np.asarray(init, dtype=float)).copy()
    d = theta.size
    lp = target.log_density(theta)
    if not np.isfinite(lp):
        raise NumericError(f"target is not finite at the initial point {init!r}")

    auto = cfg.proposal_scale == "auto"
    scale = 2.38 / math.sqrt(d) if auto else float(cfg.proposal_scale)
    n_burn = int(cfg.T_total * cfg.burn_fraction)
    n_post = cfg.T_total - n_burn
    g = rng.stream(rng.CHAIN, cfg.seed)

    def run_phase(n_steps, adapt):
        nonlocal theta, lp, scale
        states = np.empty((n_steps, d))
        accepted = 0
        done = 0
        batch = 0
        while done < n_steps:
            block = min(_ADAPT_BATCH, n_steps - done)
            z = g.standard_normal((block, d))
            logu = np.log(g.random(block))
            acc_block = 0
            for i in range(block):
                prop = theta + scale * z[i]
                lp_prop = target.log_density(prop)
                if logu[i] < lp_prop - lp:
                    theta, lp = prop, lp_prop
                    acc_block += 1
                states[done + i] = theta
            done += block
            accepted += acc_block
            batch += 1
            if adapt:
                # damped log-scale update toward the target acceptance rate
                step = min(0.5, 1.0 / math.sqrt(batch))
                scale *= math.exp(step * (acc_block / block - _TARGET_ACCEPT))
        return states, accepted

    if n_burn:
        run_phase(n_burn, adapt=auto)
    states, accepted = run_phase(n_post, adapt=False)
    kept = states[cfg.thin - 1::cfg.thin]
    if kept.shape[0] == 0:
        raise ConfigError("chain retained zero draws")
    return DrawMatrix(kept, shard_id=shard_id, seed_used=cfg.seed,
                      accept_rate=accepted / n_post)
