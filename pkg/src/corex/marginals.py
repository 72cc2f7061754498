"""Per-variable marginal models linking data columns to latent factors.

For each (column i, factor j) pair the solver keeps an estimate of
p(y_j | x_i), used only through the density ratio p(y_j | x_i) / p(y_j),
which by Bayes' rule equals p(x_i | y_j) / p(x_i). Discrete columns store
that ratio as a smoothed table; continuous columns parametrize
x_i | y_j = k as a Gaussian and evaluate p(x_i) through the prior-weighted
mixture those Gaussians imply. Missing cells always yield a zero log ratio,
so they drop out of every product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Dirichlet-style pseudocount applied to every label-weighted count. Keeps
# ratios finite on rare values without visibly biasing dense ones.
SMOOTHING = 1e-3

# Lower bound on conditional standard deviations, relative to the column
# scale: sigma_floor = SIGMA_FLOOR_SCALE * max(1, pooled_sigma).
SIGMA_FLOOR_SCALE = 1e-6

_LOG_2PI = float(np.log(2.0 * np.pi))
_ZERO_WEIGHT = 1e-12


@dataclass(frozen=True)
class FactorPrior:
    """Current marginal label distribution p(y_j)."""

    probs: np.ndarray


@dataclass(frozen=True)
class DiscreteMarginal:
    """Row-stochastic table p(y_j | x_i = v) plus observed value counts."""

    table: np.ndarray
    counts: np.ndarray


@dataclass(frozen=True)
class GaussianMarginal:
    """Per-state Gaussian fit of x_i | y_j = k plus pooled column stats."""

    mu: np.ndarray
    sigma: np.ndarray
    pooled_mu: float
    pooled_sigma: float


def estimate_prior(labels: np.ndarray, smoothing: float = SMOOTHING) -> FactorPrior:
    """Label mean over samples, smoothed toward uniform by ``smoothing``."""
    labels = np.asarray(labels, dtype=np.float64)
    n, k = labels.shape
    probs = (smoothing / k + labels.sum(axis=0)) / (smoothing + n)
    return FactorPrior(probs=probs)


def estimate_discrete(
    codes: np.ndarray,
    observed: np.ndarray,
    cardinality: int,
    labels: np.ndarray,
    smoothing: float = SMOOTHING,
) -> tuple[DiscreteMarginal, FactorPrior]:
    """Label-weighted conditional label distribution for one discrete column.

    p(y | x_i = v) = (smoothing/k + sum_{l: x_i=v} p(y | x^l))
                     / (smoothing + count(v)).
    Values never observed fall back to the prior row, so their log ratio
    vanishes. Missing cells are excluded from all counts.
    """
    prior = estimate_prior(labels, smoothing)
    tables, _ = discrete_tables(
        codes.reshape(-1, 1),
        observed.reshape(-1, 1),
        np.array([cardinality]),
        labels,
        prior.probs,
        smoothing,
    )
    counts = np.bincount(
        codes[observed].astype(np.int64), minlength=cardinality
    ).astype(np.float64)
    return DiscreteMarginal(table=tables[0, :cardinality], counts=counts), prior


def estimate_gaussian(
    values: np.ndarray,
    observed: np.ndarray,
    labels: np.ndarray,
    floor_scale: float = SIGMA_FLOOR_SCALE,
) -> GaussianMarginal:
    """Label-weighted Gaussian fit of one continuous column.

    States with no effective weight inherit the pooled statistics; all
    standard deviations are clamped to the column's sigma floor.
    """
    pooled_mu, pooled_sigma = pooled_stats(
        values.reshape(-1, 1), observed.reshape(-1, 1), floor_scale
    )
    mu, sigma = gaussian_params(
        values.reshape(-1, 1),
        observed.reshape(-1, 1),
        labels,
        pooled_mu,
        pooled_sigma,
        floor_scale,
    )
    return GaussianMarginal(
        mu=mu[0],
        sigma=sigma[0],
        pooled_mu=float(pooled_mu[0]),
        pooled_sigma=float(pooled_sigma[0]),
    )


def log_ratio(
    marginal: DiscreteMarginal | GaussianMarginal,
    prior: FactorPrior,
    x_value: float | int | None,
) -> np.ndarray:
    """log(p(y | x_i) / p(y)) for a single cell; zeros when x_value is missing.

    Continuous columns evaluate log(p(x_i | y) / p(x_i)) with p(x_i) the
    prior-weighted mixture of the per-state Gaussians, which is the same
    quantity by Bayes' rule. The result is always finite.
    """
    k = prior.probs.shape[0]
    if x_value is None:
        return np.zeros(k)
    if isinstance(marginal, DiscreteMarginal):
        v = int(x_value)
        if v < 0 or v >= marginal.table.shape[0]:
            raise ValueError(f"value {v} outside the column alphabet")
        return np.log(marginal.table[v]) - np.log(prior.probs)
    x = float(x_value)
    if np.isnan(x):
        return np.zeros(k)
    log_comp = (
        -np.log(marginal.sigma)
        - 0.5 * ((x - marginal.mu) / marginal.sigma) ** 2
        - 0.5 * _LOG_2PI
    )
    weighted = np.log(prior.probs) + log_comp
    shift = weighted.max()
    log_mix = shift + np.log(np.exp(weighted - shift).sum())
    return log_comp - log_mix


# ---------------------------------------------------------------------------
# Vectorized forms used by the layer solver. Shapes: N samples, d columns of
# one kind, k label states.


def discrete_tables(
    codes: np.ndarray,
    observed: np.ndarray,
    cardinalities: np.ndarray,
    labels: np.ndarray,
    prior: np.ndarray,
    smoothing: float = SMOOTHING,
) -> tuple[np.ndarray, np.ndarray]:
    """Smoothed p(y | x_i = v) tables for a block of discrete columns.

    Returns (tables, counts) with tables of shape (d, k_max, k); rows for
    unobserved values hold the prior.
    """
    n, d = codes.shape
    k = labels.shape[1]
    k_max = int(cardinalities.max()) if d else 0
    tables = np.empty((d, k_max, k))
    counts = np.empty((d, k_max))
    for v in range(k_max):
        w_v = ((codes == v) & observed).astype(np.float64)
        c_v = w_v.sum(axis=0)
        s_v = w_v.T @ labels
        tables[:, v, :] = (smoothing / k + s_v) / (smoothing + c_v)[:, None]
        counts[:, v] = c_v
    unseen = counts <= 0.0
    if unseen.any():
        tables[unseen] = prior
    return tables, counts


def pooled_stats(
    values: np.ndarray, observed: np.ndarray, floor_scale: float = SIGMA_FLOOR_SCALE
) -> tuple[np.ndarray, np.ndarray]:
    """Unweighted mean and floored standard deviation per continuous column."""
    obs = observed.astype(np.float64)
    count = np.maximum(obs.sum(axis=0), 1.0)
    mu = (values * obs).sum(axis=0) / count
    var = (values**2 * obs).sum(axis=0) / count - mu**2
    sigma = np.sqrt(np.maximum(var, 0.0))
    floor = floor_scale * np.maximum(1.0, sigma)
    return mu, np.maximum(sigma, floor)


def gaussian_params(
    values: np.ndarray,
    observed: np.ndarray,
    labels: np.ndarray,
    pooled_mu: np.ndarray,
    pooled_sigma: np.ndarray,
    floor_scale: float = SIGMA_FLOOR_SCALE,
) -> tuple[np.ndarray, np.ndarray]:
    """Label-weighted Gaussian parameters for a block of continuous columns.

    Returns (mu, sigma) of shape (d, k). States whose total weight vanishes
    fall back to the pooled statistics.
    """
    obs = observed.astype(np.float64)
    x = values * obs
    w_sum = obs.T @ labels
    with np.errstate(invalid="ignore", divide="ignore"):
        mu = (x.T @ labels) / w_sum
        ex2 = ((values**2 * obs).T @ labels) / w_sum
    var = np.maximum(ex2 - mu**2, 0.0)
    sigma = np.sqrt(var)
    empty = w_sum <= _ZERO_WEIGHT
    if empty.any():
        mu = np.where(empty, pooled_mu[:, None], mu)
        sigma = np.where(empty, pooled_sigma[:, None], sigma)
    floor = floor_scale * np.maximum(1.0, pooled_sigma)
    sigma = np.maximum(sigma, floor[:, None])
    return mu, sigma


def discrete_log_ratio_tensor(
    codes: np.ndarray,
    observed: np.ndarray,
    tables: np.ndarray,
    prior: np.ndarray,
) -> np.ndarray:
    """log(p(y | x_i) / p(y)) per sample and discrete column, (N, d, k)."""
    n, d = codes.shape
    if d == 0:
        return np.zeros((n, 0, prior.shape[0]))
    lut = np.log(tables) - np.log(prior)[None, None, :]
    out = lut[np.arange(d)[None, :], codes]
    out[~observed] = 0.0
    return out


def gaussian_log_ratio_tensor(
    values: np.ndarray,
    observed: np.ndarray,
    mu: np.ndarray,
    sigma: np.ndarray,
    prior: np.ndarray,
) -> np.ndarray:
    """log(p(x_i | y) / p(x_i)) per sample and continuous column, (N, d, k).

    The denominator is the mixture sum_k p(y=k) N(x; mu_k, sigma_k) implied
    by the current prior and per-state fits.
    """
    n, d = values.shape
    if d == 0:
        return np.zeros((n, 0, prior.shape[0]))
    z = (values[:, :, None] - mu[None]) / sigma[None]
    log_comp = -np.log(sigma)[None] - 0.5 * z**2 - 0.5 * _LOG_2PI
    weighted = np.log(prior)[None, None, :] + log_comp
    shift = weighted.max(axis=2, keepdims=True)
    log_mix = shift[..., 0] + np.log(np.exp(weighted - shift).sum(axis=2))
    out = log_comp - log_mix[:, :, None]
    out[~observed] = 0.0
    return out
