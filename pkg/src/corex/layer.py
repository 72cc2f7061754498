"""Single-layer latent factor solver.

CorexLayer learns m discrete factors Y_1..Y_m for a data matrix X by
coordinate ascent on the variational objective

    sum_j E[log Z_j(x)],  Z_j(x) = sum_y p(y_j) prod_i (p(y_j|x_i)/p(y_j))^alpha_ij,

which estimates the total correlation the factors explain, in nats. Each
iteration re-estimates the per-column marginals from the current soft
labels, refreshes the column-to-factor weights alpha under the configured
policy, and then recomputes every label distribution in closed form. With
alpha frozen the objective never decreases.

All label updates run in log space with a max shift, so scores spanning
hundreds of nats stay finite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from . import marginals as mg
from .data import ColumnarView, DataMatrix, as_data_matrix, schema_compatible
from .errors import DataError
from .structure import alpha_tree, alpha_unique, mutual_information_table

# The adaptive-alpha stopping rule: give up once the best objective has not
# improved for this many iterations.
ALPHA_WINDOW = 10

_POLICIES = ("tree", "unique", "none")


def init_labels(
    n_samples: int,
    n_factors: int,
    cardinality: int,
    seed: int = 0,
    restart: int = 0,
) -> np.ndarray:
    """Random soft labels: normalized uniform(0.1, 1.0) weights per state.

    Deterministic in (seed, restart); distinct restarts draw distinct
    initializations.
    """
    rng = np.random.default_rng([seed, restart])
    w = rng.uniform(0.1, 1.0, size=(n_samples, n_factors, cardinality))
    return w / w.sum(axis=2, keepdims=True)


def free_energy(log_z: np.ndarray) -> tuple[float, np.ndarray]:
    """Objective from per-sample log partition values: (total, per factor)."""
    log_z = np.asarray(log_z, dtype=np.float64)
    per_factor = log_z.mean(axis=0)
    return float(per_factor.sum()), per_factor


@dataclass
class _ModelArrays:
    """Stacked marginal parameters for one layer, all factors at once."""

    priors: np.ndarray
    disc_tables: np.ndarray
    disc_counts: np.ndarray
    gauss_mu: np.ndarray
    gauss_sigma: np.ndarray
    pooled_mu: np.ndarray
    pooled_sigma: np.ndarray


def _estimate_arrays(
    view: ColumnarView,
    labels: np.ndarray,
    smoothing: float,
    floor_scale: float,
    pooled: tuple[np.ndarray, np.ndarray],
) -> _ModelArrays:
    n, m, k = labels.shape
    nd, nc = view.disc_cols.size, view.cont_cols.size
    priors = np.empty((m, k))
    for j in range(m):
        priors[j] = (smoothing / k + labels[:, j, :].sum(axis=0)) / (smoothing + n)
    disc_tables = np.zeros((m, nd, view.k_max, k))
    disc_counts = np.zeros((nd, view.k_max))
    for j in range(m):
        if nd:
            disc_tables[j], disc_counts = mg.discrete_tables(
                view.disc_codes,
                view.disc_obs,
                view.cardinalities,
                labels[:, j, :],
                priors[j],
                smoothing,
            )
    gauss_mu = np.zeros((m, nc, k))
    gauss_sigma = np.ones((m, nc, k))
    pooled_mu, pooled_sigma = pooled
    for j in range(m):
        if nc:
            gauss_mu[j], gauss_sigma[j] = mg.gaussian_params(
                view.cont_values,
                view.cont_obs,
                labels[:, j, :],
                pooled_mu,
                pooled_sigma,
                floor_scale,
            )
    return _ModelArrays(
        priors=priors,
        disc_tables=disc_tables,
        disc_counts=disc_counts,
        gauss_mu=gauss_mu,
        gauss_sigma=gauss_sigma,
        pooled_mu=pooled_mu,
        pooled_sigma=pooled_sigma,
    )


def _log_ratio_tensors(view: ColumnarView, arrays: _ModelArrays) -> np.ndarray:
    """(m, N, n, k) stack of log ratios; missing cells contribute zeros."""
    m, k = arrays.priors.shape
    n = view.n_samples
    lr = np.zeros((m, n, view.n_variables, k))
    for j in range(m):
        if view.disc_cols.size:
            lr[j][:, view.disc_cols, :] = mg.discrete_log_ratio_tensor(
                view.disc_codes,
                view.disc_obs,
                arrays.disc_tables[j],
                arrays.priors[j],
            )
        if view.cont_cols.size:
            lr[j][:, view.cont_cols, :] = mg.gaussian_log_ratio_tensor(
                view.cont_values,
                view.cont_obs,
                arrays.gauss_mu[j],
                arrays.gauss_sigma[j],
                arrays.priors[j],
            )
    return lr


def _update_pass(
    log_ratios: np.ndarray, priors: np.ndarray, alpha: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """One exact label update; returns (labels, log_z).

    A sample with every column missing scores zero everywhere and falls
    back to the prior.
    """
    m, n, _, k = log_ratios.shape
    labels = np.empty((n, m, k))
    log_z = np.empty((n, m))
    for j in range(m):
        scores = np.log(priors[j])[None, :] + np.einsum(
            "i,lik->lk", alpha[:, j], log_ratios[j]
        )
        shift = scores.max(axis=1, keepdims=True)
        ex = np.exp(scores - shift)
        norm = ex.sum(axis=1)
        labels[:, j, :] = ex / norm[:, None]
        log_z[:, j] = np.log(norm) + shift[:, 0]
    return labels, log_z


def update_labels(
    data: DataMatrix | np.ndarray,
    factor_marginals: list,
    priors: list,
    alpha: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Label update from explicit per-(factor, column) marginal objects.

    ``factor_marginals[j][i]`` must be a DiscreteMarginal or GaussianMarginal
    matching column i's kind. Returns (labels, log_z) of shapes (N, m, k) and
    (N, m).
    """
    dm = as_data_matrix(data)
    view = dm.columnar()
    m = len(factor_marginals)
    prior_arr = np.stack([np.asarray(p.probs, dtype=np.float64) for p in priors])
    k = prior_arr.shape[1]
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (dm.n_variables, m):
        raise ValueError(
            f"alpha shape {alpha.shape} does not match ({dm.n_variables}, {m})"
        )
    nd, nc = view.disc_cols.size, view.cont_cols.size
    arrays = _ModelArrays(
        priors=prior_arr,
        disc_tables=np.zeros((m, nd, view.k_max, k)),
        disc_counts=np.zeros((nd, view.k_max)),
        gauss_mu=np.zeros((m, nc, k)),
        gauss_sigma=np.ones((m, nc, k)),
        pooled_mu=np.zeros(nc),
        pooled_sigma=np.ones(nc),
    )
    for j in range(m):
        if len(factor_marginals[j]) != dm.n_variables:
            raise ValueError("one marginal per column is required for each factor")
        for pos, i in enumerate(view.disc_cols):
            marg = factor_marginals[j][i]
            if not isinstance(marg, mg.DiscreteMarginal):
                raise ValueError(f"column {i} is discrete; marginal kind mismatch")
            k_i = marg.table.shape[0]
            arrays.disc_tables[j, pos, :k_i, :] = marg.table
            arrays.disc_tables[j, pos, k_i:, :] = prior_arr[j]
        for pos, i in enumerate(view.cont_cols):
            marg = factor_marginals[j][i]
            if not isinstance(marg, mg.GaussianMarginal):
                raise ValueError(f"column {i} is continuous; marginal kind mismatch")
            arrays.gauss_mu[j, pos] = marg.mu
            arrays.gauss_sigma[j, pos] = marg.sigma
            arrays.pooled_mu[pos] = marg.pooled_mu
            arrays.pooled_sigma[pos] = marg.pooled_sigma
    lr = _log_ratio_tensors(view, arrays)
    return _update_pass(lr, prior_arr, alpha)


@dataclass
class _FitState:
    arrays: _ModelArrays
    alpha: np.ndarray
    labels: np.ndarray
    log_z: np.ndarray
    trace: list
    trace_factors: np.ndarray
    per_factor: np.ndarray
    n_iter: int
    log_ratios: np.ndarray


class CorexLayer(BaseEstimator, TransformerMixin):
    """One layer of latent factors fit by iterated exact label updates.

    Parameters
    ----------
    n_factors : number of latent factors m.
    cardinality : states per factor (shared within the layer).
    alpha_policy : "tree" (one factor per column), "unique" (counting
        heuristic, weights in [0, 1]) or "none" (keep ``fixed_alpha``).
    fixed_alpha : (n, m) array used when alpha_policy="none"; defaults to
        all ones.
    max_iter, tol : iteration cap and absolute objective change threshold.
    restarts : independent random initializations; the run with the best
        final objective wins.
    seed : base seed; restart r draws from default_rng([seed, r]).
    smoothing : pseudocount for marginal and prior estimation.
    sigma_floor_scale : relative floor for Gaussian standard deviations.

    After ``fit``: ``labels_`` (N, m, k) soft labels, ``alpha_`` (n, m),
    ``mi_`` (n, m), ``tc_`` total objective, ``tc_per_factor_``,
    ``trace_`` per-iteration objectives, ``pointwise_tc_`` per-sample
    scores, ``restart_objectives_``. Factors are ordered by descending
    contribution.
    """

    def __init__(
        self,
        n_factors: int = 1,
        cardinality: int = 2,
        alpha_policy: str = "tree",
        fixed_alpha: np.ndarray | None = None,
        max_iter: int = 100,
        tol: float = 1e-6,
        restarts: int = 1,
        seed: int = 0,
        smoothing: float = mg.SMOOTHING,
        sigma_floor_scale: float = mg.SIGMA_FLOOR_SCALE,
    ) -> None:
        self.n_factors = n_factors
        self.cardinality = cardinality
        self.alpha_policy = alpha_policy
        self.fixed_alpha = fixed_alpha
        self.max_iter = max_iter
        self.tol = tol
        self.restarts = restarts
        self.seed = seed
        self.smoothing = smoothing
        self.sigma_floor_scale = sigma_floor_scale

    # -- fitting ------------------------------------------------------------

    def _validate_params(self) -> None:
        if int(self.n_factors) < 1:
            raise ValueError("n_factors must be at least 1")
        if int(self.cardinality) < 2:
            raise ValueError("cardinality must be at least 2")
        if self.alpha_policy not in _POLICIES:
            raise ValueError(f"alpha_policy must be one of {_POLICIES}")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be at least 1")
        if float(self.tol) < 0:
            raise ValueError("tol must be non-negative")
        if int(self.restarts) < 1:
            raise ValueError("restarts must be at least 1")

    def _initial_alpha(self, n: int, m: int) -> np.ndarray:
        if self.fixed_alpha is None:
            return np.ones((n, m))
        alpha = np.asarray(self.fixed_alpha, dtype=np.float64)
        if alpha.shape != (n, m):
            raise ValueError(
                f"fixed_alpha shape {alpha.shape} does not match ({n}, {m})"
            )
        if alpha.min() < 0.0 or alpha.max() > 1.0:
            raise ValueError("fixed_alpha entries must lie in [0, 1]")
        return alpha

    def _fit_once(self, view: ColumnarView, pooled, restart: int) -> _FitState:
        m, k = int(self.n_factors), int(self.cardinality)
        n = view.n_variables
        adaptive = self.alpha_policy in ("tree", "unique")
        labels = init_labels(view.n_samples, m, k, int(self.seed), restart)
        alpha = None if adaptive else self._initial_alpha(n, m)
        trace: list[float] = []
        trace_factors: list[np.ndarray] = []
        per_factor = np.zeros(m)
        arrays = None
        lr = None
        for _ in range(int(self.max_iter)):
            arrays = _estimate_arrays(
                view, labels, float(self.smoothing), float(self.sigma_floor_scale),
                pooled,
            )
            lr = _log_ratio_tensors(view, arrays)
            if adaptive:
                if self.alpha_policy == "tree":
                    mi = mutual_information_table(view, labels, lr, arrays.priors)
                    alpha = alpha_tree(mi)
                else:
                    alpha = alpha_unique(labels, lr)
            labels, log_z = _update_pass(lr, arrays.priors, alpha)
            per_factor = log_z.mean(axis=0)
            trace.append(float(per_factor.sum()))
            trace_factors.append(per_factor)
            if len(trace) > 1 and abs(trace[-1] - trace[-2]) < float(self.tol):
                break
            if (
                adaptive
                and len(trace) > ALPHA_WINDOW
                and max(trace[-ALPHA_WINDOW:]) <= max(trace[:-ALPHA_WINDOW])
            ):
                break
        return _FitState(
            arrays=arrays,
            alpha=alpha,
            labels=labels,
            log_z=log_z,
            trace=trace,
            trace_factors=np.stack(trace_factors),
            per_factor=per_factor,
            n_iter=len(trace),
            log_ratios=lr,
        )

    def fit(self, X, y=None) -> "CorexLayer":
        self._validate_params()
        dm = as_data_matrix(X)
        view = dm.columnar()
        pooled = mg.pooled_stats(
            view.cont_values, view.cont_obs, float(self.sigma_floor_scale)
        )
        best: _FitState | None = None
        finals: list[float] = []
        for r in range(int(self.restarts)):
            state = self._fit_once(view, pooled, r)
            finals.append(state.trace[-1])
            if best is None or state.trace[-1] > best.trace[-1]:
                best = state
        mi = mutual_information_table(view, best.labels, best.log_ratios, best.arrays.priors)
        order = np.argsort(-best.per_factor, kind="stable")
        self._arrays = _ModelArrays(
            priors=best.arrays.priors[order],
            disc_tables=best.arrays.disc_tables[order],
            disc_counts=best.arrays.disc_counts,
            gauss_mu=best.arrays.gauss_mu[order],
            gauss_sigma=best.arrays.gauss_sigma[order],
            pooled_mu=best.arrays.pooled_mu,
            pooled_sigma=best.arrays.pooled_sigma,
        )
        self.schema_ = list(dm.schema)
        self.n_features_in_ = dm.n_variables
        self.n_samples_ = dm.n_samples
        self.alpha_ = best.alpha[:, order]
        self.mi_ = mi[:, order]
        self.labels_ = best.labels[:, order, :]
        self.log_z_ = best.log_z[:, order]
        self.tc_per_factor_ = best.per_factor[order]
        self.tc_ = float(best.per_factor.sum())
        self.trace_ = list(best.trace)
        self.trace_factors_ = best.trace_factors[:, order]
        self.n_iter_ = best.n_iter
        self.restart_objectives_ = finals
        self.pointwise_tc_ = self.log_z_.sum(axis=1)
        return self

    # -- inference ----------------------------------------------------------

    def _check_fitted(self) -> None:
        if not hasattr(self, "_arrays"):
            raise NotFittedError("this CorexLayer instance is not fitted yet")

    def _prepare(self, X) -> ColumnarView:
        self._check_fitted()
        dm = as_data_matrix(X, schema=self.schema_)
        if not schema_compatible(dm.schema, self.schema_):
            raise DataError("data schema does not match the fitted schema")
        return dm.columnar()

    def _label_pass(self, X) -> tuple[np.ndarray, np.ndarray]:
        view = self._prepare(X)
        lr = _log_ratio_tensors(view, self._arrays)
        return _update_pass(lr, self._arrays.priors, self.alpha_)

    def label_distributions(self, X) -> np.ndarray:
        """Soft labels (N, m, k) from one frozen update pass."""
        labels, _ = self._label_pass(X)
        return labels

    def transform(self, X) -> np.ndarray:
        """Hard labels (N, m); argmax ties resolve to the lowest state."""
        labels, _ = self._label_pass(X)
        return labels.argmax(axis=2)

    def score_factors(self, X) -> np.ndarray:
        """Per-sample, per-factor log partition values (N, m)."""
        _, log_z = self._label_pass(X)
        return log_z

    def score_samples(self, X) -> np.ndarray:
        """Point-wise explained total correlation per sample, sum_j log Z_j."""
        return self.score_factors(X).sum(axis=1)

    def score(self, X, y=None) -> float:
        """Mean point-wise score; equals the objective on the training data."""
        return float(np.mean(self.score_samples(X)))

    def pointwise_tc(self, index: int | None = None):
        """Stored training scores; a single sample's score when indexed."""
        self._check_fitted()
        if index is None:
            return self.pointwise_tc_.copy()
        idx = int(index)
        if idx < 0 or idx >= self.pointwise_tc_.shape[0]:
            raise ValueError(
                f"sample index {idx} out of range for {self.pointwise_tc_.shape[0]} samples"
            )
        return float(self.pointwise_tc_[idx])

    # -- introspection ------------------------------------------------------

    @property
    def priors_(self) -> list[mg.FactorPrior]:
        self._check_fitted()
        return [mg.FactorPrior(self._arrays.priors[j]) for j in range(int(self.n_factors))]

    @property
    def marginals_(self) -> list[list]:
        """Per-factor, per-column marginal objects in column order."""
        self._check_fitted()
        view_cols: dict[int, tuple[str, int]] = {}
        nd = 0
        for i, col in enumerate(self.schema_):
            if col.kind == "discrete":
                view_cols[i] = ("d", nd)
                nd += 1
        nc = 0
        for i, col in enumerate(self.schema_):
            if col.kind == "continuous":
                view_cols[i] = ("c", nc)
                nc += 1
        out = []
        for j in range(int(self.n_factors)):
            row = []
            for i, col in enumerate(self.schema_):
                kind, pos = view_cols[i]
                if kind == "d":
                    k_i = col.cardinality
                    row.append(
                        mg.DiscreteMarginal(
                            table=self._arrays.disc_tables[j, pos, :k_i, :].copy(),
                            counts=self._arrays.disc_counts[pos, :k_i].copy(),
                        )
                    )
                else:
                    row.append(
                        mg.GaussianMarginal(
                            mu=self._arrays.gauss_mu[j, pos].copy(),
                            sigma=self._arrays.gauss_sigma[j, pos].copy(),
                            pooled_mu=float(self._arrays.pooled_mu[pos]),
                            pooled_sigma=float(self._arrays.pooled_sigma[pos]),
                        )
                    )
            out.append(row)
        return out
