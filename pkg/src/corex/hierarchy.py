"""Bottom-up layer stacks with certified total correlation bounds.

Each layer compresses the hard labels of the layer below it. The sum of
per-layer objectives is a lower bound on TC of the input data; when every
column is discrete and the top layer has a single factor, adding plug-in
conditional entropies of each level given the next yields an upper bound,
so the data's total correlation is bracketed from both sides.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .data import DISCRETE, ColumnSchema, DataMatrix, as_data_matrix
from .errors import UnsupportedConfigError
from .layer import CorexLayer
from .marginals import SIGMA_FLOOR_SCALE, SMOOTHING

# Stop stacking once a layer explains less than this many nats.
STOP_THRESHOLD = 0.01


def _hard_matrix(hard: np.ndarray, cardinality: int) -> DataMatrix:
    schema = [
        ColumnSchema(
            name=f"Y{j}", kind=DISCRETE, cardinality=cardinality, missing_allowed=False
        )
        for j in range(hard.shape[1])
    ]
    return DataMatrix(schema, hard.astype(np.float64))


def lift_labels(layer: CorexLayer, labels: np.ndarray | None = None) -> DataMatrix:
    """Hard maximum-likelihood labels as a discrete data matrix.

    Uses the layer's stored training labels unless explicit soft labels
    are passed. Argmax ties resolve to the lowest state, so lifting
    already-hard labels reproduces them exactly.
    """
    if labels is None:
        layer._check_fitted()
        labels = layer.labels_
    hard = np.asarray(labels).argmax(axis=2)
    return _hard_matrix(hard, int(layer.cardinality))


def _combo_index(hard: np.ndarray, cardinality: int) -> tuple[np.ndarray, int]:
    """Map joint label rows to dense combo ids; returns (ids, n_combos)."""
    dims = (cardinality,) * hard.shape[1]
    flat = np.ravel_multi_index(tuple(hard.T), dims)
    _, inverse = np.unique(flat, return_inverse=True)
    return inverse, int(inverse.max()) + 1


def _conditional_entropy(
    codes: np.ndarray,
    obs: np.ndarray,
    cardinality: int,
    combo: np.ndarray,
    n_combos: int,
    smoothing: float,
) -> float:
    """Plug-in H(variable | combo) in nats over observed cells."""
    if not obs.any():
        return 0.0
    joint = np.zeros((int(cardinality), n_combos))
    np.add.at(joint, (codes[obs], combo[obs]), 1.0)
    per_combo = joint.sum(axis=0)
    weights = per_combo / per_combo.sum()
    cond = (smoothing / cardinality + joint) / (smoothing + per_combo)[None, :]
    h = -(cond * np.log(cond)).sum(axis=0)
    return float((weights * h).sum())


def _marginal_entropy(
    codes: np.ndarray, obs: np.ndarray, cardinality: int, smoothing: float
) -> float:
    if not obs.any():
        return 0.0
    counts = np.bincount(codes[obs], minlength=int(cardinality)).astype(np.float64)
    p = (smoothing / cardinality + counts) / (smoothing + counts.sum())
    return float(-(p * np.log(p)).sum())


class CorexHierarchy(BaseEstimator, TransformerMixin):
    """Stack of CorexLayer fits, each trained on the previous layer's labels.

    Parameters
    ----------
    layer_factors : factor counts per layer, bottom first (e.g. (20, 3, 1)).
    cardinality : states per factor; an int shared by all layers or one
        value per layer.
    stop_threshold : stop adding layers once a layer's objective falls
        below this many nats; layers already fitted are kept.
    seed : layer k fits with seed + k.
    layer_overrides : optional per-layer dicts of CorexLayer keyword
        overrides (e.g. a different alpha_policy for upper layers);
        factor counts always come from ``layer_factors``.

    Other parameters mirror CorexLayer and apply to every layer.

    After ``fit``: ``layers_``, ``layer_contributions_``, ``lower_bound_``
    (= their sum, also exposed as ``tc_``), ``n_layers_``,
    ``stopped_early_``.
    """

    def __init__(
        self,
        layer_factors: Sequence[int] = (1,),
        cardinality: int | Sequence[int] = 2,
        alpha_policy: str = "tree",
        max_iter: int = 100,
        tol: float = 1e-6,
        restarts: int = 1,
        seed: int = 0,
        stop_threshold: float = STOP_THRESHOLD,
        smoothing: float = SMOOTHING,
        sigma_floor_scale: float = SIGMA_FLOOR_SCALE,
        layer_overrides: Sequence[dict] | None = None,
    ) -> None:
        self.layer_factors = layer_factors
        self.cardinality = cardinality
        self.alpha_policy = alpha_policy
        self.max_iter = max_iter
        self.tol = tol
        self.restarts = restarts
        self.seed = seed
        self.stop_threshold = stop_threshold
        self.smoothing = smoothing
        self.sigma_floor_scale = sigma_floor_scale
        self.layer_overrides = layer_overrides

    def _cardinalities(self) -> list[int]:
        sizes = list(self.layer_factors)
        if not sizes:
            raise ValueError("layer_factors must name at least one layer")
        if isinstance(self.cardinality, (int, np.integer)):
            return [int(self.cardinality)] * len(sizes)
        cards = [int(c) for c in self.cardinality]
        if len(cards) != len(sizes):
            raise ValueError(
                "cardinality must be an int or one value per layer "
                f"({len(cards)} given for {len(sizes)} layers)"
            )
        return cards

    def fit(self, X, y=None) -> "CorexHierarchy":
        sizes = [int(m) for m in self.layer_factors]
        cards = self._cardinalities()
        overrides = [dict(o) for o in (self.layer_overrides or [])]
        if len(overrides) > len(sizes):
            raise ValueError("more layer_overrides than layers")
        if any("n_factors" in o for o in overrides):
            raise ValueError("factor counts come from layer_factors, not overrides")
        dm = as_data_matrix(X)
        layers: list[CorexLayer] = []
        contributions: list[float] = []
        current = dm
        for k, (m_k, card_k) in enumerate(zip(sizes, cards)):
            kwargs = dict(
                n_factors=m_k,
                cardinality=card_k,
                alpha_policy=self.alpha_policy,
                max_iter=self.max_iter,
                tol=self.tol,
                restarts=self.restarts,
                seed=int(self.seed) + k,
                smoothing=self.smoothing,
                sigma_floor_scale=self.sigma_floor_scale,
            )
            if k < len(overrides):
                kwargs.update(overrides[k])
            layer = CorexLayer(**kwargs)
            layer.fit(current)
            layers.append(layer)
            contributions.append(layer.tc_)
            if layer.tc_ < float(self.stop_threshold):
                break
            if k + 1 < len(sizes):
                current = lift_labels(layer)
        self.layers_ = layers
        self.layer_contributions_ = contributions
        self.lower_bound_ = float(sum(contributions))
        self.tc_ = self.lower_bound_
        self.n_layers_ = len(layers)
        self.stopped_early_ = len(layers) < len(sizes)
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "layers_"):
            raise NotFittedError("this CorexHierarchy instance is not fitted yet")

    def _fold(self, X) -> list[np.ndarray]:
        """Hard labels per layer for new data, bottom to top."""
        self._check_fitted()
        current = as_data_matrix(X, schema=self.layers_[0].schema_)
        out = []
        for layer in self.layers_:
            hard = layer.transform(current)
            out.append(hard)
            current = _hard_matrix(hard, int(layer.cardinality))
        return out

    def transform(self, X) -> np.ndarray:
        """Hard labels of the top layer, shape (N, m_top)."""
        return self._fold(X)[-1]

    def layer_labels(self, X) -> list[np.ndarray]:
        """Hard labels at every layer, bottom first."""
        return self._fold(X)

    def score_factors(self, X) -> np.ndarray:
        """First-layer per-factor log partition values (N, m_1)."""
        self._check_fitted()
        return self.layers_[0].score_factors(X)

    def score_samples(self, X) -> np.ndarray:
        """Point-wise explained total correlation against the first layer."""
        self._check_fitted()
        return self.layers_[0].score_samples(X)

    def score(self, X, y=None) -> float:
        return float(np.mean(self.score_samples(X)))

    # -- bounds ---------------------------------------------------------

    def tc_upper_bound(self, X) -> float:
        """Upper bound on TC of discrete data via the fitted stack.

        Sum over layers of the layer objective plus per-column plug-in
        conditional entropies given the next layer's joint hard labels.
        Requires every input column discrete and a single top-layer
        factor; anything else is an unsupported configuration.
        """
        self._check_fitted()
        if int(self.layers_[-1].n_factors) != 1:
            raise UnsupportedConfigError(
                "the upper bound requires a single factor in the top layer"
            )
        dm = as_data_matrix(X, schema=self.layers_[0].schema_)
        if any(col.kind != DISCRETE for col in dm.schema):
            raise UnsupportedConfigError(
                "the upper bound is defined for discrete columns only"
            )
        smoothing = float(self.smoothing)
        total = 0.0
        current = dm
        for layer, contrib in zip(self.layers_, self.layer_contributions_):
            hard = layer.transform(current)
            combo, n_combos = _combo_index(hard, int(layer.cardinality))
            view = current.columnar()
            for pos in range(view.disc_cols.size):
                total += _conditional_entropy(
                    view.disc_codes[:, pos],
                    view.disc_obs[:, pos],
                    int(view.cardinalities[pos]),
                    combo,
                    n_combos,
                    smoothing,
                )
            total += float(contrib)
            current = _hard_matrix(hard, int(layer.cardinality))
        return total

    def entropy_bounds(self, X) -> tuple[float, float | None]:
        """(h_upper, h_lower) bracketing H(X) for discrete data.

        h_upper = sum of plug-in column entropies minus the lower bound.
        h_lower uses the upper bound and is None when that bound's
        preconditions do not hold.
        """
        self._check_fitted()
        dm = as_data_matrix(X, schema=self.layers_[0].schema_)
        if any(col.kind != DISCRETE for col in dm.schema):
            raise UnsupportedConfigError(
                "entropy bounds are defined for discrete columns only"
            )
        view = dm.columnar()
        smoothing = float(self.smoothing)
        h_sum = sum(
            _marginal_entropy(
                view.disc_codes[:, pos],
                view.disc_obs[:, pos],
                int(view.cardinalities[pos]),
                smoothing,
            )
            for pos in range(view.disc_cols.size)
        )
        h_upper = h_sum - self.lower_bound_
        if int(self.layers_[-1].n_factors) != 1:
            return h_upper, None
        return h_upper, h_sum - self.tc_upper_bound(X)
