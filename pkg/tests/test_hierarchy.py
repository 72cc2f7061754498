"""Layer stacking, lifting, and the two-sided total correlation bounds."""

import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from corex import (
    CorexHierarchy,
    CorexLayer,
    UnsupportedConfigError,
    as_data_matrix,
    empirical_joint,
    entropy,
    lift_labels,
    total_correlation,
)

LN2 = math.log(2.0)


def xor_driver_data(seed=0, n_samples=500, block=6, flip=0.02):
    """Three blocks of noisy binary copies; the third driver is the XOR of
    the first two, so layer 2 has ln 2 nats left to explain."""
    rng = np.random.default_rng(seed)
    z0 = rng.integers(0, 2, n_samples)
    z1 = rng.integers(0, 2, n_samples)
    z2 = z0 ^ z1
    cols = [z0] * block + [z1] * block + [z2] * block
    flips = (rng.random((n_samples, 3 * block)) < flip).astype(int)
    x = np.column_stack(cols) ^ flips
    return as_data_matrix(x), np.column_stack([z0, z1, z2])


def fit_xor_stack():
    data, drivers = xor_driver_data()
    hier = CorexHierarchy(
        layer_factors=(3, 1), alpha_policy="tree", restarts=5, seed=0
    ).fit(data)
    return data, drivers, hier


# --- lifting ------------------------------------------------------------------


def test_lift_uses_hard_argmax_with_tie_to_lowest():
    layer = CorexLayer(n_factors=2, cardinality=3)
    layer.fit(as_data_matrix(np.array([[0, 1], [1, 0], [1, 1], [0, 0]] * 5)))
    soft = np.array(
        [
            [[0.2, 0.5, 0.3], [0.4, 0.4, 0.2]],
            [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
        ]
    )
    lifted = lift_labels(layer, soft)
    np.testing.assert_array_equal(lifted.values, [[1.0, 0.0], [0.0, 2.0]])
    assert all(c.kind == "discrete" for c in lifted.schema)
    assert all(c.cardinality == 3 for c in lifted.schema)
    assert all(not c.missing_allowed for c in lifted.schema)
    assert [c.name for c in lifted.schema] == ["Y0", "Y1"]


def test_lift_is_idempotent_on_hard_labels():
    layer = CorexLayer(n_factors=1, cardinality=2)
    layer.fit(as_data_matrix(np.array([[0], [1]] * 10)))
    hard = np.zeros((4, 1, 2))
    hard[[0, 3], 0, 1] = 1.0
    hard[[1, 2], 0, 0] = 1.0
    once = lift_labels(layer, hard)
    again = lift_labels(layer, np.eye(2)[once.values.astype(int)])
    np.testing.assert_array_equal(once.values, again.values)


def test_lift_defaults_to_stored_training_labels():
    data = as_data_matrix(np.array([[0, 0], [1, 1]] * 20))
    layer = CorexLayer(n_factors=1, seed=0).fit(data)
    lifted = lift_labels(layer)
    np.testing.assert_array_equal(
        lifted.values.astype(int), layer.labels_.argmax(axis=2)
    )
    with pytest.raises(NotFittedError):
        lift_labels(CorexLayer())


# --- fitting a stack -----------------------------------------------------------


def test_xor_stack_recovers_structure_and_brackets_tc():
    data, drivers, hier = fit_xor_stack()
    assert hier.n_layers_ == 2
    assert not hier.stopped_early_
    # layer 1 clusters the three blocks exactly
    blocks = np.repeat([0, 1, 2], 6)
    cols = hier.layers_[0].alpha_.argmax(axis=1)
    for b in range(3):
        factors = set(cols[blocks == b])
        assert len(factors) == 1
    assert len(set(cols)) == 3
    # the lifted labels match the drivers up to per-factor relabeling
    lifted = lift_labels(hier.layers_[0]).values.astype(int)
    for j in range(3):
        agree = float((lifted[:, cols[blocks == j][0]] == drivers[:, j]).mean())
        assert max(agree, 1.0 - agree) > 0.97
    # the XOR dependence among drivers is only visible to layer 2
    assert hier.layer_contributions_[1] > 0.05
    assert hier.lower_bound_ == pytest.approx(
        sum(hier.layer_contributions_), abs=1e-12
    )
    assert hier.tc_ == hier.lower_bound_
    # sandwich against the exact empirical joint
    tc_emp = total_correlation(empirical_joint(data))
    upper = hier.tc_upper_bound(data)
    assert hier.lower_bound_ <= tc_emp + 1e-6
    assert tc_emp <= upper + 1e-6


def test_added_layers_never_bleed_the_bound():
    _, _, hier = fit_xor_stack()
    assert all(c >= -1e-9 for c in hier.layer_contributions_[1:])


def test_independent_data_stops_after_one_layer():
    rng = np.random.default_rng(5)
    data = as_data_matrix(rng.integers(0, 2, (500, 4)))
    hier = CorexHierarchy(layer_factors=(2, 1), alpha_policy="tree", seed=0).fit(
        data
    )
    assert hier.n_layers_ == 1
    assert hier.stopped_early_
    assert len(hier.layer_contributions_) == 1
    assert abs(hier.layer_contributions_[0]) < 0.01


def test_perfect_chain_bounds_are_tight():
    rng = np.random.default_rng(1)
    data = as_data_matrix(np.repeat(rng.integers(0, 2, (300, 1)), 6, axis=1))
    hier = CorexHierarchy(layer_factors=(1,), seed=0).fit(data)
    upper = hier.tc_upper_bound(data)
    tc_emp = total_correlation(empirical_joint(data))
    assert hier.lower_bound_ <= tc_emp + 1e-6 <= upper + 2e-6
    assert upper - hier.lower_bound_ < 0.01
    h_upper, h_lower = hier.entropy_bounds(data)
    assert h_lower is not None
    h_emp = entropy(empirical_joint(data))
    assert h_lower - 1e-6 <= h_emp <= h_upper + 1e-6
    assert h_upper - h_lower < 0.01


def test_entropy_bounds_on_named_examples():
    rng = np.random.default_rng(5)
    # independent fair bits: nothing to explain, H is about n ln 2
    free = as_data_matrix(rng.integers(0, 2, (500, 4)))
    hier = CorexHierarchy(layer_factors=(2, 1), alpha_policy="tree", seed=0).fit(
        free
    )
    h_upper, h_lower = hier.entropy_bounds(free)
    assert h_upper == pytest.approx(4 * LN2, abs=0.02)
    # the stack stopped before its m=1 top, so no lower entropy bound
    assert h_lower is None
    # one duplicated fair bit, one-factor model: both bounds pin ln 2
    pair = as_data_matrix(np.repeat(rng.integers(0, 2, (400, 1)), 2, axis=1))
    tight = CorexHierarchy(layer_factors=(1,), seed=0).fit(pair)
    h_upper, h_lower = tight.entropy_bounds(pair)
    assert h_upper == pytest.approx(LN2, abs=0.02)
    assert h_lower == pytest.approx(LN2, abs=0.02)


def test_upper_bound_preconditions():
    rng = np.random.default_rng(2)
    disc = as_data_matrix(rng.integers(0, 2, (100, 4)))
    wide_top = CorexHierarchy(
        layer_factors=(2,), alpha_policy="tree", seed=0, stop_threshold=0.0
    ).fit(disc)
    with pytest.raises(UnsupportedConfigError, match="single factor"):
        wide_top.tc_upper_bound(disc)
    h_upper, h_lower = wide_top.entropy_bounds(disc)
    assert h_lower is None and np.isfinite(h_upper)
    cont = as_data_matrix(rng.normal(size=(100, 4)))
    gauss = CorexHierarchy(layer_factors=(1,), seed=0).fit(cont)
    with pytest.raises(UnsupportedConfigError, match="discrete"):
        gauss.tc_upper_bound(cont)
    with pytest.raises(UnsupportedConfigError, match="discrete"):
        gauss.entropy_bounds(cont)


# --- inference consistency ---------------------------------------------------------


def test_transform_matches_stored_top_labels():
    data, _, hier = fit_xor_stack()
    np.testing.assert_array_equal(
        hier.transform(data), hier.layers_[-1].labels_.argmax(axis=2)
    )
    per_layer = hier.layer_labels(data)
    assert [h.shape for h in per_layer] == [(500, 3), (500, 1)]
    np.testing.assert_array_equal(per_layer[-1], hier.transform(data))
    np.testing.assert_array_equal(
        per_layer[0], hier.layers_[0].labels_.argmax(axis=2)
    )


def test_scores_delegate_to_first_layer():
    data, _, hier = fit_xor_stack()
    first = hier.layers_[0]
    np.testing.assert_array_equal(
        hier.score_samples(data), first.score_samples(data)
    )
    assert hier.score(data) == pytest.approx(first.tc_, abs=1e-12)
    assert hier.score_factors(data).shape == (500, 3)


def test_unfitted_hierarchy_raises():
    hier = CorexHierarchy()
    with pytest.raises(NotFittedError):
        hier.transform(np.zeros((2, 2), dtype=int))
    with pytest.raises(NotFittedError):
        hier.tc_upper_bound(np.zeros((2, 2), dtype=int))


# --- configuration -----------------------------------------------------------------


def test_layer_seeds_and_cardinalities_step_per_layer():
    data = xor_driver_data()[0]
    hier = CorexHierarchy(
        layer_factors=(2, 1),
        cardinality=(2, 3),
        alpha_policy="tree",
        seed=7,
        stop_threshold=0.0,
    ).fit(data)
    assert [l.seed for l in hier.layers_] == [7, 8]
    assert [l.cardinality for l in hier.layers_] == [2, 3]
    with pytest.raises(ValueError, match="one value per layer"):
        CorexHierarchy(layer_factors=(2, 1), cardinality=(2, 2, 2)).fit(data)
    with pytest.raises(ValueError):
        CorexHierarchy(layer_factors=()).fit(data)


def test_layer_overrides_apply_per_layer():
    data = xor_driver_data()[0]
    hier = CorexHierarchy(
        layer_factors=(2, 1),
        alpha_policy="unique",
        layer_overrides=[{}, {"alpha_policy": "tree", "max_iter": 7}],
        stop_threshold=0.0,
        seed=0,
    ).fit(data)
    assert hier.layers_[0].alpha_policy == "unique"
    assert hier.layers_[1].alpha_policy == "tree"
    assert hier.layers_[1].max_iter == 7
    with pytest.raises(ValueError, match="layer_factors"):
        CorexHierarchy(
            layer_factors=(2, 1), layer_overrides=[{"n_factors": 3}]
        ).fit(data)
    with pytest.raises(ValueError, match="more layer_overrides"):
        CorexHierarchy(
            layer_factors=(1,), layer_overrides=[{}, {}]
        ).fit(data)


def test_hierarchy_params_round_trip():
    hier = CorexHierarchy(
        layer_factors=(4, 1), cardinality=3, alpha_policy="unique", seed=2
    )
    twin = clone(hier)
    assert twin.get_params() == hier.get_params()
    twin.set_params(stop_threshold=0.5)
    assert twin.stop_threshold == 0.5
