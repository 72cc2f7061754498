"""Exact information measures on small discrete joint distributions.

Everything here works on an explicit joint probability table, so the results
are exact up to float64 rounding. The intended use is validation: reference
values for the variational machinery in the rest of the package. State spaces
are capped at 2**20 cells; anything larger is rejected rather than
approximated.

All quantities are in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

MAX_STATES = 1 << 20
# Above this many cells, entropy sums switch to compensated summation
# (math.fsum) so 1e-9 tolerances stay honest.
_FSUM_CELLS = 1 << 12

_SUM_TOL = 1e-12


@dataclass(frozen=True)
class JointTable:
    """Immutable joint distribution over a finite set of discrete variables.

    probabilities is flat in C order: the state (v_0, ..., v_{n-1}) sits at
    index sum_d v_d * prod(cardinalities[d+1:]).
    """

    cardinalities: tuple[int, ...]
    probabilities: np.ndarray

    def __post_init__(self) -> None:
        cards = tuple(int(k) for k in self.cardinalities)
        if len(cards) == 0:
            raise ValueError("joint table needs at least one variable")
        if any(k < 2 for k in cards):
            raise ValueError("every cardinality must be at least 2")
        n_states = math.prod(cards)
        if n_states > MAX_STATES:
            raise ValueError(
                f"state space of {n_states} cells exceeds the {MAX_STATES} cap"
            )
        probs = np.asarray(self.probabilities, dtype=np.float64).ravel()
        if probs.shape != (n_states,):
            raise ValueError(
                f"expected {n_states} probabilities, got {probs.size}"
            )
        if np.any(probs < 0.0):
            raise ValueError("probabilities must be non-negative")
        total = _accurate_sum(probs)
        if abs(total - 1.0) > _SUM_TOL:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        probs = np.ascontiguousarray(probs)
        probs.flags.writeable = False
        object.__setattr__(self, "cardinalities", cards)
        object.__setattr__(self, "probabilities", probs)

    @classmethod
    def from_nd(cls, array: np.ndarray) -> "JointTable":
        """Build a table from an n-dimensional probability array."""
        arr = np.asarray(array, dtype=np.float64)
        return cls(tuple(arr.shape), arr.ravel())

    @property
    def n_variables(self) -> int:
        return len(self.cardinalities)

    @property
    def n_states(self) -> int:
        return self.probabilities.size

    def as_nd(self) -> np.ndarray:
        return self.probabilities.reshape(self.cardinalities)

    def marginal(self, subset: Iterable[int]) -> np.ndarray:
        """Marginal over ``subset``, axes kept in ascending variable order."""
        keep = _check_subset(subset, self.n_variables)
        drop = tuple(d for d in range(self.n_variables) if d not in keep)
        return self.as_nd().sum(axis=drop) if drop else self.as_nd()


def _accurate_sum(values: np.ndarray) -> float:
    if values.size >= _FSUM_CELLS:
        return math.fsum(values.tolist())
    return float(np.sum(values))


def _check_subset(subset: Iterable[int], n: int) -> tuple[int, ...]:
    idx = tuple(int(i) for i in subset)
    if len(idx) == 0:
        raise ValueError("variable subset must be non-empty")
    if len(set(idx)) != len(idx):
        raise ValueError(f"variable subset {idx} has duplicates")
    if any(i < 0 or i >= n for i in idx):
        raise ValueError(f"variable subset {idx} out of range for {n} variables")
    return tuple(sorted(idx))


def _entropy_of(probs: np.ndarray) -> float:
    """-sum p log p with the 0 log 0 = 0 convention."""
    p = np.asarray(probs, dtype=np.float64).ravel()
    safe = np.where(p > 0.0, p, 1.0)
    terms = p * np.log(safe)
    return -_accurate_sum(terms)


def state_space(cardinalities: Sequence[int]) -> np.ndarray:
    """All states of the product space, rows ordered by flat index (C order)."""
    cards = [int(k) for k in cardinalities]
    grids = np.meshgrid(*[np.arange(k) for k in cards], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def entropy(table: JointTable, subset: Iterable[int] | None = None) -> float:
    """Shannon entropy of the variables in ``subset`` (default: all)."""
    if subset is None:
        subset = range(table.n_variables)
    return _entropy_of(table.marginal(subset))


def mutual_information(
    table: JointTable, a_set: Iterable[int], b_set: Iterable[int]
) -> float:
    """I(A : B) = H(A) + H(B) - H(A, B). The two groups must be disjoint."""
    a = _check_subset(a_set, table.n_variables)
    b = _check_subset(b_set, table.n_variables)
    if set(a) & set(b):
        raise ValueError("variable groups must be disjoint")
    return entropy(table, a) + entropy(table, b) - entropy(table, a + b)


def _clamp_tiny(value: float, tol: float = _SUM_TOL) -> float:
    return 0.0 if -tol <= value < 0.0 else value


def _tc_of(table: JointTable, subset: tuple[int, ...]) -> float:
    singles = sum(entropy(table, (i,)) for i in subset)
    return _clamp_tiny(singles - entropy(table, subset))


def total_correlation(table: JointTable) -> float:
    """TC(X) = sum_i H(X_i) - H(X); zero exactly when the variables factor."""
    subset = tuple(range(table.n_variables))
    return _tc_of(table, subset)


def conditional_tc(
    table: JointTable, x_set: Iterable[int], y_set: Iterable[int]
) -> float:
    """TC(X | Y) = sum_i H(X_i | Y) - H(X | Y) over disjoint groups."""
    x = _check_subset(x_set, table.n_variables)
    y = _check_subset(y_set, table.n_variables)
    if set(x) & set(y):
        raise ValueError("x_set and y_set must be disjoint")
    h_y = entropy(table, y)
    singles = sum(entropy(table, (i,) + y) - h_y for i in x)
    joint = entropy(table, x + y) - h_y
    return _clamp_tiny(singles - joint)


def tc_explained(
    table: JointTable, x_set: Iterable[int], y_set: Iterable[int]
) -> float:
    """TC(X ; Y) = TC(X) - TC(X | Y): correlation in X explained by Y."""
    x = _check_subset(x_set, table.n_variables)
    return _tc_of(table, x) - conditional_tc(table, x, y_set)


def tc_lower_term(
    table: JointTable, x_set: Iterable[int], y_factors: Iterable[int]
) -> float:
    """sum_i I(Y : X_i) - sum_j I(Y_j : X) for factored representations Y.

    Equals TC(X ; Y) when Y is a single variable, and may be negative when
    several Y_j carry redundant information about X.
    """
    x = _check_subset(x_set, table.n_variables)
    y = _check_subset(y_factors, table.n_variables)
    if set(x) & set(y):
        raise ValueError("x_set and y_factors must be disjoint")
    gain = sum(mutual_information(table, (i,), y) for i in x)
    cost = sum(mutual_information(table, (j,), x) for j in y)
    return gain - cost


def attach_factors(
    table: JointTable, conditionals: Sequence[np.ndarray]
) -> JointTable:
    """Extend a joint with factors that are conditionally independent given X.

    Each conditional is a (n_states, k_j) row-stochastic array giving
    p(y_j | x) per flat state of ``table``. The result is the joint over
    (X_0..X_{n-1}, Y_0..Y_{m-1}) with p(x, y) = p(x) prod_j p(y_j | x).
    """
    if len(conditionals) == 0:
        raise ValueError("need at least one conditional to attach")
    cards = list(table.cardinalities)
    flat = table.probabilities.reshape(-1, 1)
    for cond in conditionals:
        c = np.asarray(cond, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] != table.n_states:
            raise ValueError(
                f"conditional must be (n_states, k), got shape {c.shape}"
            )
        if c.shape[1] < 2:
            raise ValueError("factor cardinality must be at least 2")
        if np.any(c < 0.0):
            raise ValueError("conditional probabilities must be non-negative")
        rows = c.sum(axis=1)
        if np.max(np.abs(rows - 1.0)) > 1e-9:
            raise ValueError("conditional rows must sum to 1 within 1e-9")
        flat = (flat[:, :, None] * c[:, None, :]).reshape(table.n_states, -1)
        cards.append(c.shape[1])
    n_states = math.prod(cards)
    if n_states > MAX_STATES:
        raise ValueError(
            f"attached state space of {n_states} cells exceeds the {MAX_STATES} cap"
        )
    flat = flat.ravel()
    total = _accurate_sum(flat)
    if total != 1.0:
        flat = flat / total
    return JointTable(tuple(cards), flat)
