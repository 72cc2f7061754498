"""Connection strengths between data columns and latent factors.

The solver's objective weights each (column i, factor j) pair by an
exponent alpha in [0, 1]. Two policies are provided: a tree rule that
routes every column to its highest mutual information factor, and a
counting heuristic that lets a column spread weight over several factors
when each predicts it on a distinct share of the samples.
"""

from __future__ import annotations

import numpy as np

from .data import ColumnarView


def _entropy_rows(p: np.ndarray) -> np.ndarray:
    safe = np.where(p > 0.0, p, 1.0)
    return -(p * np.log(safe)).sum(axis=-1)


def mi_discrete(
    codes: np.ndarray,
    observed: np.ndarray,
    labels_j: np.ndarray,
    k_max: int,
) -> np.ndarray:
    """Plug-in I(X_i : Y_j) from the joint of column values and soft labels."""
    n, d = codes.shape
    if d == 0:
        return np.zeros(0)
    k = labels_j.shape[1]
    joint = np.empty((d, k_max, k))
    for v in range(k_max):
        w_v = ((codes == v) & observed).astype(np.float64)
        joint[:, v, :] = w_v.T @ labels_j
    n_obs = np.maximum(observed.sum(axis=0).astype(np.float64), 1.0)
    joint /= n_obs[:, None, None]
    px = joint.sum(axis=2)
    py = joint.sum(axis=1)
    denom = px[:, :, None] * py[:, None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        terms = np.where(joint > 0.0, joint * np.log(joint / denom), 0.0)
    return np.maximum(terms.sum(axis=(1, 2)), 0.0)


def mi_continuous(lr_cont: np.ndarray, prior_j: np.ndarray) -> np.ndarray:
    """I(X_i : Y_j) = H(Y_j) - E_x H(Y_j | X_i) from single-column posteriors.

    The posterior per sample is softmax(log prior + log ratio), i.e. the
    label distribution the column alone would induce.
    """
    n, d, _ = lr_cont.shape
    if d == 0:
        return np.zeros(0)
    scores = np.log(prior_j)[None, None, :] + lr_cont
    scores -= scores.max(axis=2, keepdims=True)
    post = np.exp(scores)
    post /= post.sum(axis=2, keepdims=True)
    h_cond = _entropy_rows(post).mean(axis=0)
    h_prior = _entropy_rows(prior_j)
    return np.maximum(h_prior - h_cond, 0.0)


def mutual_information_table(
    view: ColumnarView,
    labels: np.ndarray,
    log_ratios: np.ndarray,
    priors: np.ndarray,
) -> np.ndarray:
    """Estimated I(X_i : Y_j) for every column and factor, shape (n, m).

    Entries are clamped at zero; plug-in noise can otherwise push tiny
    values slightly negative.
    """
    m = labels.shape[1]
    mi = np.zeros((view.n_variables, m))
    for j in range(m):
        if view.disc_cols.size:
            mi[view.disc_cols, j] = mi_discrete(
                view.disc_codes, view.disc_obs, labels[:, j, :], view.k_max
            )
        if view.cont_cols.size:
            mi[view.cont_cols, j] = mi_continuous(
                log_ratios[j][:, view.cont_cols, :], priors[j]
            )
    return mi


def alpha_tree(mi: np.ndarray) -> np.ndarray:
    """One-hot rows: each column attaches to its argmax factor.

    Ties break toward the lowest factor index. With a single factor the
    result is the all-ones column.
    """
    mi = np.asarray(mi, dtype=np.float64)
    n, m = mi.shape
    alpha = np.zeros((n, m))
    alpha[np.arange(n), np.argmax(mi, axis=1)] = 1.0
    return alpha


def alpha_unique(labels: np.ndarray, log_ratios: np.ndarray) -> np.ndarray:
    """Counting heuristic: weight factors by uniquely predicted samples.

    For sample l, column i, factor j, let d = 1 when the column's own
    argmax label prediction agrees with the full posterior's argmax.
    Factors are sorted per column by their total agreement count
    (descending, ties toward the lower index) and alpha is the fraction of
    samples the factor predicts that no earlier factor in that order did.
    Row sums never exceed 1 because those sample sets are disjoint.
    """
    n_samples, m, _ = labels.shape
    full_pred = labels.argmax(axis=2)
    single_pred = np.stack([log_ratios[j].argmax(axis=2) for j in range(m)], axis=2)
    d = single_pred == full_pred[:, None, :]
    counts = d.sum(axis=0)
    order = np.argsort(-counts, axis=1, kind="stable")
    d_sorted = np.take_along_axis(d, order[None, :, :], axis=2)
    earlier = np.cumsum(d_sorted, axis=2) - d_sorted
    first_hit = d_sorted & (earlier == 0)
    alpha_sorted = first_hit.mean(axis=0)
    alpha = np.empty_like(alpha_sorted)
    np.put_along_axis(alpha, order, alpha_sorted, axis=1)
    return alpha
