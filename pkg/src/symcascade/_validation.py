"""Input checks for the estimator API."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .errors import ArityError, DistSumError, InvalidAssignment


def block_bounds(sizes) -> list[tuple[int, int]]:
    edges = np.concatenate([[0], np.cumsum(sizes)])
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


def check_probability_blocks(X, sizes, tol: float = 1e-9) -> np.ndarray:
    """Validate rows made of one probability vector per variable, side by side.

    Returns ``X`` as a float64 array of shape (n_samples, sum(sizes)).
    """
    X = check_array(X, dtype=np.float64, ensure_all_finite=True)
    expected = int(np.sum(sizes))
    if X.shape[1] != expected:
        raise ArityError(
            f"X has {X.shape[1]} columns; the variables' domains need {expected}"
        )
    if (X < 0).any():
        row = int(np.argwhere(X < 0)[0, 0])
        raise DistSumError(f"row {row} has negative probabilities")
    for k, (lo, hi) in enumerate(block_bounds(sizes)):
        off = np.abs(X[:, lo:hi].sum(axis=1) - 1.0)
        if (off > tol).any():
            row = int(np.argmax(off > tol))
            raise DistSumError(f"row {row}: probabilities of variable {k} do not sum to 1")
    return X


def check_labels(y, domains) -> np.ndarray:
    y = check_array(y, dtype=np.int64, ensure_2d=False)
    if y.ndim == 1:
        y = y[:, None]
    if y.shape[1] != len(domains):
        raise ArityError(f"y has {y.shape[1]} columns for {len(domains)} variables")
    for k, values in enumerate(domains):
        bad = ~np.isin(y[:, k], values)
        if bad.any():
            row = int(np.argmax(bad))
            raise InvalidAssignment(f"row {row}: label {y[row, k]} is not in the domain of variable {k}")
    return y
