"""scikit-learn wrapper: a constraint as a symbolic output layer.

Each row of ``X`` holds the class probabilities of every variable side by side,
for instance the ``predict_proba`` outputs of one classifier per variable
concatenated with ``np.hstack``. ``predict`` returns the constrained MAP for
every row and ``transform`` the constrained marginals.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import block_bounds, check_labels, check_probability_blocks
from .adversary import Norm, stability_radius
from .errors import ZeroPartition
from .formula import as_formula, satisfying_mask
from .model import Model, VariableDecl, build_model

# rows x assignments evaluated per batch
_BATCH_CELLS = 1 << 22


class ConstrainedMAP(TransformerMixin, BaseEstimator):
    """Constrained MAP decoding of independent per-variable predictions.

    Parameters
    ----------
    constraint : str or Formula, default="true"
        Knowledge the joint prediction must satisfy, e.g. ``"x1 + x2 = 5"``.
    domains : sequence of sequences of int
        Values of each variable, in column-block order, e.g.
        ``[range(1, 5), range(1, 5)]``.
    variables : sequence of str, optional
        Variable names; defaults to ``x1, x2, ...``.
    tol : float, default=1e-9
        Allowed deviation of each probability block's sum from 1.

    Attributes
    ----------
    formula_ : Formula
    variables_ : tuple of str
    domains_ : tuple of tuple of int
    support_ : ndarray of bool
        Which assignments, in lexicographic order, satisfy the constraint.
    n_features_in_ : int
    """

    def __init__(self, constraint="true", domains=None, variables=None, tol=1e-9):
        self.constraint = constraint
        self.domains = domains
        self.variables = variables
        self.tol = tol

    def fit(self, X=None, y=None):
        """Compile the constraint. Nothing is learned; ``X`` is only validated."""
        if self.domains is None:
            raise ValueError("domains must be given, one sequence of values per variable")
        domains = tuple(tuple(int(v) for v in d) for d in self.domains)
        names = tuple(self.variables) if self.variables is not None else tuple(
            f"x{k + 1}" for k in range(len(domains))
        )
        sizes = [len(d) for d in domains]
        uniform = [np.full(len(d), 1.0 / len(d)) for d in domains]
        skeleton = build_model(
            [VariableDecl(n, d) for n, d in zip(names, domains)], uniform, as_formula(self.constraint)
        )
        self.formula_ = skeleton.constraint
        self.variables_ = names
        self.domains_ = domains
        self.support_ = satisfying_mask(self.formula_, skeleton)
        self.n_features_in_ = int(sum(sizes))
        if X is not None:
            check_probability_blocks(X, sizes, self.tol)
        if y is not None:
            check_labels(y, domains)
        return self

    # internals ------------------------------------------------------------

    @property
    def _sizes(self):
        return [len(d) for d in self.domains_]

    def _batches(self, X):
        X = check_probability_blocks(X, self._sizes, self.tol)
        n_assign = self.support_.size
        step = max(1, _BATCH_CELLS // n_assign)
        for start in range(0, X.shape[0], step):
            rows = X[start : start + step]
            joint = np.ones((rows.shape[0], 1))
            for lo, hi in block_bounds(self._sizes):
                joint = (joint[:, :, None] * rows[:, None, lo:hi]).reshape(rows.shape[0], -1)
            yield start, np.where(self.support_, joint, 0.0)

    def _decode(self, flat):
        idx = np.unravel_index(flat, self._sizes)
        return np.column_stack([np.asarray(d)[i] for d, i in zip(self.domains_, idx)])

    @staticmethod
    def _check_mass(start, scores):
        empty = ~(scores.max(axis=1) > 0)
        if empty.any():
            row = start + int(np.argmax(empty))
            raise ZeroPartition(f"row {row}: the constraint has no probability mass")

    # public API -----------------------------------------------------------

    def predict(self, X):
        """Constrained MAP assignment per row, shape (n_samples, n_variables)."""
        check_is_fitted(self, "support_")
        out = []
        for start, scores in self._batches(X):
            self._check_mass(start, scores)
            out.append(self._decode(np.argmax(scores, axis=1)))
        return np.vstack(out) if out else np.empty((0, len(self.domains_)), dtype=np.int64)

    def predict_unconstrained(self, X):
        """Per-variable argmax, ignoring the constraint."""
        check_is_fitted(self, "support_")
        X = check_probability_blocks(X, self._sizes, self.tol)
        cols = [
            np.asarray(d)[np.argmax(X[:, lo:hi], axis=1)]
            for d, (lo, hi) in zip(self.domains_, block_bounds(self._sizes))
        ]
        return np.column_stack(cols)

    def transform(self, X):
        """Constrained marginals, same layout as ``X``."""
        check_is_fitted(self, "support_")
        out = []
        for start, scores in self._batches(X):
            self._check_mass(start, scores)
            post = (scores / scores.sum(axis=1, keepdims=True)).reshape(-1, *self._sizes)
            blocks = []
            for k in range(len(self._sizes)):
                axes = tuple(j + 1 for j in range(len(self._sizes)) if j != k)
                blocks.append(post.sum(axis=axes))
            out.append(np.hstack(blocks))
        return np.vstack(out) if out else np.empty((0, self.n_features_in_))

    def score(self, X, y):
        """Fraction of rows whose constrained MAP matches ``y`` on every variable."""
        y = check_labels(y, self.domains_)
        return float(np.mean(np.all(self.predict(X) == y, axis=1)))

    def to_model(self, row) -> Model:
        """The library model for one row of probabilities."""
        check_is_fitted(self, "support_")
        row = check_probability_blocks(np.atleast_2d(row), self._sizes, self.tol)[0]
        dists = [row[lo:hi] / row[lo:hi].sum() for lo, hi in block_bounds(self._sizes)]
        decls = [VariableDecl(n, d) for n, d in zip(self.variables_, self.domains_)]
        return build_model(decls, dists, self.formula_)

    def stability_radius(self, X, norm="tv"):
        """Per-row stability radius of the constrained MAP (``inf`` when no flip exists)."""
        norm = Norm.parse(norm)
        X = check_probability_blocks(X, self._sizes, self.tol)
        return np.array([stability_radius(self.to_model(row), norm).radius for row in X])
