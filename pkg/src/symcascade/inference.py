"""Exact inference by enumeration: joints, the partition constant, MAP, marginals.

Everything is computed in linear probability space over the model's flat
joint table. Ties between assignments are broken toward the lexicographically
smallest one, which is the lowest flat index, so ``np.argmax`` implements the
rule directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ZeroPartition
from .model import Assignment, CategoricalDist, Model


@dataclass(frozen=True)
class PosteriorResult:
    assignment: Assignment
    probability: float


@dataclass(frozen=True)
class PartitionValue:
    """Mass of the satisfying assignments under the unconstrained joint.

    ``z`` is the raw floating-point sum and may exceed 1 by rounding; use
    :attr:`clamped` for display.
    """

    z: float
    satisfying_count: int

    @property
    def clamped(self) -> float:
        return min(self.z, 1.0)


def joint_unconstrained(model: Model, x: Sequence[int]) -> float:
    """Product of the per-variable probabilities at ``x``."""
    x = model.check_assignment(x)
    return math.prod(d[v.domain.index(xi)] for v, d, xi in zip(model.variables, model.dists, x))


def constrained_scores(model: Model) -> np.ndarray:
    """Unnormalized posterior: the joint table with unsatisfying entries zeroed."""
    return np.where(model.support, model.joint_table, 0.0)


def partition_z(model: Model) -> PartitionValue:
    scores = model.joint_table[model.support]
    return PartitionValue(math.fsum(scores), int(model.support.sum()))


def _require_mass(z: float) -> None:
    if not z > 0:
        raise ZeroPartition("the constraint has no satisfying assignment with positive probability")


def posterior_table(model: Model) -> np.ndarray:
    """Constrained posterior of every assignment, flat canonical order."""
    z = partition_z(model).z
    _require_mass(z)
    return constrained_scores(model) / z


def posterior(model: Model, x: Sequence[int]) -> float:
    """P(x | constraint): zero off the support, otherwise joint(x) / Z.

    Raises :class:`ZeroPartition` when ``x`` satisfies the constraint but the
    constraint carries no mass.
    """
    flat = model.flat_index(x)
    if not model.support[flat]:
        return 0.0
    z = partition_z(model).z
    _require_mass(z)
    return joint_unconstrained(model, x) / z


def map_unconstrained(model: Model) -> PosteriorResult:
    """Independent per-variable argmax, ties toward the smaller domain value."""
    x = tuple(v.domain.values[int(np.argmax(d.array))] for v, d in zip(model.variables, model.dists))
    return PosteriorResult(x, joint_unconstrained(model, x))


def map_constrained(model: Model) -> PosteriorResult:
    """Most probable satisfying assignment and its posterior probability."""
    scores = constrained_scores(model)
    best = int(np.argmax(scores))
    z = partition_z(model).z
    _require_mass(z)
    return PosteriorResult(model.assignment_at(best), float(scores[best]) / z)


def marginal_constrained(model: Model, var: int | str) -> CategoricalDist:
    """Posterior marginal of one variable under the constraint."""
    i = model.resolve(var)
    table = posterior_table(model).reshape(model.shape)
    axes = tuple(j for j in range(len(model.variables)) if j != i)
    marginal = table.sum(axis=axes)
    return CategoricalDist(tuple(marginal / math.fsum(marginal)))
