"""Constrained factorized models.

A :class:`Model` is a product of independent categorical conditionals, one per
variable, restricted to the assignments satisfying a constraint formula.
Assignments are plain tuples of ints in model variable order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    ArityError,
    DistSumError,
    DuplicateName,
    InvalidAssignment,
    InvalidDomain,
    InvalidName,
    UnknownVariable,
)
from .formula import IDENTIFIER, KEYWORDS, Formula, as_formula, satisfying_mask, variables

#: Allowed deviation of a distribution's sum from 1.
SIMPLEX_TOL = 1e-9

Assignment = tuple[int, ...]


@dataclass(frozen=True)
class DomainSpec:
    """Ordered, strictly increasing integer values a variable can take."""

    values: tuple[int, ...]

    def __post_init__(self):
        values = tuple(self.values)
        if not values:
            raise InvalidDomain("domain must not be empty")
        if any(isinstance(v, bool) or not isinstance(v, (int, np.integer)) for v in values):
            raise InvalidDomain(f"domain values must be integers: {values!r}")
        values = tuple(int(v) for v in values)
        if any(a >= b for a, b in zip(values, values[1:])):
            raise InvalidDomain(f"domain values must be strictly increasing: {values!r}")
        object.__setattr__(self, "values", values)

    @classmethod
    def range(cls, lo: int, hi: int) -> DomainSpec:
        """The inclusive integer range ``lo..hi``."""
        if hi < lo:
            raise InvalidDomain(f"empty range {lo}..{hi}")
        return cls(tuple(range(lo, hi + 1)))

    @property
    def is_contiguous(self) -> bool:
        return self.values[-1] - self.values[0] == len(self.values) - 1

    def index(self, value: int) -> int:
        try:
            return self.values.index(value)
        except ValueError:
            raise InvalidAssignment(f"{value!r} is not in domain {self.values!r}") from None

    def __len__(self) -> int:
        return len(self.values)

    def __contains__(self, value) -> bool:
        return value in self.values


@dataclass(frozen=True)
class CategoricalDist:
    """A probability vector; entries are non-negative and sum to 1 within ``SIMPLEX_TOL``."""

    probs: tuple[float, ...]

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        if not probs:
            raise ArityError("distribution must have at least one entry")
        if not all(math.isfinite(p) for p in probs):
            raise DistSumError(f"distribution has non-finite entries: {probs!r}")
        if min(probs) < 0:
            raise DistSumError(f"distribution has negative entries: {probs!r}")
        total = math.fsum(probs)
        if abs(total - 1.0) > SIMPLEX_TOL:
            raise DistSumError(f"probabilities sum to {total!r}, not 1 (tolerance {SIMPLEX_TOL})")
        object.__setattr__(self, "probs", probs)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.probs)

    def __len__(self) -> int:
        return len(self.probs)

    def __getitem__(self, i: int) -> float:
        return self.probs[i]


@dataclass(frozen=True)
class VariableDecl:
    name: str
    domain: DomainSpec
    evidence_label: str | None = None

    def __post_init__(self):
        if not isinstance(self.name, str) or not IDENTIFIER.match(self.name):
            raise InvalidName(f"invalid variable name {self.name!r}")
        if self.name in KEYWORDS:
            raise InvalidName(f"{self.name!r} is a reserved word")
        if not isinstance(self.domain, DomainSpec):
            object.__setattr__(self, "domain", DomainSpec(tuple(self.domain)))


@dataclass(frozen=True, eq=True)
class Model:
    """Validated, immutable constrained model. Build it with :func:`build_model`.

    Derived tables (the joint over all assignments, the constraint's support)
    are computed lazily and cached; they are read-only arrays indexed by the
    canonical flat assignment index.
    """

    variables: tuple[VariableDecl, ...]
    dists: tuple[CategoricalDist, ...]
    constraint: Formula
    _index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {v.name: i for i, v in enumerate(self.variables)})

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(v.domain) for v in self.variables)

    @property
    def n_assignments(self) -> int:
        return math.prod(self.shape)

    def resolve(self, var: int | str) -> int:
        """Index of a variable given by position or name."""
        if isinstance(var, str):
            try:
                return self._index[var]
            except KeyError:
                raise UnknownVariable(f"no variable named {var!r}") from None
        index = int(var)
        if not 0 <= index < len(self.variables):
            raise UnknownVariable(f"variable index {var} out of range")
        return index

    def check_assignment(self, a: Sequence[int]) -> Assignment:
        if len(a) != len(self.variables):
            raise InvalidAssignment(
                f"assignment has {len(a)} values, model has {len(self.variables)} variables"
            )
        for value, var in zip(a, self.variables):
            if value not in var.domain:
                raise InvalidAssignment(f"{value!r} is not in the domain of {var.name}")
        return tuple(int(v) for v in a)

    def flat_index(self, a: Sequence[int]) -> int:
        a = self.check_assignment(a)
        idx = tuple(v.domain.index(x) for v, x in zip(self.variables, a))
        return int(np.ravel_multi_index(idx, self.shape))

    def assignment_at(self, flat: int) -> Assignment:
        idx = np.unravel_index(int(flat), self.shape)
        return tuple(v.domain.values[int(i)] for v, i in zip(self.variables, idx))

    def with_dist(self, var: int | str, dist: CategoricalDist | Sequence[float]) -> Model:
        """Copy of the model with one conditional replaced."""
        i = self.resolve(var)
        dists = list(self.dists)
        dists[i] = dist if isinstance(dist, CategoricalDist) else CategoricalDist(tuple(dist))
        return build_model(self.variables, dists, self.constraint)

    def with_constraint(self, constraint: Formula | str) -> Model:
        return build_model(self.variables, self.dists, constraint)

    @cached_property
    def joint_table(self) -> np.ndarray:
        """Unconstrained joint probability of every assignment (flat, canonical order)."""
        table = np.ones(())
        for d in self.dists:
            table = np.multiply.outer(table, d.array)
        table = table.ravel()
        table.setflags(write=False)
        return table

    @cached_property
    def support(self) -> np.ndarray:
        """Boolean vector of assignments satisfying the constraint."""
        mask = satisfying_mask(self.constraint, self)
        mask.setflags(write=False)
        return mask


def build_model(
    decls: Sequence[VariableDecl],
    dists: Sequence[CategoricalDist | Sequence[float]],
    constraint: Formula | str,
) -> Model:
    """Validate the pieces of a model and assemble them.

    Raises
    ------
    DistSumError
        A distribution is negative somewhere or does not sum to 1 within 1e-9.
    ArityError
        Mismatched counts, or a distribution whose length differs from its domain.
    UnknownVariable
        The constraint references an undeclared variable.
    DuplicateName
        Two variables share a name.
    """
    decls = tuple(decls)
    dists = tuple(d if isinstance(d, CategoricalDist) else CategoricalDist(tuple(d)) for d in dists)
    constraint = as_formula(constraint)
    if not decls:
        raise ArityError("a model needs at least one variable")
    if len(dists) != len(decls):
        raise ArityError(f"{len(decls)} variables but {len(dists)} distributions")
    seen = set()
    for decl in decls:
        if decl.name in seen:
            raise DuplicateName(f"variable {decl.name!r} declared twice")
        seen.add(decl.name)
    for decl, dist in zip(decls, dists):
        if len(dist) != len(decl.domain):
            raise ArityError(
                f"distribution for {decl.name} has {len(dist)} entries, "
                f"domain has {len(decl.domain)} values"
            )
    for name in variables(constraint):
        if name not in seen:
            raise UnknownVariable(f"constraint mentions undeclared variable {name!r}")
    return Model(decls, dists, constraint)


def assignments(model: Model) -> Iterator[Assignment]:
    """Every assignment once, lexicographic by variable order then domain order."""
    return itertools.product(*(v.domain.values for v in model.variables))


def declare(name: str, lo: int, hi: int, evidence_label: str | None = None) -> VariableDecl:
    """Shorthand for a variable ranging over ``lo..hi``."""
    return VariableDecl(name, DomainSpec.range(lo, hi), evidence_label)


__all__ = [
    "Assignment",
    "CategoricalDist",
    "DomainSpec",
    "Model",
    "SIMPLEX_TOL",
    "VariableDecl",
    "assignments",
    "build_model",
    "declare",
]
