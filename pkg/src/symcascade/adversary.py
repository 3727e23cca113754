"""Adversarial perturbations of a single conditional and how they cascade.

Perturbations act directly on a variable's output distribution (a point on the
probability simplex), not on whatever raw input produced it.

Reduction used throughout: fix the attacked variable ``v`` with clean
distribution ``p`` and let ``M[a]`` be the largest product of the *other*
factors over satisfying assignments with ``x_v = a`` (``y_a`` the
lexicographically first such assignment). Under a new distribution ``q`` the
constrained MAP is ``y_a`` for the ``a`` maximizing ``q[a] * M[a]``. Beating
the clean MAP ``x*`` (value ``a*``) with ``y_a`` by moving mass ``t`` from
``a*`` to ``a`` needs::

    t >= (p[a*] M[a*] - p[a] M[a]) / (M[a*] + M[a])

and no perturbation of total-variation (or L-infinity) size below that does
better, because it can lower ``q[a*]`` and raise ``q[a]`` by at most its size.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import ArityError, ModelMismatch, SimplexViolation, ZeroPartition
from .inference import map_constrained, map_unconstrained
from .model import SIMPLEX_TOL, Assignment, CategoricalDist, Model

#: Negative entries down to this are treated as floating-point noise and clamped.
NEGATIVE_TOL = 1e-12

_NUDGES = (0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7)


class Norm(enum.Enum):
    TV = "tv"
    LINF = "linf"

    def distance(self, p, q) -> float:
        diff = np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float))
        if self is Norm.TV:
            return 0.5 * float(diff.sum())
        return float(diff.max())

    @classmethod
    def parse(cls, value: Norm | str) -> Norm:
        return value if isinstance(value, Norm) else cls(str(value).lower())


@dataclass(frozen=True)
class Perturbation:
    """Additive change to the distribution of variable ``var``; entries sum to zero."""

    var: int | str
    delta: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "delta", tuple(float(d) for d in self.delta))


@dataclass(frozen=True)
class AttackResult:
    var: int
    norm: Norm
    feasible: bool
    radius: float
    witness: CategoricalDist | None = None
    flipped_map: Assignment | None = None
    clean_map: Assignment | None = None
    target: Assignment | None = None


@dataclass(frozen=True)
class CascadeReport:
    attacked_var: int
    clean_map: Assignment
    attacked_map: Assignment
    clean_umap: Assignment
    attacked_umap: Assignment
    clean_map_prob: float
    attacked_map_prob: float
    clean_umap_prob: float
    attacked_umap_prob: float
    flipped_constrained: frozenset[int]
    flipped_unconstrained: frozenset[int]
    collateral: frozenset[int]

    @property
    def cascades(self) -> bool:
        """The constrained prediction loses more variables than the unconstrained one."""
        return len(self.flipped_constrained) >= 2 and len(self.flipped_unconstrained) == 1


class Stability(NamedTuple):
    radius: float
    weakest_var: int | None
    result: AttackResult | None

    @property
    def feasible(self) -> bool:
        return self.weakest_var is not None


class CascadeFinding(NamedTuple):
    attack: AttackResult
    report: CascadeReport


# --------------------------------------------------------------------------
# perturbations
# --------------------------------------------------------------------------


def _to_simplex(q: np.ndarray) -> np.ndarray:
    q = np.clip(q, 0.0, None)
    return q / q.sum()


def apply_perturbation(model: Model, p: Perturbation) -> Model:
    """New model with ``delta`` added to one distribution; ``model`` is untouched.

    Entries that land in ``[-1e-12, 0)`` are clamped to zero and the vector is
    renormalized. Anything further off the simplex raises :class:`SimplexViolation`.
    """
    i = model.resolve(p.var)
    base = model.dists[i].array
    delta = np.asarray(p.delta, dtype=float)
    if delta.shape != base.shape:
        raise ArityError(f"delta has {delta.size} entries, {model.names[i]} has {base.size} values")
    if not np.all(np.isfinite(delta)):
        raise SimplexViolation("delta has non-finite entries")
    if abs(math.fsum(delta)) > SIMPLEX_TOL:
        raise SimplexViolation(f"delta sums to {math.fsum(delta)!r}, not 0")
    q = base + delta
    if q.min() < -NEGATIVE_TOL or q.max() > 1.0 + NEGATIVE_TOL:
        raise SimplexViolation(f"perturbed distribution leaves the simplex: {q.tolist()}")
    return model.with_dist(i, _to_simplex(q))


def is_adversarial(model: Model, p: Perturbation, level: str = "constrained") -> bool:
    """Whether the perturbation changes the MAP at the given level."""
    if level not in ("constrained", "unconstrained"):
        raise ValueError(f"level must be 'constrained' or 'unconstrained', not {level!r}")
    solve = map_constrained if level == "constrained" else map_unconstrained
    return solve(apply_perturbation(model, p)).assignment != solve(model).assignment


# --------------------------------------------------------------------------
# minimal flips
# --------------------------------------------------------------------------


class _Slices(NamedTuple):
    rest: np.ndarray  # flat: product of the other factors, zeroed off the support
    best: np.ndarray  # M[a]
    winner: np.ndarray  # flat index of y_a


def _slices(model: Model, i: int) -> _Slices:
    rest = np.ones(())
    for j, d in enumerate(model.dists):
        rest = np.multiply.outer(rest, np.ones(len(d)) if j == i else d.array)
    rest = np.where(model.support, rest.ravel(), 0.0)
    by_value = np.moveaxis(rest.reshape(model.shape), i, 0).reshape(model.shape[i], -1)
    flat = np.moveaxis(np.arange(rest.size).reshape(model.shape), i, 0).reshape(model.shape[i], -1)
    cols = np.argmax(by_value, axis=1)
    rows = np.arange(model.shape[i])
    return _Slices(rest, by_value[rows, cols], flat[rows, cols])


def _witness(model: Model, i: int, q: np.ndarray, direction: np.ndarray, x_star: Assignment,
             target: Assignment | None):
    """Smallest nudge of ``q`` along ``direction`` that actually flips the MAP.

    ``q`` sits on the decision boundary, where the tie-break may still favour
    ``x_star``; nudges stay far below the 1e-6 reporting tolerance.
    """
    for eps in _NUDGES:
        candidate = _to_simplex(q + eps * direction)
        attacked = model.with_dist(i, candidate)
        try:
            new_map = map_constrained(attacked).assignment
        except ZeroPartition:
            continue
        if new_map != x_star and (target is None or new_map == target):
            return attacked.dists[i], new_map
    raise RuntimeError(f"no witness found near the decision boundary for {model.names[i]}")


def _infeasible(i: int, norm: Norm, x_star: Assignment, target=None) -> AttackResult:
    return AttackResult(i, norm, False, math.inf, clean_map=x_star, target=target)


def minimal_flip_radius(
    model: Model,
    var: int | str,
    norm: Norm | str = Norm.TV,
    target: Sequence[int] | None = None,
) -> AttackResult:
    """Smallest change to one variable's distribution that changes the constrained MAP.

    With ``target`` the attack must make that assignment the MAP instead of
    merely dislodging the clean one. The radius is an infimum: exactly at it
    the tie-break may still keep the clean MAP, so ``witness`` lies a hair
    (well under 1e-6) beyond it.

    Raises :class:`ZeroPartition` if the clean model's constraint has no mass.
    """
    norm = Norm.parse(norm)
    i = model.resolve(var)
    x_star = map_constrained(model).assignment
    p = model.dists[i].array
    sl = _slices(model, i)
    star_flat = model.flat_index(x_star)
    a_star = model.variables[i].domain.index(x_star[i])
    r_star = float(sl.rest[star_flat])

    if target is not None:
        return _targeted(model, i, norm, p, sl, x_star, model.check_assignment(target))

    best = None
    for a in range(len(p)):
        if a == a_star or sl.best[a] <= 0:
            continue
        m = float(sl.best[a])
        t = max(0.0, (p[a_star] * r_star - p[a] * m) / (r_star + m))
        key = (t, int(sl.winner[a]))
        if best is None or key < best[0]:
            best = (key, a)
    if best is None:
        return _infeasible(i, norm, x_star)
    (t, _), a = best
    q = p.copy()
    q[a_star] -= t
    q[a] += t
    direction = np.zeros_like(p)
    direction[a_star], direction[a] = -1.0, 1.0
    witness, new_map = _witness(model, i, q, direction, x_star, None)
    return AttackResult(i, norm, True, float(t), witness, new_map, x_star)


def _targeted(model, i, norm, p, sl, x_star, y) -> AttackResult:
    if y == x_star:
        return _infeasible(i, norm, x_star, y)
    flat = model.flat_index(y)
    a = model.variables[i].domain.index(y[i])
    # y must be the best completion of its own slice; no change to p can reorder a slice
    if not model.support[flat] or sl.best[a] <= 0 or int(sl.winner[a]) != flat:
        return _infeasible(i, norm, x_star, y)
    others = [b for b in range(len(p)) if b != a and sl.best[b] > 0]
    if norm is Norm.TV:
        t, q = _targeted_tv(p, sl.best, a, others)
    else:
        t, q = _targeted_lp(p, sl.best, a, others, norm)
    direction = -q.copy()
    direction[a] += 1.0
    witness, new_map = _witness(model, i, q, direction, x_star, y)
    return AttackResult(i, norm, True, float(t), witness, new_map, x_star, y)


def _targeted_tv(p, best, a, others):
    """Least mass ``t`` moved onto value ``a`` so that ``q[a] M[a] >= q[b] M[b]`` for all b.

    Each competitor ``b`` must shed ``max(0, p[b] - (p[a] + t) M[a] / M[b])``;
    the shed mass is what lands on ``a``, so ``t`` solves ``t = shed(t)``. That
    balance is piecewise linear, solved exactly by walking the breakpoints.
    """
    ratio = {b: best[a] / best[b] for b in others}
    # b stops needing to shed once t passes p[b] / ratio[b] - p[a]
    release = sorted(((p[b] / ratio[b] - p[a], b) for b in others), reverse=True)
    release = [(r, b) for r, b in release if r > 0]
    t = 0.0
    for k in range(len(release)):
        active = [b for _, b in release[: k + 1]]
        num = sum(p[b] for b in active) - p[a] * sum(ratio[b] for b in active)
        t = num / (1.0 + sum(ratio[b] for b in active))
        lower = release[k + 1][0] if k + 1 < len(release) else 0.0
        if t >= lower:
            break
    t = max(t, 0.0)
    level = (p[a] + t) * best[a]
    q = p.copy()
    for b in others:
        q[b] = min(p[b], level / best[b])
    q[a] = p[a] + t
    # whatever rounding left over is settled on a
    q[a] += 1.0 - q.sum()
    return t, _to_simplex(q)


def _targeted_lp(p, best, a, others, norm):
    n = len(p)
    # variables: q (n) then the norm epigraph (1 for linf, n for tv)
    extra = 1 if norm is Norm.LINF else n
    c = np.concatenate([np.zeros(n), np.ones(extra)])
    rows, rhs = [], []
    for b in others:
        row = np.zeros(n + extra)
        row[b], row[a] = best[b], -best[a]
        rows.append(row)
        rhs.append(0.0)
    for j in range(n):
        up = np.zeros(n + extra)
        up[j] = 1.0
        up[n if norm is Norm.LINF else n + j] = -1.0
        rows.append(up)
        rhs.append(p[j])
        if norm is Norm.LINF:
            down = np.zeros(n + extra)
            down[j], down[n] = -1.0, -1.0
            rows.append(down)
            rhs.append(-p[j])
    eq = np.concatenate([np.ones(n), np.zeros(extra)])[None, :]
    res = linprog(c, A_ub=np.array(rows), b_ub=np.array(rhs), A_eq=eq, b_eq=[1.0],
                  bounds=[(0, None)] * (n + extra), method="highs")
    if res.status != 0:
        raise RuntimeError(f"linear program failed: {res.message}")
    q = _to_simplex(res.x[:n])
    return norm.distance(p, q), q


def stability_radius(model: Model, norm: Norm | str = Norm.TV) -> Stability:
    """Weakest single variable: the smallest minimal flip radius over all variables.

    Ties go to the lowest index. When no variable admits a flip the radius is
    ``inf`` and ``weakest_var``/``result`` are None.
    """
    norm = Norm.parse(norm)
    best = Stability(math.inf, None, None)
    for i in range(len(model.variables)):
        result = minimal_flip_radius(model, i, norm)
        if result.feasible and result.radius < best.radius:
            best = Stability(result.radius, i, result)
    return best


# --------------------------------------------------------------------------
# cascades
# --------------------------------------------------------------------------


def cascade_report(clean: Model, attacked: Model, attacked_var: int | str) -> CascadeReport:
    """Compare constrained and unconstrained MAPs before and after an attack."""
    i = clean.resolve(attacked_var)
    if clean.variables != attacked.variables or clean.constraint != attacked.constraint:
        raise ModelMismatch("models differ in variables or constraint")
    for j, (d0, d1) in enumerate(zip(clean.dists, attacked.dists)):
        if j != i and d0 != d1:
            raise ModelMismatch(f"models also differ in the distribution of {clean.names[j]}")
    cmap, amap = map_constrained(clean), map_constrained(attacked)
    cumap, aumap = map_unconstrained(clean), map_unconstrained(attacked)

    def diff(x, y):
        return frozenset(k for k, (u, v) in enumerate(zip(x, y)) if u != v)

    flipped = diff(cmap.assignment, amap.assignment)
    return CascadeReport(
        attacked_var=i,
        clean_map=cmap.assignment,
        attacked_map=amap.assignment,
        clean_umap=cumap.assignment,
        attacked_umap=aumap.assignment,
        clean_map_prob=cmap.probability,
        attacked_map_prob=amap.probability,
        clean_umap_prob=cumap.probability,
        attacked_umap_prob=aumap.probability,
        flipped_constrained=flipped,
        flipped_unconstrained=diff(cumap.assignment, aumap.assignment),
        collateral=flipped - {i},
    )


def search_cascades(model: Model, norm: Norm | str = Norm.TV) -> list[CascadeFinding]:
    """Minimal single-variable attacks, untargeted and targeted, that cascade.

    For each variable this tries the untargeted minimal flip plus a targeted
    attack on every assignment that could become the MAP by changing that
    variable alone, and keeps those whose constrained MAP loses at least two
    variables while the unconstrained MAP loses exactly one. Sorted by radius.
    """
    norm = Norm.parse(norm)
    x_star = map_constrained(model).assignment
    found = []
    for i in range(len(model.variables)):
        sl = _slices(model, i)
        targets = {None}
        targets.update(
            model.assignment_at(int(w)) for a, w in enumerate(sl.winner) if sl.best[a] > 0
        )
        targets.discard(x_star)
        for target in sorted(targets, key=lambda t: (t is not None, t or ())):
            attack = minimal_flip_radius(model, i, norm, target)
            if not attack.feasible:
                continue
            report = cascade_report(model, model.with_dist(i, attack.witness), i)
            if report.cascades:
                found.append(CascadeFinding(attack, report))
    found.sort(key=lambda f: (f.attack.radius, f.attack.var))
    return found
