import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from generators import random_model, small_models
from oracles import grid_flip_radius, sampled_min_flip
from symcascade import (
    ArityError,
    ModelMismatch,
    Norm,
    Perturbation,
    SimplexViolation,
    ZeroPartition,
    apply_perturbation,
    build_model,
    cascade_report,
    declare,
    is_adversarial,
    map_constrained,
    map_unconstrained,
    minimal_flip_radius,
    search_cascades,
    stability_radius,
)
from symcascade.adversary import _slices, _targeted_lp

ADDITION_DELTA = Perturbation(0, (-0.8, 0.8, 0.0, 0.0))

# Closed form by hand, clean MAP (1,4), competitor (2,3):
#   attack x1: (0.9*0.251 - 0.1*0.249666) / (0.251 + 0.249666) = 0.2009334 / 0.500666
#   attack x2: (0.9*0.251 - 0.1*0.249666) / (0.9 + 0.1)        = 0.2009334
# Grid oracle (step 1e-3, bisection to 1e-6) gives 0.401333 and 0.200934.
RADIUS_X1 = 0.2009334 / 0.500666
RADIUS_X2 = 0.2009334


def flips(model, var, q):
    return map_constrained(model.with_dist(var, q)).assignment != map_constrained(model).assignment


# perturbations ---------------------------------------------------------


def test_apply_addition_perturbation(addition):
    hit = apply_perturbation(addition, ADDITION_DELTA)
    np.testing.assert_allclose(hit.dists[0].probs, (0.1, 0.9, 0.0, 0.0), atol=1e-12)
    assert addition.dists[0].probs == (0.9, 0.1, 0.0, 0.0)
    assert hit.dists[1] == addition.dists[1]


def test_zero_delta_is_identity(addition):
    assert apply_perturbation(addition, Perturbation("x2", (0.0,) * 4)) == addition


def test_leaving_the_simplex(addition):
    with pytest.raises(SimplexViolation):
        apply_perturbation(addition, Perturbation(0, (-1.0, 1.0, 0.0, 0.0)))
    with pytest.raises(SimplexViolation):
        apply_perturbation(addition, Perturbation(0, (0.1, 0.0, 0.0, 0.0)))
    with pytest.raises(ArityError):
        apply_perturbation(addition, Perturbation(0, (0.0, 0.0)))


def test_tiny_negative_is_clamped(addition):
    hit = apply_perturbation(addition, Perturbation(1, (0.0, 0.0, 0.251 + 5e-13, -0.251 - 5e-13)))
    assert hit.dists[1].probs[3] == 0.0
    assert math.fsum(hit.dists[1].probs) == pytest.approx(1.0, abs=1e-12)


@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_perturbed_dists_stay_valid(n, seed):
    rng = np.random.default_rng(seed)
    model = build_model([declare("a", 0, n - 1)], [rng.dirichlet(np.ones(n))], "true")
    p = model.dists[0].array
    target = rng.dirichlet(np.ones(n))
    delta = target - p
    delta -= delta.mean()
    if (p + delta).min() < -1e-12:
        return
    q = apply_perturbation(model, Perturbation(0, tuple(delta))).dists[0].array
    assert q.min() >= 0
    assert abs(q.sum() - 1) <= 1e-12


def test_is_adversarial(addition):
    assert is_adversarial(addition, ADDITION_DELTA, "unconstrained")
    assert is_adversarial(addition, ADDITION_DELTA, "constrained")
    zero = Perturbation(0, (0.0,) * 4)
    assert not is_adversarial(addition, zero, "constrained")
    assert not is_adversarial(addition, zero, "unconstrained")
    with pytest.raises(ValueError):
        is_adversarial(addition, zero, "joint")


# minimal flips ---------------------------------------------------------


def test_addition_flip_radii(addition):
    r1 = minimal_flip_radius(addition, 0, Norm.TV)
    assert r1.feasible and r1.flipped_map == (2, 3)
    assert r1.radius == pytest.approx(0.40133, abs=1e-5)
    assert r1.radius == pytest.approx(RADIUS_X1, abs=1e-12)
    r2 = minimal_flip_radius(addition, "x2", "tv")
    assert r2.feasible and r2.flipped_map == (2, 3)
    assert r2.radius == pytest.approx(0.20093, abs=1e-5)
    assert r2.radius == pytest.approx(RADIUS_X2, abs=1e-12)
    for res in (r1, r2):
        assert res.clean_map == (1, 4)
        assert Norm.TV.distance(addition.dists[res.var].probs, res.witness.probs) == pytest.approx(
            res.radius, abs=1e-6
        )


def test_addition_radii_agree_with_grid_oracle(addition):
    for var, expected in ((0, RADIUS_X1), (1, RADIUS_X2)):
        radius, flipped = grid_flip_radius(addition, var)
        assert radius == pytest.approx(expected, abs=1e-5)
        assert flipped == (2, 3)


def test_single_model_constraint_is_infeasible(addition):
    single = addition.with_constraint("x1 = 1 and x2 = 4")
    for var in range(2):
        res = minimal_flip_radius(single, var)
        assert not res.feasible and res.radius == math.inf and res.witness is None


def test_zero_partition_propagates(addition):
    with pytest.raises(ZeroPartition):
        minimal_flip_radius(addition.with_constraint("x1 = 3"), 0)


def test_tie_lost_on_tie_break_gives_zero_radius():
    model = build_model([declare("a", 0, 1)], [(0.5, 0.5)], "true")
    res = minimal_flip_radius(model, 0)
    assert res.radius == 0.0 and res.flipped_map == (1,)
    assert Norm.TV.distance((0.5, 0.5), res.witness.probs) < 1e-6


def test_linf_equals_tv_for_untargeted(addition):
    assert minimal_flip_radius(addition, 0, "linf").radius == minimal_flip_radius(addition, 0, "tv").radius


def test_targeted_addition_attacks(addition):
    res = minimal_flip_radius(addition, 0, "tv", target=(3, 2))
    assert res.feasible and res.flipped_map == (3, 2)
    # x1 = 3 must overtake both (1,4) and (2,3): mass t moved onto p[3] with
    # 0.249667 (p1(3)) against 0.251 (0.9 - t) and 0.249666 * 0.1
    t = (0.9 * 0.251) / (0.251 + 0.249667)
    assert res.radius == pytest.approx(t, abs=1e-12)
    lp = minimal_flip_radius(addition, 0, "linf", target=(3, 2))
    assert lp.radius == pytest.approx(t, abs=1e-7)
    # (2,3) is also the untargeted winner, so the targeted radius matches
    assert minimal_flip_radius(addition, 0, target=(2, 3)).radius == pytest.approx(RADIUS_X1, abs=1e-12)


def test_targeted_infeasible_cases(addition):
    assert not minimal_flip_radius(addition, 0, target=(1, 4)).feasible  # already the MAP
    assert not minimal_flip_radius(addition, 0, target=(2, 4)).feasible  # violates the constraint
    free = addition.with_constraint("true")
    # (2, 3) cannot win through x1 alone: (2, 4) always beats it in the x1 = 2 slice
    assert not minimal_flip_radius(free, 0, target=(2, 3)).feasible


def _random_targets(model, var):
    sl = _slices(model, var)
    x_star = map_constrained(model).assignment
    return [model.assignment_at(int(w)) for a, w in enumerate(sl.winner)
            if sl.best[a] > 0 and model.assignment_at(int(w)) != x_star]


def test_targeted_tv_matches_linear_program():
    rng = np.random.default_rng(21)
    checked = 0
    for _ in range(80):
        model = random_model(rng, n_vars=(2, 3), max_size=5, min_size=2)
        for var in range(len(model.variables)):
            sl = _slices(model, var)
            p = model.dists[var].array
            for target in _random_targets(model, var):
                res = minimal_flip_radius(model, var, "tv", target)
                assert res.feasible and res.flipped_map == target
                a = model.variables[var].domain.index(target[var])
                others = [b for b in range(len(p)) if b != a and sl.best[b] > 0]
                lp_radius, _ = _targeted_lp(p, sl.best, a, others, Norm.TV)
                assert res.radius == pytest.approx(lp_radius, abs=1e-7)
                assert res.radius >= minimal_flip_radius(model, var).radius - 1e-12
                checked += 1
    assert checked > 50


def test_closed_form_matches_grid_oracle_small_batch():
    rng = np.random.default_rng(8)
    for _ in range(25):
        model = random_model(rng, n_vars=(2, 3), max_size=4)
        for var in range(len(model.variables)):
            res = minimal_flip_radius(model, var)
            oracle, _ = grid_flip_radius(model, var)
            assert res.feasible == math.isfinite(oracle)
            if res.feasible:
                assert res.radius == pytest.approx(oracle, abs=1e-4)


def test_pairwise_transfers_suffice_against_full_simplex_sampling():
    rng = np.random.default_rng(99)
    for _ in range(40):
        model = random_model(rng, n_vars=(2, 3), max_size=4, min_size=2)
        for var in range(len(model.variables)):
            res = minimal_flip_radius(model, var)
            sampled = sampled_min_flip(model, var, rng, n_samples=3000)
            assert sampled >= res.radius - 1e-9
            if not res.feasible:
                assert sampled == math.inf


@settings(max_examples=60)
@given(small_models(max_vars=3, max_size=4))
def test_local_optimality_sandwich(model):
    for var in range(len(model.variables)):
        res = minimal_flip_radius(model, var)
        if not res.feasible:
            continue
        p = model.dists[var].array
        below = res.radius - 1e-6
        if below > 0:
            for i in range(len(p)):
                for j in range(len(p)):
                    if i != j and p[i] >= below:
                        q = p.copy()
                        q[i] -= below
                        q[j] += below
                        assert not flips(model, var, q)
        assert flips(model, var, res.witness.probs)
        assert Norm.TV.distance(p, res.witness.probs) <= res.radius + 1e-6
        assert map_constrained(model.with_dist(var, res.witness)).assignment == res.flipped_map


@settings(max_examples=60)
@given(small_models(max_vars=3, max_size=4))
def test_linf_and_tv_untargeted_agree(model):
    for var in range(len(model.variables)):
        tv, linf = minimal_flip_radius(model, var, "tv"), minimal_flip_radius(model, var, "linf")
        assert tv.feasible == linf.feasible
        if tv.feasible:
            assert tv.radius == linf.radius
            assert Norm.LINF.distance(model.dists[var].probs, linf.witness.probs) <= linf.radius + 1e-6


# stability -------------------------------------------------------------


def test_addition_stability(addition):
    st_ = stability_radius(addition, "tv")
    assert st_.weakest_var == 1
    assert st_.radius == pytest.approx(0.20093, abs=1e-5)
    assert st_.result.flipped_map == (2, 3)


def test_stability_infeasible(addition):
    st_ = stability_radius(addition.with_constraint("x1 = 1 and x2 = 4"))
    assert not st_.feasible and st_.radius == math.inf and st_.result is None


def test_symmetric_variables_tie_to_lowest_index():
    p = (0.2, 0.6, 0.2)
    model = build_model([declare("x1", 1, 3), declare("x2", 1, 3)], [p, p], "x1 + x2 = 4")
    r0, r1 = minimal_flip_radius(model, 0), minimal_flip_radius(model, 1)
    # MAP (2,2) at 0.36; cheapest rival (1,3): (0.6*0.6 - 0.2*0.2) / (0.6 + 0.2) = 0.4
    assert r0.radius == pytest.approx(0.4, abs=1e-12) and r0.radius == r1.radius
    assert stability_radius(model).weakest_var == 0


@given(small_models(max_vars=3, max_size=4))
def test_stability_is_a_lower_bound(model):
    st_ = stability_radius(model)
    for var in range(len(model.variables)):
        assert st_.radius <= minimal_flip_radius(model, var).radius


# cascades --------------------------------------------------------------


def test_addition_cascade(addition, attacked):
    rep = cascade_report(addition, attacked, "x1")
    assert rep.flipped_unconstrained == {0}
    assert rep.flipped_constrained == {0, 1}
    assert rep.collateral == {1}
    assert rep.cascades
    assert (rep.clean_map, rep.attacked_map) == ((1, 4), (2, 3))
    assert (rep.clean_umap, rep.attacked_umap) == ((1, 4), (2, 4))


def test_identity_cascade_is_empty(addition):
    rep = cascade_report(addition, addition, 0)
    assert not rep.flipped_constrained and not rep.flipped_unconstrained and not rep.collateral


def test_no_collateral_without_constraint():
    rng = np.random.default_rng(4)
    for _ in range(30):
        model = random_model(rng).with_constraint("true")
        var = int(rng.integers(len(model.variables)))
        attacked = model.with_dist(var, rng.dirichlet(np.ones(model.shape[var])))
        assert cascade_report(model, attacked, var).collateral == frozenset()


def test_cascade_model_mismatch(addition):
    with pytest.raises(ModelMismatch):
        cascade_report(addition, addition.with_dist(1, (0.25,) * 4), 0)
    with pytest.raises(ModelMismatch):
        cascade_report(addition, addition.with_constraint("x1 + x2 = 6"), 0)


def test_flipped_sets_are_coordinatewise():
    rng = np.random.default_rng(6)
    for _ in range(40):
        model = random_model(rng, min_size=2)
        var = int(rng.integers(len(model.variables)))
        attacked = model.with_dist(var, rng.dirichlet(np.ones(model.shape[var])))
        try:
            rep = cascade_report(model, attacked, var)
        except ZeroPartition:
            continue
        a, b = map_constrained(model).assignment, map_constrained(attacked).assignment
        u, v = map_unconstrained(model).assignment, map_unconstrained(attacked).assignment
        assert rep.flipped_constrained == {k for k in range(len(a)) if a[k] != b[k]}
        assert rep.flipped_unconstrained == {k for k in range(len(u)) if u[k] != v[k]}
        assert rep.collateral == rep.flipped_constrained - {var}


def test_search_finds_addition_cascade(addition):
    found = search_cascades(addition)
    assert found
    for finding in found:
        assert len(finding.report.flipped_constrained) >= 2
        assert len(finding.report.flipped_unconstrained) == 1
    best = found[0]
    assert best.attack.var == 1 and best.attack.radius == pytest.approx(RADIUS_X2, abs=1e-12)
    assert {f.attack.var for f in found} == {0, 1}
