"""Acceptance suite: one test and one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they happen;
they are repeated in the terminal summary either way.
"""

import math
import time

import numpy as np

from generators import random_ast, random_model
from oracles import full_scan, grid_flip_radius
from symcascade import (
    FormulaSyntaxError,
    cascade_report,
    joint_unconstrained,
    map_constrained,
    map_unconstrained,
    minimal_flip_radius,
    parse,
    partition_z,
    posterior,
    search_cascades,
    to_text,
)
from symcascade.fixtures import attacked_addition_model, addition_model
from symcascade.formula import depth
from symcascade.model import assignments
from test_formula import MALFORMED

RESULTS = {}


def report(number, title, ok, detail, elapsed, budget=None):
    within = budget is None or elapsed < budget
    status = "PASS" if ok and within else "FAIL"
    timing = f"{elapsed:.2f}s" + (f", budget {budget:g}s" if budget is not None else "")
    line = f"[{status}] criterion {number}: {title}: {detail} ({timing})"
    RESULTS[number] = line
    print(line)
    assert ok, line
    assert within, line


def test_1_golden_numbers():
    t0 = time.perf_counter()
    clean, hit = addition_model(), attacked_addition_model()
    u0, c0 = map_unconstrained(clean), map_constrained(clean)
    u1, c1 = map_unconstrained(hit), map_constrained(hit)
    rep = cascade_report(clean, hit, "x1")
    checks = {
        "clean unconstrained (1,4)": u0.assignment == (1, 4) and abs(u0.probability - 0.2259) <= 5e-4,
        "clean constrained (1,4)": c0.assignment == (1, 4) and abs(c0.probability - 0.9) <= 5e-3,
        "attacked unconstrained (2,4)": u1.assignment == (2, 4) and abs(u1.probability - 0.2259) <= 5e-4,
        "attacked constrained (2,3)": c1.assignment == (2, 3) and abs(c1.probability - 0.9) <= 5e-3,
        "flipped_unconstrained {x1}": rep.flipped_unconstrained == {0},
        "flipped_constrained {x1,x2}": rep.flipped_constrained == {0, 1},
        "collateral {x2}": rep.collateral == {1},
    }
    elapsed = time.perf_counter() - t0
    failed = [k for k, v in checks.items() if not v]
    detail = (f"joint {u0.probability:.6g}/{u1.probability:.6g}, posterior "
              f"{c0.probability:.6g}/{c1.probability:.6g}, collateral x2")
    report(1, "golden numbers", not failed, detail if not failed else f"failed {failed}", elapsed, 1.0)


def test_2_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240601)
    n_models, n_attacks, worst, mismatches = 0, 0, 0.0, []
    while n_models < 200:
        model = random_model(rng, n_vars=(2, 4), max_size=5)
        n_models += 1
        for var in range(len(model.variables)):
            res = minimal_flip_radius(model, var, "tv")
            oracle, _ = grid_flip_radius(model, var)
            n_attacks += 1
            if res.feasible != math.isfinite(oracle):
                mismatches.append((n_models, var, "feasibility"))
            elif res.feasible:
                gap = abs(res.radius - oracle)
                worst = max(worst, gap)
                if gap > 1e-4:
                    mismatches.append((n_models, var, gap))
    elapsed = time.perf_counter() - t0
    detail = f"{n_models} models, {n_attacks} attacks, max gap {worst:.2e}, mismatches {mismatches[:3]}"
    report(2, "oracle equivalence", not mismatches, detail, elapsed, 120.0)


def test_3_inference_properties():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    problems, n = [], 0
    while n < 500:
        model = random_model(rng, n_vars=(1, 4), max_size=5)
        n += 1
        z = partition_z(model).z
        total = 0.0
        for a in assignments(model):
            p = posterior(model, a)
            total += p
            sat = bool(model.support[model.flat_index(a)])
            if not sat and p != 0.0:
                problems.append((n, "support", a))
            if sat and p < joint_unconstrained(model, a) * (1 - 1e-12):
                problems.append((n, "boost", a))
        if z > 0 and abs(total - 1.0) > 1e-9:
            problems.append((n, "normalization", total))
        best, score, zz = full_scan(model)
        res = map_constrained(model)
        if res.assignment != best or not math.isclose(res.probability, score / zz, rel_tol=1e-12):
            problems.append((n, "map", res.assignment, best))
    elapsed = time.perf_counter() - t0
    report(3, "inference properties", not problems, f"{n} models, problems {problems[:3]}", elapsed, 60.0)


def test_4_parser_robustness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1312)
    bad_trips, n = [], 0
    while n < 1000:
        f = random_ast(rng, depth=6)
        assert depth(f) <= 6
        n += 1
        try:
            if parse(to_text(f)) != f:
                bad_trips.append(to_text(f))
        except FormulaSyntaxError as exc:
            bad_trips.append((to_text(f), exc.diagnostic.message))
    undiagnosed = []
    for text in MALFORMED:
        try:
            parse(text)
            undiagnosed.append((text, "accepted"))
        except FormulaSyntaxError as exc:
            if not exc.diagnostic.message:
                undiagnosed.append((text, "empty message"))
        except Exception as exc:  # anything else is a crash
            undiagnosed.append((text, type(exc).__name__))
    elapsed = time.perf_counter() - t0
    ok = not bad_trips and not undiagnosed
    detail = (f"{n} round trips, {len(MALFORMED)} malformed inputs diagnosed, "
              f"failures {(bad_trips + undiagnosed)[:3]}")
    report(4, "parser robustness", ok, detail, elapsed)


def test_5_cascade_existence():
    t0 = time.perf_counter()
    model = addition_model()
    found = search_cascades(model)
    valid = [
        f for f in found
        if len(f.report.flipped_constrained) >= 2 and len(f.report.flipped_unconstrained) == 1
        and cascade_report(model, model.with_dist(f.attack.var, f.attack.witness), f.attack.var).cascades
    ]
    elapsed = time.perf_counter() - t0
    if valid:
        best = valid[0]
        detail = (f"{len(valid)} cascading attacks, cheapest on {model.names[best.attack.var]} "
                  f"at radius {best.attack.radius:.6g}, collateral "
                  f"{sorted(model.names[k] for k in best.report.collateral)}")
    else:
        detail = "no cascading attack found"
    report(5, "cascade existence", bool(valid), detail, elapsed)
