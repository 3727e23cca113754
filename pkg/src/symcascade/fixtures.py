"""The two-digit addition example: x1, x2 in 1..4 constrained by x1 + x2 = 5.

The first digit's classifier is confident, the second almost uniform with a
slight edge ``epsilon`` on the correct value 4. Swapping the first vector for
(0.1, 0.9, 0, 0) is the attack.
"""

from __future__ import annotations

from fractions import Fraction

from .model import Model, build_model, declare

EPSILON = 0.001
CONSTRAINT = "x1 + x2 = 5"
CLEAN_X1 = (0.9, 0.1, 0.0, 0.0)
ATTACKED_X1 = (0.1, 0.9, 0.0, 0.0)


def round_to_simplex(values, decimals: int = 6) -> tuple[float, ...]:
    """Round exact probabilities (Fractions or decimal strings) keeping the sum exactly 1.

    Largest-remainder rounding: floor every entry to the grid, then hand the
    missing units to the largest remainders (earliest entry first on ties).
    Plain rounding of 1/4 - 0.001/3 three times plus 1/4 + 0.001 overshoots 1
    by 1e-6, which no 1e-9 simplex check accepts.
    """
    scale = 10**decimals
    exact = [Fraction(v) * scale for v in values]
    if sum(exact) != scale:
        raise ValueError("values must sum to exactly 1")
    floors = [int(v) for v in exact]
    missing = scale - sum(floors)
    order = sorted(range(len(exact)), key=lambda k: (-(exact[k] - floors[k]), k))
    for k in order[:missing]:
        floors[k] += 1
    return tuple(f / scale for f in floors)


def second_digit(epsilon: float = EPSILON, decimals: int = 6) -> tuple[float, ...]:
    """(1/4 - eps/3, 1/4 - eps/3, 1/4 - eps/3, 1/4 + eps), rounded on the simplex."""
    eps = Fraction(str(epsilon))
    quarter = Fraction(1, 4)
    return round_to_simplex([quarter - eps / 3] * 3 + [quarter + eps], decimals)


def addition_model(epsilon: float = EPSILON, first=CLEAN_X1) -> Model:
    return build_model(
        [declare("x1", 1, 4, "z1"), declare("x2", 1, 4, "z2")],
        [first, second_digit(epsilon)],
        CONSTRAINT,
    )


def attacked_addition_model(epsilon: float = EPSILON) -> Model:
    return addition_model(epsilon, ATTACKED_X1)
