"""Independent reference implementations used only by the tests."""

from fractions import Fraction
from math import lcm


def scaled_losses(game):
    """Integer loss pairs after multiplying by the common denominator."""
    den = 1
    for row in game.loss:
        for x in row:
            den = lcm(den, Fraction(x).denominator)
    return [(int(a * den), int(b * den)) for a, b in game.loss]


def candidate_points(pts):
    """Outcome-2 frequencies u/v covering every cell: ends, pairwise ties and midpoints."""
    cands = {Fraction(0), Fraction(1)}
    for i, (a1, b1) in enumerate(pts):
        for a2, b2 in pts[i + 1:]:
            dx, dy = a1 - a2, b1 - b2
            if dx != dy:
                r = Fraction(dx, dx - dy)
                if 0 <= r <= 1:
                    cands.add(r)
    ordered = sorted(cands)
    mids = [(x + y) / 2 for x, y in zip(ordered, ordered[1:])]
    return [(r.numerator, r.denominator) for r in ordered + mids]


def brute_force_flags(game):
    """(dominated, degenerate) tuples straight from the definitions, by exhaustive evaluation."""
    pts = scaled_losses(game)
    cands = candidate_points(pts)
    n = len(pts)
    # v * loss at frequency u / v, exact in integers
    vals = [[(v - u) * a + u * b for (a, b) in pts] for (u, v) in cands]
    dominated, degenerate = [], []
    for i in range(n):
        strictly_best = any(
            all(row[i] < row[j] for j in range(n) if pts[j] != pts[i]) for row in vals
        )
        weakly_best = any(row[i] <= min(row) for row in vals)
        dom = not strictly_best
        dominated.append(dom)
        degenerate.append(dom and weakly_best)
    return tuple(dominated), tuple(degenerate)


def brute_force_class(game):
    """Class name from the oracle flags, using the same precedence rules."""
    dominated, degenerate = brute_force_flags(game)
    revealing = game.revealing
    reps = {}
    for i in range(game.n_actions):
        if not dominated[i]:
            reps.setdefault(game.loss[i], []).append(i)
    if len(reps) == 1:
        return "Trivial"
    if not any(revealing):
        return "Hopeless"
    if any(r and d for r, d in zip(revealing, degenerate)):
        return "Degenerate"
    # chain points ordered by first-outcome loss; a point is revealing if any duplicate is
    chain = sorted(reps, key=lambda p: (p[0], -p[1]))
    rev = [any(revealing[i] for i in reps[p]) for p in chain]
    if any(not a and not b for a, b in zip(rev, rev[1:])):
        return "Hard"
    return "Easy"
