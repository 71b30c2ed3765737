import math
from fractions import Fraction

import numpy as np
import pytest

from pmgames import bench
from pmgames.bench import (
    concentration_check,
    concentration_start,
    fit_exponent,
    khinchine_bound,
    khinchine_check,
    kl_check,
    leaf_parameter_check,
    reset_growth_check,
)

F = Fraction
GRID = [2**k for k in range(10, 17)]


def test_fit_exact_square_root():
    fit = fit_exponent(GRID, [3 * math.sqrt(T) for T in GRID])
    assert fit.alpha_hat == pytest.approx(0.5, abs=1e-9)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.predict(4096) == pytest.approx(3 * 64)


def test_fit_linear():
    assert fit_exponent(GRID, [0.2 * T for T in GRID]).alpha_hat == pytest.approx(1.0, abs=1e-9)


def test_fit_two_thirds_with_noise():
    rng = np.random.default_rng(0)
    meds = [T ** (2 / 3) * (1 + 0.05 * rng.standard_normal()) for T in GRID]
    assert 0.6 <= fit_exponent(GRID, meds).alpha_hat <= 0.73


def test_fit_drops_nonpositive_and_needs_four_points():
    meds = [math.sqrt(T) for T in GRID]
    meds[0] = -3.0
    fit = fit_exponent(GRID, meds)
    assert fit.Ts == tuple(float(T) for T in GRID[1:])
    with pytest.raises(ValueError, match="degenerate grid"):
        fit_exponent(GRID, [1, 2, 3, -1, -1, 0, 0])
    with pytest.raises(ValueError, match="degenerate grid"):
        fit_exponent([1024] * 5, [1, 2, 3, 4, 5])


def test_kl_values():
    assert bench.bernoulli_kl(0.3, 0.3) == 0.0
    expected = 0.4 * math.log(2 / 3) + 0.6 * math.log(3 / 2)
    assert bench.bernoulli_kl(0.4, 0.6) == pytest.approx(expected, rel=1e-12)
    c = (8 + 3 * 0.79) / (4 * 0.1)
    assert bench.bernoulli_kl(0.05, 0.15) <= c * 2 * 0.05**2


def test_kl_check_passes_and_rejects_bad_alpha():
    rep = kl_check()
    assert rep.passed and rep.statistic <= 1.0
    assert len(rep.details) == 9 * 25
    with pytest.raises(ValueError):
        kl_check([0.0])


def test_khinchine_bound_closed_form():
    assert khinchine_bound([1, -1], [F(1, 2), F(1, 2)]) == pytest.approx(1 / math.sqrt(3))
    # {+3 w.p. 1/4, -1 w.p. 3/4}: variance 3, fourth moment 21
    assert khinchine_bound([3, -1], [F(1, 4), F(3, 4)]) == pytest.approx(3**1.5 / math.sqrt(63))


def test_khinchine_symmetric_coin_near_gaussian_limit():
    rep = khinchine_check([1, -1], [F(1, 2), F(1, 2)], Ts=[100], reps=20_000, seed=1)
    assert rep.passed
    assert rep.details[0]["bound"] == pytest.approx(10 / math.sqrt(3))
    assert rep.details[0]["estimate"] == pytest.approx(math.sqrt(200 / math.pi), rel=0.03)


def test_khinchine_asymmetric_passes():
    assert khinchine_check([3, -1], [F(1, 4), F(3, 4)], Ts=[400], reps=100_000).passed


def test_khinchine_preconditions():
    with pytest.raises(ValueError, match="positive variance"):
        khinchine_check([0, 0], [F(1, 2), F(1, 2)])
    with pytest.raises(ValueError, match="zero mean"):
        khinchine_check([1, 0], [F(1, 2), F(1, 2)])
    with pytest.raises(ValueError, match="zero mean"):
        khinchine_check([1.0, -0.5], [0.5, 0.5])


@pytest.mark.parametrize("name", sorted(bench.KHINCHINE_DISTRIBUTIONS))
def test_default_distributions_are_asymmetric_and_centred(name):
    values, probs = bench.KHINCHINE_DISTRIBUTIONS[name]
    assert sum(F(v) * p for v, p in zip(values, probs)) == 0
    assert sum(F(v) ** 3 * p for v, p in zip(values, probs)) != 0


def test_leaf_parameter_check():
    rep = leaf_parameter_check()
    assert rep.passed and rep.statistic <= 1e-12
    assert {d["param"] for d in rep.details} == {"beta", "gamma", "eta_partial", "eta_full"}


def test_concentration_threshold_formula():
    assert concentration_start(4096, 0.1, 1 / 6) == pytest.approx(8 * 64 * math.log(81920) * 12, rel=1e-12)


def test_concentration_check_reports_vacuous_window():
    rep = concentration_check(n_seeds=20)
    assert rep.params["vacuous"] and rep.statistic == 0.0 and rep.passed


def test_concentration_check_with_early_window():
    rep = concentration_check(n_seeds=30, start=256)
    assert not rep.params["vacuous"]
    assert rep.details[0]["max_deviation"] > 0
    assert rep.passed


def test_reset_growth_small_grid():
    rep = reset_growth_check(Ts=[2**k for k in range(10, 14)], n_seeds=3)
    resets = [d["resets"] for d in rep.details[:-1]]
    assert min(resets) >= 1
    assert 0.0 <= rep.statistic <= 1.0


def test_report_line():
    rep = bench.TheoryCheckReport("demo", {}, 0.5, 1.0, True)
    assert rep.line() == "demo: PASS statistic=0.5 bound=1"
