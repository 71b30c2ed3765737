"""Regret-exponent fitting and numerical theory checks.

Each check returns a :class:`TheoryCheckReport` whose ``passed`` flag is
exactly the stated inequality evaluated on the measured statistic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from pmgames.games import Game, load_fixture
from pmgames.policies import AppleTree, Internal, leaf_parameters
from pmgames.simul import IID, ResetForcer, forcer_band, run, run_seeds

__all__ = [
    "ExponentFit",
    "KHINCHINE_DISTRIBUTIONS",
    "TheoryCheckReport",
    "concentration_check",
    "fit_exponent",
    "khinchine_check",
    "kl_check",
    "leaf_parameter_check",
    "reset_growth_check",
]

# 8 ln(3/e), rounded to two decimals
C_PRIME = 0.79


@dataclass(frozen=True)
class ExponentFit:
    alpha_hat: float
    intercept: float
    r_squared: float
    Ts: tuple
    medians: tuple

    def predict(self, T) -> np.ndarray:
        return np.exp(self.intercept) * np.asarray(T, dtype=float) ** self.alpha_hat

    def to_dict(self) -> dict:
        return {
            "alpha_hat": self.alpha_hat,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "T": list(self.Ts),
            "median": list(self.medians),
        }


def fit_exponent(Ts: Sequence[float], medians: Sequence[float]) -> ExponentFit:
    """Least squares of ln(median) on ln(T), using only points with a positive median.

    Raises ValueError when fewer than four distinct T values remain.
    """
    Ts = np.asarray(Ts, dtype=float)
    med = np.asarray(medians, dtype=float)
    if Ts.shape != med.shape:
        raise ValueError("T grid and medians differ in length")
    keep = med > 0
    Ts, med = Ts[keep], med[keep]
    if len(np.unique(Ts)) < 4:
        raise ValueError(f"degenerate grid: {len(np.unique(Ts))} usable points, need at least 4")
    x, y = np.log(Ts), np.log(med)
    res = stats.linregress(x, y)
    pred = res.intercept + res.slope * x
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return ExponentFit(float(res.slope), float(res.intercept), r2, tuple(Ts.tolist()), tuple(med.tolist()))


@dataclass
class TheoryCheckReport:
    name: str
    params: dict
    statistic: float
    bound: float
    passed: bool
    details: list = field(default_factory=list)

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{self.name}: {verdict} statistic={self.statistic:.6g} bound={self.bound:.6g}"


def bernoulli_kl(a: float, b: float) -> float:
    """D(Bern(a) || Bern(b)) in nats."""
    return float(stats.entropy([a, 1.0 - a], [b, 1.0 - b]))


def kl_check(alphas: Optional[Sequence[float]] = None, n_eps: int = 25) -> TheoryCheckReport:
    """D(p - e || p + e) <= c * ||e||^2 with p = (a, 1-a), e = (eps, -eps), c = (8 + 3c') / (4 min p).

    For every ``a`` the epsilons run geometrically from 1e-3 up to
    min(a, 1-a)/2. The statistic is the largest ratio of divergence to
    bound, and the check passes when it is at most 1.
    """
    if alphas is None:
        alphas = [k / 10 for k in range(1, 10)]
    worst, details = 0.0, []
    for a in alphas:
        if not 0.0 < a < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {a}")
        top = min(a, 1.0 - a) / 2.0
        eps_grid = np.geomspace(1e-3, top, n_eps) if top > 1e-3 else np.array([top])
        c = (8.0 + 3.0 * C_PRIME) / (4.0 * min(a, 1.0 - a))
        for eps in eps_grid:
            d = bernoulli_kl(a - eps, a + eps)
            ratio = d / (c * 2.0 * eps * eps)
            details.append({"alpha": a, "epsilon": float(eps), "kl": d, "ratio": ratio})
            worst = max(worst, ratio)
    return TheoryCheckReport("kl_check", {"alphas": list(alphas), "n_eps": n_eps}, worst, 1.0, worst <= 1.0, details)


KHINCHINE_DISTRIBUTIONS = {
    "three_vs_one": ((3, -1), (Fraction(1, 4), Fraction(3, 4))),
    "nine_vs_one": ((9, -1), (Fraction(1, 10), Fraction(9, 10))),
    "two_vs_one": ((2, -1), (Fraction(1, 3), Fraction(2, 3))),
    "three_point": ((-2, 0, 3), (Fraction(3, 10), Fraction(1, 2), Fraction(1, 5))),
    "skewed_three": ((-2, 1, 6), (Fraction(1, 2), Fraction(2, 5), Fraction(1, 10))),
}


def khinchine_bound(values, probs) -> float:
    """sigma^3 / sqrt(3 mu_4), the per-sqrt(T) lower bound on E|S_T|."""
    v = np.asarray(values, dtype=float)
    p = np.asarray([float(x) for x in probs])
    var = float(p @ v**2)
    mu4 = float(p @ v**4)
    return var**1.5 / math.sqrt(3.0 * mu4)


def khinchine_check(
    values: Sequence[float],
    probs: Sequence,
    Ts: Sequence[int] = (100, 10_000),
    reps: int = 100_000,
    seed: int = 0,
    name: str = "khinchine_check",
) -> TheoryCheckReport:
    """Monte Carlo estimate of E|X_1 + ... + X_T| against sigma^3/sqrt(3 mu_4) * sqrt(T).

    Passes when every estimate is at least the bound minus three standard
    errors. Sums are sampled exactly through multinomial counts.
    """
    if len(values) != len(probs) or not values:
        raise ValueError("values and probabilities must be non-empty and of equal length")
    exact = all(isinstance(x, (int, Fraction)) for x in list(values) + list(probs))
    if exact:
        if sum(probs) != 1:
            raise ValueError("probabilities must sum to 1")
        mean = sum(Fraction(x) * q for x, q in zip(values, probs))
        zero_mean = mean == 0
        zero_var = all(Fraction(x) == 0 for x, q in zip(values, probs) if q > 0)
    else:
        p = np.asarray(probs, dtype=float)
        v = np.asarray(values, dtype=float)
        if not math.isclose(p.sum(), 1.0, abs_tol=1e-12) or (p < 0).any():
            raise ValueError("probabilities must be non-negative and sum to 1")
        scale = float(np.abs(v).max()) or 1.0
        zero_mean = abs(float(p @ v)) <= 1e-12 * scale
        zero_var = float(p @ v**2) == 0.0
    if not zero_mean:
        raise ValueError("distribution must have zero mean")
    if zero_var:
        raise ValueError("distribution must have positive variance")
    v = np.asarray(values, dtype=float)
    p = np.asarray([float(x) for x in probs])
    p = p / p.sum()
    per_root = khinchine_bound(values, probs)
    rng = np.random.default_rng(seed)
    details, margin = [], math.inf
    for T in Ts:
        counts = rng.multinomial(int(T), p, size=reps)
        abs_sums = np.abs(counts @ v)
        est = float(abs_sums.mean())
        se = float(abs_sums.std(ddof=1) / math.sqrt(reps))
        bound = per_root * math.sqrt(T)
        details.append({"T": int(T), "estimate": est, "se": se, "bound": bound})
        margin = min(margin, (est + 3.0 * se) / bound)
    params = {"values": [float(x) for x in values], "probs": p.tolist(), "T": list(Ts), "reps": reps}
    return TheoryCheckReport(name, params, margin, 1.0, margin >= 1.0, details)


def leaf_parameter_check(
    cases: Sequence[tuple[int, float]] = ((1000, 0.1), (10_000, 0.01)),
    bits: int = 80,
    tol: float = 1e-12,
) -> TheoryCheckReport:
    """Relative error of the double-precision leaf parameters against a high-precision evaluation."""
    import mpmath

    worst, details = 0.0, []
    with mpmath.workprec(bits):
        for T, delta in cases:
            d = mpmath.mpf(delta)
            beta = mpmath.sqrt(mpmath.log(2 / d) / (2 * T))
            gamma = 8 * beta / (3 + beta)
            refs = {
                "beta": beta,
                "gamma": gamma,
                "eta_partial": gamma / 4,
                "eta_full": mpmath.sqrt(8 * mpmath.log(2) / T),
            }
            b, g, e_part = leaf_parameters(T, delta, False)
            e_full = leaf_parameters(T, delta, True)[2]
            got = {"beta": b, "gamma": g, "eta_partial": e_part, "eta_full": e_full}
            for key, ref in refs.items():
                rel = float(abs((mpmath.mpf(got[key]) - ref) / ref))
                worst = max(worst, rel)
                details.append({"T": T, "delta": delta, "param": key, "value": got[key], "rel_error": rel})
    return TheoryCheckReport("leaf_parameter_check", {"cases": list(cases), "bits": bits}, worst, tol, worst <= tol, details)


def concentration_start(T: int, delta: float, gap: float) -> float:
    """Round after which the root estimate is claimed to stay within ``gap`` of the running frequency."""
    return 8.0 * math.sqrt(T) * math.log(2.0 * T / delta) / (3.0 * gap * gap)


def concentration_check(
    game: Optional[Game] = None,
    T: int = 1 << 12,
    delta: float = 0.1,
    rho: float = 0.5,
    n_seeds: int = 1000,
    master_seed: int = 0,
    start: Optional[float] = None,
) -> TheoryCheckReport:
    """Frequency of runs where the root estimate strays more than the band width from the running frequency.

    Only rounds at or after ``start`` count (default: the theoretical
    threshold). Passes when the frequency is at most ``delta`` plus two
    binomial standard errors.
    """
    game = load_fixture("three_action") if game is None else game
    tree = AppleTree(game, T, delta)
    if not isinstance(tree.root, Internal):
        raise ValueError("concentration check needs a game whose tree has an internal root")
    gap = tree.root.rho2p - tree.root.rho1p
    t0 = concentration_start(T, delta, gap) if start is None else float(start)
    first = max(int(math.ceil(t0)), 1)
    bad = 0
    max_dev = 0.0
    for rep in range(n_seeds):
        env_seed, pol_seed = run_seeds(master_seed, T, rep)
        rec = run(AppleTree(game, T, delta), IID(rho, env_seed), game, T, pol_seed)
        if first <= T:
            dev = np.abs(rec.root_rho[first - 1 :] - rec.running_freq[first - 1 :])
            m = float(dev.max())
            max_dev = max(max_dev, m)
            bad += int(m > gap)
    freq = bad / n_seeds
    se = math.sqrt(freq * (1.0 - freq) / n_seeds)
    bound = delta + 2.0 * se
    params = {"T": T, "delta": delta, "rho": rho, "n_seeds": n_seeds, "gap": gap, "start": t0,
              "vacuous": first > T}
    details = [{"violations": bad, "max_deviation": max_dev, "se": se}]
    return TheoryCheckReport("concentration_check", params, freq, bound, freq <= bound, details)


def reset_growth_check(
    game: Optional[Game] = None,
    Ts: Sequence[int] = tuple(2**k for k in range(10, 18)),
    n_seeds: int = 5,
    master_seed: int = 0,
    switch: float = 0.5,
    delta: Optional[float] = None,
) -> TheoryCheckReport:
    """Median root reset count S(T) under the reset forcer, fitted as a ln T + b.

    Passes when S(T) >= 1 everywhere and the residual differences show no
    upward trend (one-sided sign test, p > 0.05). The statistic is the
    sign-test p-value.
    """
    game = load_fixture("three_action") if game is None else game
    lo, hi = forcer_band(game)
    counts = []
    for T in Ts:
        per_seed = []
        for rep in range(n_seeds):
            _, pol_seed = run_seeds(master_seed, T, rep)
            rec = run(AppleTree(game, T, delta), ResetForcer(lo, hi, switch), game, T, pol_seed)
            per_seed.append(rec.reset_count)
        counts.append(float(np.median(per_seed)))
    S = np.array(counts)
    x = np.log(np.asarray(Ts, dtype=float))
    fit = stats.linregress(x, S)
    resid = S - (fit.intercept + fit.slope * x)
    diffs = np.diff(resid)
    ups = int((diffs > 0).sum())
    nonzero = int((diffs != 0).sum())
    p_value = float(stats.binomtest(ups, nonzero, 0.5, alternative="greater").pvalue) if nonzero else 1.0
    ok = p_value > 0.05 and bool((S >= 1).all())
    params = {"T": list(Ts), "n_seeds": n_seeds, "switch": switch, "band": [lo, hi]}
    details = [{"T": int(T), "resets": float(s), "residual": float(r)} for T, s, r in zip(Ts, S, resid)]
    details.append({"slope": float(fit.slope), "intercept": float(fit.intercept), "ups": ups, "min_resets": float(S.min())})
    return TheoryCheckReport("reset_growth_check", params, p_value, 0.05, ok, details)
