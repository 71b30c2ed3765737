"""Oblivious outcome sequences, the game runner and regret accounting.

Outcomes are stored 0-based: 0 is the first outcome and 1 the second.
Every environment produces its whole sequence from ``(env, T)`` before
the learner acts, so replaying one sequence against two policies
compares them on identical data.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from pmgames.games import Game, GameKind, chain, classify
from pmgames.policies import Internal, Policy, make_policy

__all__ = [
    "EpsilonPair",
    "Fixed",
    "IID",
    "ResetForcer",
    "RunRecord",
    "batch",
    "epsilon_pair",
    "generate_outcomes",
    "parse_env",
    "parse_env_family",
    "run",
    "summarize",
]

MAX_T = 1 << 30


@dataclass(frozen=True)
class IID:
    rho: float
    seed: int = 0
    kind = "iid"

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("iid frequency must lie in [0, 1]")

    @property
    def label(self) -> str:
        return f"iid:{self.rho:g}"


@dataclass(frozen=True)
class Fixed:
    sequence: tuple[int, ...]
    seed: int = 0
    kind = "fixed"

    @property
    def label(self) -> str:
        return "fixed"


@dataclass(frozen=True)
class EpsilonPair:
    """I.i.d. outcomes with outcome-2 probability ``rho_star`` shifted by ``epsilon(T)``.

    ``pair`` are the two neighbouring chain actions tied at ``rho_star``,
    listed low end first. Easy flavour: epsilon = scale/sqrt(T); model 1
    adds epsilon to the outcome-2 probability so the high-end action
    ``pair[1]`` is optimal, model 2 subtracts it. Hard flavour: epsilon =
    scale*T^(-1/3); model 1 adds epsilon to the outcome-1 probability, so
    ``pair[0]`` is optimal, model 2 subtracts it.
    """

    rho_star: Fraction
    flavor: str
    model: int
    scale: float
    pair: tuple[int, int]
    seed: int = 0
    kind = "epspair"

    def __post_init__(self):
        if self.flavor not in ("easy", "hard"):
            raise ValueError("flavor must be 'easy' or 'hard'")
        if self.model not in (1, 2):
            raise ValueError("model must be 1 or 2")
        if not 0 < self.rho_star < 1:
            raise ValueError("tie frequency must lie strictly inside (0, 1)")

    @property
    def label(self) -> str:
        return f"epspair:{self.flavor}:k={self.model}:scale={self.scale:g}"

    def epsilon(self, T: int) -> float:
        if self.flavor == "easy":
            return self.scale / math.sqrt(T)
        return self.scale * T ** (-1.0 / 3.0)

    def direction(self) -> int:
        """Sign applied to epsilon on the outcome-2 probability."""
        up = (self.flavor == "easy") == (self.model == 1)
        return 1 if up else -1

    @property
    def optimal_action(self) -> int:
        return self.pair[1] if self.direction() > 0 else self.pair[0]

    def rho(self, T: int) -> float:
        eps = self.epsilon(T)
        r = float(self.rho_star)
        if not 0.0 < eps < min(r, 1.0 - r):
            raise ValueError(f"epsilon {eps:.4g} leaves the open unit interval around {r:g}")
        return r + self.direction() * eps


@dataclass(frozen=True)
class ResetForcer:
    """Drive the running outcome-2 frequency back and forth across a band, then emit only outcome 2.

    Until ``switch * T`` rounds have passed, outcome 2 is emitted until the
    running frequency exceeds ``rho2p + m``, then outcome 1 until it drops
    below ``rho1p - m``, and so on, with margin ``m = (rho2p - rho1p) / 6``.
    """

    rho1p: float
    rho2p: float
    switch: float = 0.5
    seed: int = 0
    kind = "resetforcer"

    def __post_init__(self):
        if not 0.0 < self.rho1p < self.rho2p < 1.0:
            raise ValueError("reset forcer needs 0 < rho1p < rho2p < 1")
        if not 0.0 <= self.switch <= 1.0:
            raise ValueError("switch must lie in [0, 1]")

    @property
    def label(self) -> str:
        return f"resetforcer:switch={self.switch:g}"


Environment = Union[IID, Fixed, EpsilonPair, ResetForcer]


@lru_cache(maxsize=64)
def _forcer_sequence(rho1p: float, rho2p: float, switch: float, T: int) -> np.ndarray:
    margin = (rho2p - rho1p) / 6.0
    hi, lo = rho2p + margin, rho1p - margin
    out = np.ones(T, dtype=np.int8)
    n_osc = int(switch * T)
    count = 0
    emit_two = True
    for t in range(n_osc):
        if emit_two:
            count += 1
        else:
            out[t] = 0
        freq = count / (t + 1)
        if emit_two and freq > hi:
            emit_two = False
        elif not emit_two and freq < lo:
            emit_two = True
    out.setflags(write=False)
    return out


def generate_outcomes(env: Environment, T: int) -> np.ndarray:
    """Outcome sequence of length ``T`` (values 0/1), a pure function of ``(env, T)``."""
    if T < 1:
        raise ValueError("T must be at least 1")
    if isinstance(env, IID):
        rng = np.random.default_rng(env.seed)
        return (rng.random(T) < env.rho).astype(np.int8)
    if isinstance(env, Fixed):
        if len(env.sequence) < T:
            raise ValueError(f"fixed sequence has {len(env.sequence)} outcomes, need {T}")
        return np.array(env.sequence[:T], dtype=np.int8)
    if isinstance(env, EpsilonPair):
        rho = env.rho(T)
        rng = np.random.default_rng(env.seed)
        return (rng.random(T) < rho).astype(np.int8)
    if isinstance(env, ResetForcer):
        return _forcer_sequence(env.rho1p, env.rho2p, env.switch, T).copy()
    raise TypeError(f"unknown environment {env!r}")


def epsilon_pair(game: Game, flavor: str, model: int, scale: float, pair_index: Optional[int] = None) -> EpsilonPair:
    """Two-model construction for ``game``.

    Hard flavour uses the classifier's consecutive non-revealing pair.
    Easy flavour uses chain neighbours ``pair_index`` and ``pair_index + 1``
    (0-based, default 0).
    """
    ch = chain(game)
    if ch.K < 2:
        raise ValueError("the two-model construction needs a non-trivial game")
    if flavor == "hard":
        cls = classify(game)
        if cls.kind is not GameKind.HARD:
            raise ValueError(f"hard construction needs a hard game, got {cls.kind.value}")
        k = ch.actions.index(cls.certificate[0])
    else:
        k = 0 if pair_index is None else pair_index
        if not 0 <= k < ch.K - 1:
            raise ValueError(f"pair index {k} out of range for a chain of {ch.K} actions")
    return EpsilonPair(ch.boundaries[k], flavor, model, scale, (ch.actions[k], ch.actions[k + 1]))


def forcer_band(game: Game, half_width: float = 0.1) -> tuple[float, float]:
    """Switching band of the AppleTree root, or the tie frequency +- ``half_width`` when K = 2."""
    ch = chain(game)
    if ch.K >= 3:
        s = (ch.K + 1) // 2
        r1, r2 = ch.boundaries[s - 2], ch.boundaries[s - 1]
        return float((2 * r1 + r2) / 3), float((r1 + 2 * r2) / 3)
    if ch.K == 2:
        r = float(ch.boundaries[0])
        return max(r - half_width, 1e-3), min(r + half_width, 1 - 1e-3)
    raise ValueError("a trivial game has no switching band")


def _read_sequence(text: str) -> tuple[int, ...]:
    vals = []
    for tok in text.replace(",", " ").split():
        v = int(tok)
        if v not in (1, 2):
            raise ValueError(f"outcomes must be 1 or 2, got {v}")
        vals.append(v - 1)
    return tuple(vals)


def _kv(parts: Sequence[str]) -> dict:
    out = {}
    for p in parts:
        if "=" not in p:
            raise ValueError(f"expected key=value, got {p!r}")
        k, v = p.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def parse_env_family(spec: str, game: Optional[Game] = None, seed: int = 0) -> list[Environment]:
    """Parse an environment spec string. ``k=worst`` expands to both models."""
    kind, _, rest = spec.partition(":")
    kind = kind.strip().lower()
    if kind == "iid":
        return [IID(float(rest), seed)]
    if kind == "fixed":
        if rest.startswith("@"):
            with open(rest[1:], encoding="utf-8") as fh:
                seq = _read_sequence(fh.read())
        else:
            seq = _read_sequence(rest)
        return [Fixed(seq, seed)]
    if kind == "epspair":
        if game is None:
            raise ValueError("epspair environments need a game")
        parts = rest.split(":")
        flavor = parts[0].strip().lower()
        opts = _kv(parts[1:])
        scale = float(opts.get("scale", 0.3))
        pair = opts.get("pair")
        pair_index = None if pair is None else int(pair) - 1
        k = opts.get("k", "1")
        models = (1, 2) if k == "worst" else (int(k),)
        return [replace(epsilon_pair(game, flavor, m, scale, pair_index), seed=seed) for m in models]
    if kind == "resetforcer":
        opts = _kv([p for p in rest.split(":") if p])
        switch = float(opts.get("switch", 0.5))
        if "lo" in opts or "hi" in opts:
            lo, hi = float(opts["lo"]), float(opts["hi"])
        else:
            if game is None:
                raise ValueError("resetforcer without lo/hi needs a game")
            lo, hi = forcer_band(game)
        return [ResetForcer(lo, hi, switch, seed)]
    raise ValueError(f"unknown environment {spec!r}")


def parse_env(spec: str, game: Optional[Game] = None, seed: int = 0) -> Environment:
    family = parse_env_family(spec, game, seed)
    if len(family) != 1:
        raise ValueError(f"{spec!r} describes {len(family)} environments; use parse_env_family")
    return family[0]


@dataclass
class RunRecord:
    policy: str
    env: str
    T: int
    seed: int
    actions: np.ndarray
    outcomes: np.ndarray
    losses: np.ndarray
    cum_regret: np.ndarray
    final_regret: float
    final_regret_exact: Fraction
    reset_count: int
    play_counts: np.ndarray
    reveal: np.ndarray
    root_rho: Optional[np.ndarray] = None

    @property
    def running_freq(self) -> np.ndarray:
        t = np.arange(1, self.T + 1)
        return np.cumsum(self.outcomes, dtype=np.int64) / t

    def to_csv(self, dest) -> None:
        """Write columns t, action, outcome, loss, cum_regret (1-based action and outcome)."""
        own = isinstance(dest, (str, os.PathLike))
        fh = open(dest, "w", newline="", encoding="utf-8") if own else dest
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "action", "outcome", "loss", "cum_regret"])
            for t in range(self.T):
                w.writerow([
                    t + 1, int(self.actions[t]) + 1, int(self.outcomes[t]) + 1,
                    repr(float(self.losses[t])), repr(float(self.cum_regret[t])),
                ])
        finally:
            if own:
                fh.close()


class _Replay:
    """Random source that hands out a fixed array of uniforms."""

    def __init__(self, values: np.ndarray):
        self._it = iter(values.tolist())

    def random(self) -> float:
        return next(self._it)


def regret_exact(game: Game, actions: np.ndarray, outcomes: np.ndarray) -> Fraction:
    counts = np.zeros((game.n_actions, 2), dtype=np.int64)
    np.add.at(counts, (actions, outcomes), 1)
    learner = sum(
        (int(counts[i, j]) * game.loss[i][j] for i in range(game.n_actions) for j in range(2)),
        Fraction(0),
    )
    n2 = int(outcomes.sum())
    n1 = len(outcomes) - n2
    best = min(n1 * x + n2 * y for x, y in game.loss)
    return learner - best


def regret_curve(game: Game, actions: np.ndarray, outcomes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-round losses and the cumulative regret after every round."""
    L = game.loss_array()
    n = game.n_actions
    losses = L[actions, outcomes]
    cell = actions * 2 + outcomes
    # cumulative counts are exact integers, so no rounding accumulates over rounds
    onehot = np.zeros((len(actions), 2 * n), dtype=np.int64)
    onehot[np.arange(len(actions)), cell] = 1
    learner = np.cumsum(onehot, axis=0).astype(np.float64) @ L.reshape(-1)
    n2 = np.cumsum(outcomes, dtype=np.int64).astype(np.float64)
    n1 = np.arange(1, len(outcomes) + 1, dtype=np.float64) - n2
    best = np.min(np.outer(L[:, 0], n1) + np.outer(L[:, 1], n2), axis=0)
    return losses, learner - best


def run(
    policy: Union[str, Policy],
    env: Environment,
    game: Game,
    T: int,
    seed: int,
    delta: Optional[float] = None,
    explore_scale: float = 1.0,
    engine: str = "kernel",
) -> RunRecord:
    """Play ``T`` rounds of ``policy`` against ``env`` and account the regret.

    ``engine='kernel'`` runs the array loop; ``engine='object'`` steps the
    policy's choose/observe interface with raw feedback symbols decoded by
    the game. Both consume the same uniforms drawn from ``seed``.
    """
    if T < 1 or T > MAX_T:
        raise ValueError(f"T must lie in [1, {MAX_T}]")
    pol = make_policy(policy, game, T, delta, explore_scale) if isinstance(policy, str) else policy
    outcomes = generate_outcomes(env, T)
    uniforms = np.random.default_rng(seed).random(T)
    root_rho = None
    if engine == "kernel":
        res = pol.run_kernel(outcomes, uniforms)
        actions, reveal, resets = res.actions, res.reveal, res.resets
        root_rho = res.root_rho
    elif engine == "object":
        src = _Replay(uniforms)
        actions = np.empty(T, dtype=np.int64)
        reveal = np.empty(T, dtype=np.float64)
        track = hasattr(pol, "root") and isinstance(pol.root, Internal)
        rho = np.empty(T) if track else None
        start = pol.reset_count
        for t in range(T):
            a = pol.choose(src)
            reveal[t] = pol.reveal_prob
            symbol = game.feedback[a][int(outcomes[t])]
            pol.observe(game.observe(a, symbol))
            actions[t] = a
            if track:
                rho[t] = pol.root.rho_hat
        resets = pol.reset_count - start
        root_rho = rho
    else:
        raise ValueError(f"unknown engine {engine!r}")
    actions = np.asarray(actions, dtype=np.int64)
    outcomes64 = outcomes.astype(np.int64)
    losses, curve = regret_curve(game, actions, outcomes64)
    exact = regret_exact(game, actions, outcomes64)
    return RunRecord(
        policy=policy if isinstance(policy, str) else pol.name,
        env=env.label,
        T=T,
        seed=seed,
        actions=actions,
        outcomes=outcomes,
        losses=losses,
        cum_regret=curve,
        final_regret=float(exact),
        final_regret_exact=exact,
        reset_count=int(resets),
        play_counts=np.bincount(actions, minlength=game.n_actions),
        reveal=reveal,
        root_rho=root_rho,
    )


def run_seeds(master_seed: int, T: int, rep: int, member: int = 0) -> tuple[int, int]:
    """(environment seed, policy seed) for one replicate; independent of execution order."""
    ss = np.random.SeedSequence([master_seed, T, rep, member])
    env_seed, pol_seed = ss.generate_state(2, dtype=np.uint64)
    return int(env_seed), int(pol_seed)


def default_threads() -> int:
    raw = os.environ.get("PM_GAMES_THREADS")
    if raw:
        return max(1, int(raw))
    return os.cpu_count() or 1


@dataclass
class BatchResult:
    finals: dict  # (member, T, rep) -> final regret
    resets: dict  # (member, T, rep) -> root reset count
    members: list
    Ts: list
    n_seeds: int
    records: dict = field(default_factory=dict)

    def summary(self) -> list[dict]:
        return summarize(self)


def batch(
    policy: str,
    envs: Union[Environment, Sequence[Environment]],
    game: Game,
    Ts: Iterable[int],
    n_seeds: int,
    master_seed: int = 0,
    delta: Optional[float] = None,
    explore_scale: float = 1.0,
    threads: Optional[int] = None,
    keep_records: bool = False,
) -> BatchResult:
    """Run every (environment, T, replicate) combination.

    Seeds come from :func:`run_seeds`, so results do not depend on the
    thread count or on completion order.
    """
    members = [envs] if not isinstance(envs, (list, tuple)) else list(envs)
    Ts = list(Ts)
    if not members or not Ts or n_seeds < 1:
        raise ValueError("batch needs at least one environment, one T and one seed")
    jobs = [(m, T, r) for m in range(len(members)) for T in Ts for r in range(n_seeds)]

    def one(job):
        m, T, r = job
        env_seed, pol_seed = run_seeds(master_seed, T, r, m)
        rec = run(policy, replace(members[m], seed=env_seed), game, T, pol_seed, delta, explore_scale)
        return job, rec

    finals, resets, records = {}, {}, {}
    n_threads = threads or default_threads()
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(one, jobs))
    else:
        results = [one(j) for j in jobs]
    for job, rec in results:
        finals[job] = rec.final_regret
        resets[job] = rec.reset_count
        if keep_records:
            records[job] = rec
    return BatchResult(finals, resets, members, Ts, n_seeds, records)


def summarize(result: BatchResult) -> list[dict]:
    """One row per T: quantiles of the final regret across seeds.

    With several environments (both models of a pair), the row reports
    the environment whose median regret is larger.
    """
    rows = []
    for T in result.Ts:
        best = None
        for m, env in enumerate(result.members):
            vals = np.array([result.finals[(m, T, r)] for r in range(result.n_seeds)])
            res = np.array([result.resets[(m, T, r)] for r in range(result.n_seeds)])
            q1, med, q3 = np.quantile(vals, [0.25, 0.5, 0.75])
            row = {
                "T": T,
                "env": env.label,
                "n": result.n_seeds,
                "median": float(med),
                "q1": float(q1),
                "q3": float(q3),
                "mean": float(vals.mean()),
                "min": float(vals.min()),
                "max": float(vals.max()),
                "median_resets": float(np.median(res)),
            }
            if best is None or row["median"] > best["median"]:
                best = row
        rows.append(best)
    return rows


SUMMARY_COLUMNS = ["T", "env", "n", "median", "q1", "q3", "mean", "min", "max", "median_resets"]


def write_summary(rows: list[dict], dest) -> None:
    own = isinstance(dest, (str, os.PathLike))
    fh = open(dest, "w", newline="", encoding="utf-8") if own else dest
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for row in rows:
            w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in SUMMARY_COLUMNS])
    finally:
        if own:
            fh.close()


def summary_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    write_summary(rows, buf)
    return buf.getvalue()
