"""Learning policies: AppleTree for easy games and baselines for the other classes.

Every policy alternates ``choose(rng)`` and ``observe(outcome)``. The
outcome passed to ``observe`` is the feedback already decoded by the
game: 0 or 1 when the played action revealed the outcome, None otherwise.
``run_kernel`` plays a whole pre-generated outcome sequence in one call
through the (optionally compiled) loops in :mod:`pmgames.kernels`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional, Union

import numpy as np

from pmgames import kernels as K
from pmgames.games import Game, GameKind, chain, classify

__all__ = [
    "AppleTree",
    "ConstantPolicy",
    "EWAPolicy",
    "ForcedExploration",
    "Internal",
    "KernelResult",
    "Leaf",
    "Policy",
    "UniformPolicy",
    "build_tree",
    "flatten_tree",
    "leaf_parameters",
    "make_policy",
    "play",
    "play_at_leaf",
]


class KernelResult(NamedTuple):
    actions: np.ndarray
    reveal: np.ndarray
    root_rho: Optional[np.ndarray]
    resets: int


def leaf_parameters(T: int, delta: float, full: bool) -> tuple[float, float, float]:
    """(beta, gamma, eta) for a two-action leaf with horizon ``T`` and confidence ``delta``."""
    beta = math.sqrt(math.log(2.0 / delta) / (2.0 * T))
    gamma = 8.0 * beta / (3.0 + beta)
    if full:
        eta = math.sqrt(8.0 * math.log(2.0) / T)
    else:
        eta = gamma / 4.0
    return beta, gamma, eta


LEAF_RULES = ("exp3p", "penalized")


@dataclass(eq=False)
class Leaf:
    """Two-action subgame. ``actions[0]`` is revealing.

    One-armed leaves store the loss matrix with the second row subtracted
    from the first, so only the revealing action carries loss. Weights
    are kept as logs shifted so the larger one is 0.

    One-armed update rules:

    ``exp3p``
        Exp3.P on gains ``(hi - loss) / span`` in [0, 1]. Both arms get an
        estimate every round, and the ``beta`` term is an exploration bonus.
    ``penalized``
        Loss-form update applied only after revealing plays:
        ``L1 = (loss + beta) / p`` and ``L2 = beta / (1 - p)``. Here ``beta``
        acts as a penalty on the rarely played arm, which can lock the leaf
        onto the revealing action.
    """

    actions: tuple[int, int]
    full: bool
    loss: tuple[tuple[float, float], tuple[float, float]]
    beta: float
    gamma: float
    eta: float
    delta: float
    rule: str = "exp3p"
    logw: list = field(default_factory=lambda: [0.0, 0.0])

    @property
    def gain_scale(self) -> tuple[float, float]:
        """(hi, span) mapping the one-armed losses onto gains in [0, 1]."""
        vals = (self.loss[0][0], self.loss[0][1], 0.0)
        hi, lo = max(vals), min(vals)
        return hi, (hi - lo) or 1.0

    @property
    def weights(self) -> tuple[float, float]:
        q = K.first_share(self.logw[0], self.logw[1])
        return q, 1.0 - q

    def reset(self) -> None:
        self.logw[0] = 0.0
        self.logw[1] = 0.0

    def choose(self, u: float) -> tuple[float, int]:
        q = K.first_share(self.logw[0], self.logw[1])
        if self.full:
            return 1.0, (0 if u < q else 1)
        p = (1.0 - self.gamma) * q + self.gamma / 2.0
        return p, (0 if u < p else 1)

    def update(self, p: float, slot: int, h: Optional[int]) -> None:
        if self.full:
            self.logw[0] -= self.eta * self.loss[0][h]
            self.logw[1] -= self.eta * self.loss[1][h]
        elif self.rule == "penalized":
            if slot != 0:
                return
            big1 = (self.loss[0][h] + self.beta) / p
            big2 = self.beta / (1.0 - p)
            self.logw[0] -= self.eta * big1
            self.logw[1] -= self.eta * big2
        else:
            hi, span = self.gain_scale
            if slot == 0:
                est1 = ((hi - self.loss[0][h]) / span + self.beta) / p
                est2 = self.beta / (1.0 - p)
            else:
                est1 = self.beta / p
                est2 = (hi / span + self.beta) / (1.0 - p)
            self.logw[0] += self.eta * est1
            self.logw[1] += self.eta * est2
        m = max(self.logw[0], self.logw[1])
        self.logw[0] -= m
        self.logw[1] -= m


@dataclass(eq=False)
class Internal:
    """Split node: child 1 holds the low end of the chain, child 2 the high end.

    Both children contain the shared action. ``rho_star`` are the exact tie
    frequencies around the shared action; ``rho1p`` and ``rho2p`` are the
    switching thresholds pushed a third of the way towards each other.
    """

    children: tuple
    shared: int
    rho_star: tuple[Fraction, Fraction]
    rho1p: float
    rho2p: float
    g: int = 1
    rho_hat: float = 0.0
    t: int = 1

    def reset(self) -> None:
        node = self
        while isinstance(node, Internal):
            node.g, node.rho_hat, node.t = 1, 0.0, 1
            node = node.children[0]
        node.reset()

    def update(self, p: float, h: Optional[int]) -> bool:
        t = self.t
        ind = 1.0 if h == 1 else 0.0
        self.rho_hat = (1.0 - 1.0 / t) * self.rho_hat + (1.0 / t) * (ind / p)
        switched = False
        if self.g == 2 and self.rho_hat < self.rho1p:
            self.children[0].reset()
            self.g = 1
            switched = True
        elif self.g == 1 and self.rho_hat > self.rho2p:
            self.children[1].reset()
            self.g = 2
            switched = True
        self.t = t + 1
        return switched


TreeNode = Union[Internal, Leaf]


def _build(actions, points, revealing, bounds, T, delta, rule) -> TreeNode:
    if len(actions) == 2:
        a, b = 0, 1
        if not revealing[0]:
            a, b = 1, 0
        full = revealing[a] and revealing[b]
        pa = tuple(float(x) for x in points[a])
        pb = tuple(float(x) for x in points[b])
        if full:
            loss = (pa, pb)
        else:
            loss = (
                (float(points[a][0] - points[b][0]), float(points[a][1] - points[b][1])),
                (0.0, 0.0),
            )
        beta, gamma, eta = leaf_parameters(T, delta, full)
        return Leaf((actions[a], actions[b]), full, loss, beta, gamma, eta, delta, rule)
    k = len(actions)
    s = (k + 1) // 2  # ceil(K/2), 1-based position of the shared action
    r1, r2 = bounds[s - 2], bounds[s - 1]
    r1p = (2 * r1 + r2) / 3
    r2p = (r1 + 2 * r2) / 3
    if not r2p > r1p:
        raise ValueError("switching band is empty; the game is degenerate")
    child_delta = delta / (4 * T)
    c1 = _build(actions[:s], points[:s], revealing[:s], bounds[: s - 1], T, child_delta, rule)
    c2 = _build(actions[s - 1 :], points[s - 1 :], revealing[s - 1 :], bounds[s - 1 :], T, child_delta, rule)
    return Internal((c1, c2), actions[s - 1], (r1, r2), float(r1p), float(r2p))


def iter_leaves(node: TreeNode):
    if isinstance(node, Leaf):
        yield node
    else:
        for c in node.children:
            yield from iter_leaves(c)


def build_tree(game: Game, T: int, delta: float, leaf_rule: str = "exp3p") -> TreeNode:
    """Build the AppleTree for an easy game.

    Raises ValueError if the game is not easy, if ``delta`` is outside
    (0, 1), or if some one-armed leaf could not keep its probability of
    playing the revealing action at ``1/sqrt(T)`` or above.
    """
    if leaf_rule not in LEAF_RULES:
        raise ValueError(f"unknown leaf rule {leaf_rule!r}")
    if T < 1:
        raise ValueError("horizon T must be at least 1")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    cls = classify(game)
    if cls.kind is not GameKind.EASY:
        raise ValueError(f"AppleTree needs an easy game, got {cls.kind.value}")
    ch = chain(game)
    if ch.K < 2:
        raise ValueError("AppleTree needs at least two non-dominated actions")
    root = _build(list(ch.actions), list(ch.points), list(ch.revealing), list(ch.boundaries), T, delta, leaf_rule)
    floor = 1.0 / math.sqrt(T)
    for leaf in iter_leaves(root):
        if leaf.full:
            continue
        if leaf.gamma > 1.0:
            raise ValueError(f"exploration rate {leaf.gamma:.3g} exceeds 1; T={T} is too small for delta={delta}")
        if leaf.gamma / 2.0 < floor:
            raise ValueError(
                f"leaf exploration {leaf.gamma / 2:.3g} is below 1/sqrt(T)={floor:.3g}; decrease delta"
            )
    return root


def play_at_leaf(leaf: Leaf, rng) -> tuple[float, int]:
    """Sample the leaf's action; returns (reveal probability, slot)."""
    return leaf.choose(rng.random())


def play(node: TreeNode, rng) -> tuple[float, int, tuple]:
    """Descend along the preferred children and sample at the leaf.

    Returns (reveal probability, game action, pending) where ``pending``
    is handed back to :func:`finish_play` once the feedback is known.
    """
    path = []
    while isinstance(node, Internal):
        path.append(node)
        node = node.children[node.g - 1]
    p, slot = play_at_leaf(node, rng)
    return p, node.actions[slot], (path, node, p, slot)


def finish_play(pending: tuple, h: Optional[int]) -> bool:
    """Propagate feedback up the path; True if the root switched subgames."""
    path, leaf, p, slot = pending
    if leaf.full or slot == 0:
        if h is None:
            raise ValueError("a revealing action was played but no outcome was observed")
    else:
        h = None
    leaf.update(p, slot, h)
    root_switched = False
    for depth in range(len(path) - 1, -1, -1):
        if path[depth].update(p, h) and depth == 0:
            root_switched = True
    return root_switched


def flatten_tree(root: TreeNode):
    """Array form of a tree for :func:`pmgames.kernels.appletree_run`, plus the node order."""
    nodes: list[TreeNode] = []

    def visit(n):
        nodes.append(n)
        if isinstance(n, Internal):
            for c in n.children:
                visit(c)

    visit(root)
    ids = {id(n): k for k, n in enumerate(nodes)}
    n = len(nodes)
    itree = np.zeros((n, K.N_ITREE), dtype=np.int64)
    ftree = np.zeros((n, K.N_FTREE), dtype=np.float64)
    istate = np.zeros((n, K.N_ISTATE), dtype=np.int64)
    fstate = np.zeros((n, K.N_FSTATE), dtype=np.float64)
    for k, node in enumerate(nodes):
        if isinstance(node, Leaf):
            itree[k, K.IS_LEAF] = 1
            itree[k, K.ACT1], itree[k, K.ACT2] = node.actions
            itree[k, K.FULL] = int(node.full)
            itree[k, K.RULE] = LEAF_RULES.index(node.rule)
            ftree[k, K.GHI], ftree[k, K.GSPAN] = node.gain_scale
            ftree[k, K.BETA], ftree[k, K.GAMMA], ftree[k, K.ETA] = node.beta, node.gamma, node.eta
            (ftree[k, K.L11], ftree[k, K.L12]), (ftree[k, K.L21], ftree[k, K.L22]) = node.loss
            fstate[k, K.LOGW1], fstate[k, K.LOGW2] = node.logw
        else:
            itree[k, K.CHILD1] = ids[id(node.children[0])]
            itree[k, K.CHILD2] = ids[id(node.children[1])]
            ftree[k, K.RHO1P], ftree[k, K.RHO2P] = node.rho1p, node.rho2p
            istate[k, K.G], istate[k, K.TLOC] = node.g, node.t
            fstate[k, K.RHO_HAT] = node.rho_hat
    return (itree, ftree, istate, fstate), nodes


def _load_state(nodes, istate, fstate) -> None:
    for k, node in enumerate(nodes):
        if isinstance(node, Leaf):
            node.logw[0], node.logw[1] = float(fstate[k, K.LOGW1]), float(fstate[k, K.LOGW2])
        else:
            node.g, node.t = int(istate[k, K.G]), int(istate[k, K.TLOC])
            node.rho_hat = float(fstate[k, K.RHO_HAT])


def _as_outcomes(outcomes) -> np.ndarray:
    return np.ascontiguousarray(outcomes, dtype=np.int64)


class Policy:
    """Base class; subclasses implement ``_choose``, ``_observe`` and ``run_kernel``."""

    name = "policy"

    def __init__(self, game: Game):
        self.game = game
        self.reset_count = 0
        self.reveal_prob = 1.0
        self._pending = False

    def choose(self, rng) -> int:
        if self._pending:
            raise RuntimeError("choose called twice without observe")
        action = self._choose(rng)
        self._pending = True
        return action

    def observe(self, outcome: Optional[int]) -> None:
        if not self._pending:
            raise RuntimeError("observe called without a pending choose")
        self._pending = False
        self._observe(outcome)

    def _choose(self, rng) -> int:
        raise NotImplementedError

    def _observe(self, outcome: Optional[int]) -> None:
        raise NotImplementedError

    def run_kernel(self, outcomes, uniforms) -> KernelResult:
        raise NotImplementedError


class AppleTree(Policy):
    name = "appletree"

    def __init__(self, game: Game, T: int, delta: Optional[float] = None, leaf_rule: str = "exp3p"):
        super().__init__(game)
        self.T = T
        self.delta = 1.0 / math.sqrt(T) if delta is None else delta
        self.leaf_rule = leaf_rule
        self.root = build_tree(game, T, self.delta, leaf_rule)
        self.floor = 1.0 / math.sqrt(T)
        self._play = None

    def _choose(self, rng) -> int:
        p, action, pending = play(self.root, rng)
        if p < self.floor:
            raise ValueError("reveal probability fell below 1/sqrt(T)")
        self.reveal_prob = p
        self._play = pending
        return action

    def _observe(self, outcome):
        if finish_play(self._play, outcome):
            self.reset_count += 1
        self._play = None

    def run_kernel(self, outcomes, uniforms) -> KernelResult:
        outcomes = _as_outcomes(outcomes)
        n = outcomes.shape[0]
        (itree, ftree, istate, fstate), nodes = flatten_tree(self.root)
        actions = np.empty(n, dtype=np.int64)
        reveal = np.empty(n, dtype=np.float64)
        root_rho = np.empty(n, dtype=np.float64)
        resets = K.appletree_run(
            itree, ftree, istate, fstate, outcomes, np.ascontiguousarray(uniforms, dtype=np.float64),
            self.floor, actions, reveal, root_rho,
        )
        _load_state(nodes, istate, fstate)
        self.reset_count += int(resets)
        if n:
            self.reveal_prob = float(reveal[-1])
        rho = None if isinstance(self.root, Leaf) else root_rho
        return KernelResult(actions, reveal, rho, int(resets))


class ForcedExploration(Policy):
    """Explore a fixed revealing action at rate ``min(1, c_e T^(-1/3))``; otherwise
    play the chain action that is optimal for the importance-weighted estimate
    of the outcome-2 frequency built from exploration rounds only."""

    name = "forced"

    def __init__(self, game: Game, T: int, explore_scale: float = 1.0):
        super().__init__(game)
        revealing = [i for i in range(game.n_actions) if game.is_revealing(i)]
        if not revealing:
            raise ValueError("forced exploration needs a revealing action")
        self.chain = chain(game)
        if self.chain.K < 2:
            raise ValueError("forced exploration needs at least two non-dominated actions")
        self.T = T
        self.gamma_e = min(1.0, explore_scale * T ** (-1.0 / 3.0))
        self.explore_action = revealing[0]
        self.bounds = np.array([float(b) for b in self.chain.boundaries])
        self.hits = 0
        self.steps = 0
        self._explored = False

    @property
    def rho_hat(self) -> float:
        return 0.0 if self.steps == 0 else self.hits / (self.gamma_e * self.steps)

    def exploit_action(self) -> int:
        rho = self.rho_hat
        pos = int(sum(1 for b in self.bounds if b < rho))
        return self.chain.actions[pos]

    def _choose(self, rng) -> int:
        u = rng.random()
        action = self.exploit_action()
        pos = self.chain.actions.index(action)
        self.reveal_prob = 1.0 if self.chain.revealing[pos] else self.gamma_e
        self._explored = u < self.gamma_e
        return self.explore_action if self._explored else action

    def _observe(self, outcome):
        if self._explored and outcome == 1:
            self.hits += 1
        self.steps += 1

    def run_kernel(self, outcomes, uniforms) -> KernelResult:
        outcomes = _as_outcomes(outcomes)
        n = outcomes.shape[0]
        actions = np.empty(n, dtype=np.int64)
        reveal = np.empty(n, dtype=np.float64)
        if self.steps:
            raise RuntimeError("run_kernel needs a fresh policy")
        self.hits = int(
            K.forced_run(
                outcomes, np.ascontiguousarray(uniforms, dtype=np.float64), self.gamma_e,
                self.explore_action, np.array(self.chain.actions, dtype=np.int64), self.bounds,
                np.array(self.chain.revealing, dtype=np.int64), actions, reveal,
            )
        )
        self.steps = n
        return KernelResult(actions, reveal, None, 0)


class ConstantPolicy(Policy):
    name = "constant"

    def __init__(self, game: Game, action: int):
        super().__init__(game)
        if not 0 <= action < game.n_actions:
            raise ValueError(f"action {action} out of range for a game with {game.n_actions} actions")
        self.action = action
        self.reveal_prob = 1.0 if game.is_revealing(action) else 0.0

    def _choose(self, rng) -> int:
        rng.random()
        return self.action

    def _observe(self, outcome):
        pass

    def run_kernel(self, outcomes, uniforms) -> KernelResult:
        n = len(outcomes)
        return KernelResult(
            np.full(n, self.action, dtype=np.int64), np.full(n, self.reveal_prob), None, 0
        )


class UniformPolicy(Policy):
    name = "uniform"

    def __init__(self, game: Game):
        super().__init__(game)
        self.reveal_prob = sum(game.revealing) / game.n_actions

    def _choose(self, rng) -> int:
        return min(int(rng.random() * self.game.n_actions), self.game.n_actions - 1)

    def _observe(self, outcome):
        pass

    def run_kernel(self, outcomes, uniforms) -> KernelResult:
        n = self.game.n_actions
        u = np.asarray(uniforms, dtype=np.float64)
        actions = np.minimum((u * n).astype(np.int64), n - 1)
        return KernelResult(actions, np.full(len(u), self.reveal_prob), None, 0)


class EWAPolicy(Policy):
    """Exponentially weighted average forecaster for full-information games."""

    name = "ewa"

    def __init__(self, game: Game, T: int):
        super().__init__(game)
        if not all(game.revealing):
            raise ValueError("EWA needs every action to be revealing")
        self.loss = game.loss_array()
        n = game.n_actions
        self.eta = math.sqrt(8.0 * math.log(n) / T) if n > 1 else 0.0
        self.logw = np.zeros(n)

    def _choose(self, rng) -> int:
        probs = np.exp(self.logw)
        target = rng.random() * probs.sum()
        acc = 0.0
        for i, w in enumerate(probs):
            acc += w
            if target < acc:
                return i
        return len(probs) - 1

    def _observe(self, outcome):
        self.logw -= self.eta * self.loss[:, outcome]
        self.logw -= self.logw.max()

    def run_kernel(self, outcomes, uniforms) -> KernelResult:
        outcomes = _as_outcomes(outcomes)
        actions = np.empty(outcomes.shape[0], dtype=np.int64)
        K.ewa_run(self.loss, self.eta, outcomes, np.ascontiguousarray(uniforms, dtype=np.float64), actions)
        return KernelResult(actions, np.ones(outcomes.shape[0]), None, 0)


POLICY_NAMES = ("appletree", "forced", "constant:<i>", "uniform", "ewa")


def make_policy(
    spec: str,
    game: Game,
    T: int,
    delta: Optional[float] = None,
    explore_scale: float = 1.0,
) -> Policy:
    """Instantiate a policy by name.

    ``constant:i`` takes a 1-based action index; ``appletree:penalized``
    selects the alternative one-armed leaf rule.
    """
    name, _, arg = spec.partition(":")
    name = name.strip().lower()
    if name == "appletree":
        return AppleTree(game, T, delta, arg.strip() or "exp3p")
    if name == "forced":
        return ForcedExploration(game, T, explore_scale)
    if name == "uniform":
        return UniformPolicy(game)
    if name == "ewa":
        return EWAPolicy(game, T)
    if name == "constant":
        try:
            action = int(arg) - 1
        except ValueError:
            raise ValueError(f"constant policy needs a 1-based action index, got {arg!r}") from None
        return ConstantPolicy(game, action)
    raise ValueError(f"unknown policy {spec!r}; choose from {', '.join(POLICY_NAMES)}")
