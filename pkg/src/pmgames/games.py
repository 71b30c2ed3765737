"""Two-outcome partial-monitoring games in exact rational arithmetic.

A game is a loss matrix with one row per action and two outcome columns,
plus a feedback matrix of opaque symbols. Each loss row is a point in the
plane; the actions worth playing sit on the lower-left boundary of the
convex hull of those points. Everything in this module uses
:class:`fractions.Fraction`, so ties and collinear points are decided
exactly.

Action indices are 0-based throughout the API. Reports meant for humans
(:meth:`GameClass.describe`) print 1-based indices.
"""

from __future__ import annotations

import enum
import json
import os
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from typing import Any, Hashable, Iterable, Mapping, Optional, Sequence

import numpy as np

__all__ = [
    "ActionAnalysis",
    "Chain",
    "Game",
    "GameClass",
    "GameFormatError",
    "GameKind",
    "analyze_actions",
    "cell",
    "chain",
    "classify",
    "fixture_names",
    "load_fixture",
    "load_game",
    "purify",
    "remove_degenerate_nonrevealing",
    "separation_holds",
]

Point = tuple[Fraction, Fraction]


class GameFormatError(ValueError):
    """A game document does not match the expected schema."""


def _as_fraction(value: Any, where: str) -> Fraction:
    # floats are refused: 0.1 has no exact binary value
    if isinstance(value, bool):
        raise GameFormatError(f"{where}: booleans are not losses")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise GameFormatError(f"{where}: cannot parse {value!r} as a rational") from None
    raise GameFormatError(
        f"{where}: expected an integer or a rational string like '3/4', got {type(value).__name__}"
    )


def _check_symbol(value: Any, where: str) -> Hashable:
    if isinstance(value, bool) or not isinstance(value, (str, int)):
        raise GameFormatError(f"{where}: feedback symbols must be strings or integers")
    return value


@dataclass(frozen=True)
class Game:
    """Loss matrix ``loss[i][j]`` and feedback matrix ``feedback[i][j]``.

    ``j = 0`` is the first outcome and ``j = 1`` the second. Use
    :meth:`from_rows` to build one from plain Python values.
    """

    loss: tuple[Point, ...]
    feedback: tuple[tuple[Hashable, Hashable], ...]
    names: Optional[tuple[str, ...]] = None

    def __post_init__(self) -> None:
        if len(self.loss) == 0:
            raise GameFormatError("a game needs at least one action")
        if len(self.feedback) != len(self.loss):
            raise GameFormatError(
                f"feedback has {len(self.feedback)} rows but loss has {len(self.loss)}"
            )
        for i, (row, fb) in enumerate(zip(self.loss, self.feedback)):
            if len(row) != 2 or len(fb) != 2:
                raise GameFormatError(f"action {i + 1}: rows must have exactly 2 entries")
            if not all(isinstance(x, Fraction) for x in row):
                raise GameFormatError(f"action {i + 1}: losses must be Fractions; use Game.from_rows")
        if self.names is not None and len(self.names) != len(self.loss):
            raise GameFormatError("names must have one entry per action")

    @classmethod
    def from_rows(
        cls,
        loss: Sequence[Sequence[Any]],
        feedback: Sequence[Sequence[Any]],
        names: Optional[Sequence[str]] = None,
    ) -> "Game":
        rows = [list(r) for r in loss]
        fbs = [list(r) for r in feedback]
        if not rows:
            raise GameFormatError("a game needs at least one action")
        widths = {len(r) for r in rows} | {len(r) for r in fbs}
        if len(widths) > 1:
            raise GameFormatError("ragged rows: every loss and feedback row needs the same length")
        (m,) = widths
        if m != 2:
            raise GameFormatError(f"only two-outcome games are supported, got {m} outcome columns")
        if len(fbs) != len(rows):
            raise GameFormatError(f"feedback has {len(fbs)} rows but loss has {len(rows)}")
        lrows = tuple(
            tuple(_as_fraction(x, f"loss[{i}][{j}]") for j, x in enumerate(r))
            for i, r in enumerate(rows)
        )
        frows = tuple(
            tuple(_check_symbol(x, f"feedback[{i}][{j}]") for j, x in enumerate(r))
            for i, r in enumerate(fbs)
        )
        return cls(lrows, frows, None if names is None else tuple(str(n) for n in names))

    @property
    def n_actions(self) -> int:
        return len(self.loss)

    def is_revealing(self, i: int) -> bool:
        h1, h2 = self.feedback[i]
        return h1 != h2

    @property
    def revealing(self) -> tuple[bool, ...]:
        return tuple(self.is_revealing(i) for i in range(self.n_actions))

    def label(self, i: int) -> str:
        if self.names is not None:
            return self.names[i]
        return str(i + 1)

    def observe(self, action: int, symbol: Hashable) -> Optional[int]:
        """Map a raw feedback symbol to the outcome it reveals, or None."""
        h1, h2 = self.feedback[action]
        if h1 == h2:
            return None
        if symbol == h1:
            return 0
        if symbol == h2:
            return 1
        raise ValueError(f"symbol {symbol!r} is not a feedback symbol of action {action + 1}")

    def loss_array(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.loss], dtype=np.float64)

    def subgame(self, actions: Iterable[int]) -> "Game":
        idx = list(actions)
        names = None if self.names is None else tuple(self.names[i] for i in idx)
        return Game(
            tuple(self.loss[i] for i in idx), tuple(self.feedback[i] for i in idx), names
        )

    def shift_columns(self, c1: Any, c2: Any) -> "Game":
        """Subtract ``c1`` from the first loss column and ``c2`` from the second."""
        a, b = Fraction(c1), Fraction(c2)
        return Game(tuple((x - a, y - b) for x, y in self.loss), self.feedback, self.names)

    def to_document(self) -> dict:
        doc: dict = {
            "loss": [[_fraction_str(x) for x in row] for row in self.loss],
            "feedback": [list(fb) for fb in self.feedback],
        }
        if self.names is not None:
            doc["names"] = list(self.names)
        return doc


def _fraction_str(x: Fraction) -> Any:
    return int(x) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def parse_game(doc: Any) -> Game:
    if not isinstance(doc, Mapping):
        raise GameFormatError("a game document must be a JSON object")
    missing = [k for k in ("loss", "feedback") if k not in doc]
    if missing:
        raise GameFormatError(f"missing field(s): {', '.join(missing)}")
    loss, feedback = doc["loss"], doc["feedback"]
    for name, rows in (("loss", loss), ("feedback", feedback)):
        if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
            raise GameFormatError(f"{name} must be an array of arrays")
    names = doc.get("names")
    if names is not None and (not isinstance(names, list) or len(names) != len(loss)):
        raise GameFormatError("names must be an array with one entry per action")
    return Game.from_rows(loss, feedback, names)


def load_game(source: Any) -> Game:
    """Load a game from a mapping, a JSON string, a file path or a fixture name."""
    if isinstance(source, Mapping):
        return parse_game(source)
    if isinstance(source, (str, os.PathLike)):
        text = os.fspath(source)
        if text.lstrip().startswith("{"):
            try:
                return parse_game(json.loads(text))
            except json.JSONDecodeError as exc:
                raise GameFormatError(f"malformed JSON: {exc}") from None
        if os.path.exists(text):
            with open(text, encoding="utf-8") as fh:
                try:
                    doc = json.load(fh)
                except json.JSONDecodeError as exc:
                    raise GameFormatError(f"{text}: malformed JSON: {exc}") from None
            return parse_game(doc)
        if text in fixture_names():
            return load_fixture(text)
        raise GameFormatError(f"no such game file or fixture: {text}")
    if hasattr(source, "read"):
        try:
            return parse_game(json.load(source))
        except json.JSONDecodeError as exc:
            raise GameFormatError(f"malformed JSON: {exc}") from None
    raise GameFormatError(f"cannot load a game from {type(source).__name__}")


def fixture_names() -> list[str]:
    root = resources.files("pmgames") / "fixtures"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_fixture(name: str) -> Game:
    path = resources.files("pmgames") / "fixtures" / f"{name}.json"
    return parse_game(json.loads(path.read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# geometry


def _cross(o: Point, a: Point, b: Point) -> Fraction:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _lower_left_chain(points: Iterable[Point]) -> list[Point]:
    """Strict vertices of the lower-left hull boundary, by increasing first coordinate."""
    pts = sorted(set(points))
    hull: list[Point] = []
    for p in pts:
        # pop on cross <= 0 so collinear points never become vertices
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], p) <= 0:
            hull.pop()
        hull.append(p)
    # the lower hull runs left to right; keep it up to the lowest point
    ymin = min(p[1] for p in pts)
    out = []
    for p in hull:
        out.append(p)
        if p[1] == ymin:
            break
    return out


def _on_segment(q: Point, a: Point, b: Point) -> bool:
    if _cross(a, b, q) != 0:
        return False
    return min(a[0], b[0]) <= q[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= q[1] <= max(a[1], b[1])


def _tie(a: Point, b: Point) -> Fraction:
    # frequency of outcome 2 at which (1-r)a0 + r*a1 == (1-r)b0 + r*b1
    dx = b[0] - a[0]
    dy = b[1] - a[1]
    return dx / (dx - dy)


@dataclass(frozen=True)
class ActionAnalysis:
    revealing: tuple[bool, ...]
    dominated: tuple[bool, ...]
    degenerate: tuple[bool, ...]
    duplicate_of: tuple[Optional[int], ...]

    def indices(self, flag: str) -> list[int]:
        return [i for i, v in enumerate(getattr(self, flag)) if v]


def _representatives(game: Game) -> dict[Point, int]:
    """One action per distinct loss vector: the first revealing one, else the first."""
    rep: dict[Point, int] = {}
    for i, v in enumerate(game.loss):
        j = rep.get(v)
        if j is None or (not game.is_revealing(j) and game.is_revealing(i)):
            rep[v] = i
    return rep


def analyze_actions(game: Game) -> ActionAnalysis:
    """Revealing, dominated, degenerate and duplicate flags for every action."""
    vertices = _lower_left_chain(game.loss)
    vset = set(vertices)
    xmin = vertices[0][0]
    ymin = vertices[-1][1]
    edges = list(zip(vertices, vertices[1:]))
    dominated = []
    degenerate = []
    for v in game.loss:
        dom = v not in vset
        dominated.append(dom)
        deg = dom and (v[0] == xmin or v[1] == ymin or any(_on_segment(v, a, b) for a, b in edges))
        degenerate.append(deg)
    rep = _representatives(game)
    dup = tuple(None if rep[v] == i else rep[v] for i, v in enumerate(game.loss))
    return ActionAnalysis(game.revealing, tuple(dominated), tuple(degenerate), dup)


def cell(game: Game, i: int) -> Optional[tuple[Fraction, Fraction]]:
    """Closed interval of outcome-2 frequencies where action ``i`` is optimal.

    Returns None when the action is never optimal.
    """
    lo, hi = Fraction(0), Fraction(1)
    xi, yi = game.loss[i]
    for xj, yj in game.loss:
        # (1-r)xi + r*yi <= (1-r)xj + r*yj  <=>  a + b*r <= 0
        a = xi - xj
        b = (yi - yj) - (xi - xj)
        if b == 0:
            if a > 0:
                return None
        elif b > 0:
            hi = min(hi, -a / b)
        else:
            lo = max(lo, -a / b)
        if lo > hi:
            return None
    return lo, hi


def purify(game: Game) -> tuple[Game, tuple[Optional[int], ...]]:
    """Drop dominated actions, then duplicates (keeping a revealing copy).

    Returns the purified game and a mapping from each original action to
    the index of its surviving representative in the purified game, or
    None when the action was removed as dominated.
    """
    analysis = analyze_actions(game)
    keep = [
        i
        for i in range(game.n_actions)
        if not analysis.dominated[i] and analysis.duplicate_of[i] is None
    ]
    pos = {orig: k for k, orig in enumerate(keep)}
    mapping = []
    for i in range(game.n_actions):
        if analysis.dominated[i]:
            mapping.append(None)
        else:
            rep = analysis.duplicate_of[i]
            mapping.append(pos[i if rep is None else rep])
    return game.subgame(keep), tuple(mapping)


def remove_degenerate_nonrevealing(game: Game) -> tuple[Game, tuple[Optional[int], ...]]:
    """Remove degenerate non-revealing actions from a non-degenerate game.

    All other actions, dominated or not, are kept. Raises ValueError when
    the game has a degenerate revealing action.
    """
    analysis = analyze_actions(game)
    drop = set()
    for i in range(game.n_actions):
        if analysis.degenerate[i]:
            if analysis.revealing[i]:
                raise ValueError(f"action {i + 1} is degenerate and revealing")
            drop.add(i)
    keep = [i for i in range(game.n_actions) if i not in drop]
    pos = {orig: k for k, orig in enumerate(keep)}
    return game.subgame(keep), tuple(pos.get(i) for i in range(game.n_actions))


@dataclass(frozen=True)
class Chain:
    """Non-dominated actions ordered by their first-outcome loss.

    ``actions`` holds indices into the game the chain was computed from;
    duplicates are represented once. ``boundaries[k]`` is the outcome-2
    frequency at which ``actions[k]`` and ``actions[k + 1]`` tie.
    """

    actions: tuple[int, ...]
    boundaries: tuple[Fraction, ...]
    points: tuple[Point, ...]
    revealing: tuple[bool, ...]

    @property
    def K(self) -> int:
        return len(self.actions)

    def optimal_position(self, rho: float) -> int:
        """Chain position of the best action at frequency ``rho``; ties go low."""
        return sum(1 for b in self.boundaries if b < rho)


def chain(game: Game) -> Chain:
    analysis = analyze_actions(game)
    members = [
        i
        for i in range(game.n_actions)
        if not analysis.dominated[i] and analysis.duplicate_of[i] is None
    ]
    members.sort(key=lambda i: game.loss[i][0])
    pts = tuple(game.loss[i] for i in members)
    bounds = tuple(_tie(a, b) for a, b in zip(pts, pts[1:]))
    reveal = tuple(game.is_revealing(i) for i in members)
    return Chain(tuple(members), bounds, pts, reveal)


def _nonrevealing_pair(ch: Chain) -> Optional[tuple[int, int]]:
    for k in range(ch.K - 1):
        if not ch.revealing[k] and not ch.revealing[k + 1]:
            return ch.actions[k], ch.actions[k + 1]
    return None


def separation_holds(game: Game) -> bool:
    return _nonrevealing_pair(chain(game)) is None


class GameKind(enum.Enum):
    TRIVIAL = "Trivial"
    EASY = "Easy"
    HARD = "Hard"
    HOPELESS = "Hopeless"
    DEGENERATE = "Degenerate"


_RATES = {
    GameKind.TRIVIAL: "minimax regret 0",
    GameKind.EASY: "minimax regret Θ̃(√T)",
    GameKind.HARD: "minimax regret Θ(T^{2/3})",
    GameKind.HOPELESS: "minimax regret Θ(T)",
    GameKind.DEGENERATE: "minimax regret between Ω(√T) and O(T^{2/3}); exact rate unknown",
}


@dataclass(frozen=True)
class GameClass:
    kind: GameKind
    certificate: tuple[int, ...] = ()

    @property
    def rate(self) -> str:
        return _RATES[self.kind]

    def describe(self) -> str:
        one = [i + 1 for i in self.certificate]
        if self.kind is GameKind.TRIVIAL:
            cert = f"universally optimal action {one[0]}"
        elif self.kind is GameKind.HARD:
            cert = f"consecutive non-revealing pair ({one[0]},{one[1]})"
        elif self.kind is GameKind.DEGENERATE:
            cert = f"degenerate revealing action {one[0]}"
        elif self.kind is GameKind.EASY:
            cert = "separation condition holds"
        else:
            cert = "no revealing action"
        return f"{self.kind.value}; certificate: {cert}; {self.rate}"

    def validate(self, game: Game) -> bool:
        """Check the certificate against ``game``."""
        ch = chain(game)
        analysis = analyze_actions(game)
        any_revealing = any(analysis.revealing)
        if self.kind is GameKind.TRIVIAL:
            (i,) = self.certificate
            return all(
                game.loss[i][0] <= x and game.loss[i][1] <= y for x, y in game.loss
            )
        if ch.K < 2:
            return False
        if self.kind is GameKind.HOPELESS:
            return not any_revealing
        if self.kind is GameKind.DEGENERATE:
            (i,) = self.certificate
            return analysis.revealing[i] and analysis.degenerate[i]
        if any(r and d for r, d in zip(analysis.revealing, analysis.degenerate)):
            return False
        if self.kind is GameKind.HARD:
            a, b = self.certificate
            pos = {act: k for k, act in enumerate(ch.actions)}
            return (
                a in pos
                and b in pos
                and pos[b] == pos[a] + 1
                and not game.is_revealing(a)
                and not game.is_revealing(b)
                and any_revealing
            )
        return any_revealing and _nonrevealing_pair(ch) is None


def classify(game: Game) -> GameClass:
    """Place a game in one of the four regret classes, or flag it degenerate.

    Precedence: a single non-dominated action means Trivial even when some
    revealing action is degenerate; then no revealing action means
    Hopeless; then a degenerate revealing action means Degenerate; then
    the separation condition splits Easy from Hard.
    """
    ch = chain(game)
    if ch.K == 1:
        return GameClass(GameKind.TRIVIAL, (ch.actions[0],))
    analysis = analyze_actions(game)
    if not any(analysis.revealing):
        return GameClass(GameKind.HOPELESS)
    for i in range(game.n_actions):
        if analysis.revealing[i] and analysis.degenerate[i]:
            return GameClass(GameKind.DEGENERATE, (i,))
    pair = _nonrevealing_pair(ch)
    if pair is None:
        return GameClass(GameKind.EASY)
    return GameClass(GameKind.HARD, pair)
