import io
import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_class, brute_force_flags
from strategies import games
from pmgames.games import (
    Game,
    GameFormatError,
    GameKind,
    analyze_actions,
    cell,
    chain,
    classify,
    fixture_names,
    load_fixture,
    load_game,
    parse_game,
    purify,
    remove_degenerate_nonrevealing,
    separation_holds,
)

F = Fraction

EXPECTED = {
    "one_armed_bandit": GameKind.EASY,
    "apple_tasting": GameKind.EASY,
    "label_efficient": GameKind.HARD,
    "hopeless": GameKind.HOPELESS,
    "trivial": GameKind.TRIVIAL,
    "degenerate": GameKind.DEGENERATE,
    "three_action": GameKind.EASY,
}


@pytest.mark.parametrize("name,kind", sorted(EXPECTED.items()))
def test_fixture_classes(name, kind):
    game = load_fixture(name)
    cls = classify(game)
    assert cls.kind is kind
    assert cls.validate(game)


def test_all_fixtures_listed():
    assert set(fixture_names()) == set(EXPECTED)


def test_certificates_and_descriptions():
    hard = classify(load_fixture("label_efficient"))
    assert hard.certificate == (1, 2)
    assert hard.describe().startswith("Hard; certificate: consecutive non-revealing pair (2,3)")
    assert "T^{2/3}" in hard.rate
    triv = classify(load_fixture("trivial"))
    assert triv.certificate == (1,)
    assert "universally optimal action 2" in triv.describe()
    deg = classify(load_fixture("degenerate"))
    assert deg.certificate == (1,)
    assert "exact rate unknown" in deg.describe()


def test_revealing_follows_feedback():
    game = load_fixture("apple_tasting")
    assert game.revealing == (False, True)
    assert game.observe(1, "b") == 0
    assert game.observe(1, "c") == 1
    assert game.observe(0, "a") is None
    with pytest.raises(ValueError):
        game.observe(1, "zzz")


def test_one_armed_chain():
    ch = chain(load_fixture("one_armed_bandit"))
    # ordered by first-outcome loss: pull (-1) before stay (0)
    assert ch.actions == (1, 0)
    assert ch.boundaries == (F(1, 2),)


def test_label_efficient_chain_and_dominated_request():
    game = load_fixture("label_efficient")
    info = analyze_actions(game)
    assert info.dominated == (True, False, False)
    assert info.degenerate == (False, False, False)
    assert chain(game).actions == (1, 2)
    assert not separation_holds(game)


def test_degenerate_example():
    game = load_fixture("degenerate")
    info = analyze_actions(game)
    # (1,1) sits on the segment between (2,0) and (0,2)
    assert info.dominated == (False, True, False)
    assert info.degenerate == (False, True, False)
    assert chain(game).boundaries == (F(1, 2),)


def test_trivial_example_flags():
    info = analyze_actions(load_fixture("trivial"))
    assert info.dominated == (True, False, True)
    # (1,1) ties action 2 at the pure first outcome
    assert info.degenerate == (False, False, True)


def test_three_action_boundaries():
    ch = chain(load_fixture("three_action"))
    assert ch.actions == (0, 1, 2)
    assert ch.boundaries == (F(1, 4), F(3, 4))
    assert ch.revealing == (False, True, False)
    assert ch.optimal_position(0.1) == 0
    assert ch.optimal_position(0.5) == 1
    assert ch.optimal_position(0.9) == 2


def test_cells():
    game = load_fixture("three_action")
    assert cell(game, 0) == (F(0), F(1, 4))
    assert cell(game, 1) == (F(1, 4), F(3, 4))
    assert cell(game, 2) == (F(3, 4), F(1))
    assert cell(load_fixture("label_efficient"), 0) is None


def test_purify_maps_duplicates_to_revealing_copy():
    game = Game.from_rows([[0, 1], [0, 1], [1, 0], [2, 2]], [["a", "a"], ["b", "c"], ["d", "d"], ["e", "f"]])
    pure, mapping = purify(game)
    assert pure.loss == ((F(0), F(1)), (F(1), F(0)))
    assert pure.revealing == (True, False)
    assert mapping == (0, 0, 1, None)


def test_remove_degenerate_nonrevealing():
    game = Game.from_rows([[2, 0], [1, 1], [0, 2]], [["a", "a"], ["b", "b"], ["c", "d"]])
    reduced, mapping = remove_degenerate_nonrevealing(game)
    assert reduced.n_actions == 2
    assert mapping == (0, None, 1)
    with pytest.raises(ValueError):
        remove_degenerate_nonrevealing(load_fixture("degenerate"))


@pytest.mark.parametrize(
    "doc,msg",
    [
        ({"loss": [[0, 1], [1]], "feedback": [["a", "a"], ["b", "c"]]}, "ragged"),
        ({"loss": [[0, 1, 2]], "feedback": [["a", "a", "a"]]}, "two-outcome"),
        ({"loss": [], "feedback": []}, "at least one"),
        ({"loss": [[0.5, 1]], "feedback": [["a", "b"]]}, "rational"),
        ({"loss": [["x", 1]], "feedback": [["a", "b"]]}, "cannot parse"),
        ({"loss": [[0, 1]]}, "missing"),
        ({"loss": [[0, 1]], "feedback": [["a", "b"]], "names": ["p", "q"]}, "names"),
    ],
)
def test_malformed_documents(doc, msg):
    with pytest.raises(GameFormatError, match=msg):
        parse_game(doc)


def test_load_game_sources(tmp_path):
    doc = load_fixture("apple_tasting").to_document()
    path = tmp_path / "g.json"
    path.write_text(json.dumps(doc))
    for source in (doc, json.dumps(doc), str(path), path, io.StringIO(json.dumps(doc)), "apple_tasting"):
        assert load_game(source) == load_fixture("apple_tasting")
    with pytest.raises(GameFormatError):
        load_game(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(GameFormatError, match="malformed"):
        load_game(bad)


def test_rational_strings_round_trip():
    game = load_fixture("three_action")
    assert game.loss[1] == (F(1, 4), F(1, 4))
    assert parse_game(game.to_document()) == game


@settings(max_examples=300, deadline=None)
@given(games())
def test_hull_flags_match_oracle(game):
    info = analyze_actions(game)
    dominated, degenerate = brute_force_flags(game)
    assert info.dominated == dominated
    assert info.degenerate == degenerate
    assert classify(game).kind.value == brute_force_class(game)


@settings(max_examples=200, deadline=None)
@given(games(), st.randoms(use_true_random=False))
def test_class_invariant_under_permutation(game, rnd):
    perm = list(range(game.n_actions))
    rnd.shuffle(perm)
    assert classify(game.subgame(perm)).kind is classify(game).kind


@settings(max_examples=200, deadline=None)
@given(games(), st.data())
def test_class_invariant_under_duplication(game, data):
    i = data.draw(st.integers(0, game.n_actions - 1))
    bigger = game.subgame(list(range(game.n_actions)) + [i])
    assert classify(bigger).kind is classify(game).kind


@settings(max_examples=200, deadline=None)
@given(games(), st.fractions(-3, 3, max_denominator=8), st.fractions(-3, 3, max_denominator=8))
def test_class_invariant_under_column_shift(game, c1, c2):
    shifted = game.shift_columns(c1, c2)
    assert classify(shifted).kind is classify(game).kind
    assert analyze_actions(shifted).dominated == analyze_actions(game).dominated


@settings(max_examples=200, deadline=None)
@given(games(min_actions=2))
def test_chain_boundaries_increase_inside_unit_interval(game):
    ch = chain(game)
    assert all(0 < b < 1 for b in ch.boundaries) or ch.K == 1
    assert list(ch.boundaries) == sorted(set(ch.boundaries))
    for k, a in enumerate(ch.actions):
        lo = ch.boundaries[k - 1] if k else F(0)
        hi = ch.boundaries[k] if k < len(ch.boundaries) else F(1)
        assert cell(game, a) == (lo, hi)


@settings(max_examples=200, deadline=None)
@given(games())
def test_certificate_validates(game):
    assert classify(game).validate(game)
