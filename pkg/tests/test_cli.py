import json

import pytest

from pmgames.cli import main, parse_horizons


def test_parse_horizons():
    assert parse_horizons("2^10..2^12") == [1024, 2048, 4096]
    assert parse_horizons("100, 2^3") == [100, 8]
    for bad in ("", "0", "2^5..2^3", "10..20"):
        with pytest.raises(ValueError):
            parse_horizons(bad)


@pytest.mark.parametrize(
    "name,first",
    [
        ("one_armed_bandit", "Easy"),
        ("apple_tasting", "Easy"),
        ("label_efficient", "Hard"),
        ("hopeless", "Hopeless"),
        ("trivial", "Trivial"),
        ("degenerate", "Degenerate"),
    ],
)
def test_classify_fixtures(capsys, name, first):
    assert main(["classify", name]) == 0
    assert capsys.readouterr().out.startswith(first + ";")


def test_classify_json(capsys):
    assert main(["classify", "label_efficient", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["class"] == "Hard" and doc["certificate"] == [2, 3] and doc["dominated"] == [1]


def test_run_to_stdout(capsys):
    assert main(["run", "apple_tasting", "--T", "50", "--env", "iid:0.5", "--seed", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "t,action,outcome,loss,cum_regret" and len(lines) == 51


def test_run_to_directory(tmp_path, capsys):
    out = tmp_path / "r"
    assert main(["run", "hopeless", "--policy", "uniform", "--T", "20", "--out-dir", str(out)]) == 0
    assert (out / "run.csv").read_text().count("\n") == 21


def test_sweep_outputs(tmp_path, capsys):
    out = tmp_path / "s"
    code = main([
        "sweep", "label_efficient", "--policy", "forced", "--env", "epspair:hard:k=worst:scale=0.3",
        "--Ts", "2^9..2^12", "--seeds", "4", "--seed", "5", "--out-dir", str(out), "--threads", "2",
    ])
    assert code == 0
    assert (out / "summary.csv").read_text().startswith("T,env,n,median")
    fit = json.loads((out / "fit.json").read_text())
    assert "alpha_hat" in fit or "error" in fit
    assert "set logscale xy" in (out / "plot.gp").read_text()
    runs = sorted(p.name for p in (out / "runs").iterdir())
    assert "final_regrets.csv" in runs and "m1_T512_rep0.csv" in runs


def test_sweep_is_byte_reproducible(tmp_path, capsys):
    args = ["sweep", "three_action", "--env", "iid:0.5", "--Ts", "2^9..2^11", "--seeds", "3", "--seed", "42"]
    main(args + ["--out-dir", str(tmp_path / "a"), "--threads", "1"])
    main(args + ["--out-dir", str(tmp_path / "b"), "--threads", "3"])
    assert (tmp_path / "a" / "summary.csv").read_bytes() == (tmp_path / "b" / "summary.csv").read_bytes()


def test_check_command(capsys):
    assert main(["check", "kl"]) == 0
    assert capsys.readouterr().out.startswith("kl_check: PASS")
    assert main(["check", "leaf"]) == 0


@pytest.mark.parametrize(
    "argv,needle",
    [
        (["classify", "no_such_game"], "no such game"),
        (["run", "hopeless", "--T", "10"], "easy game"),
        (["run", "apple_tasting", "--T", "10", "--env", "bogus:1"], "unknown environment"),
        (["run", "label_efficient", "--T", "10", "--env", "epspair:hard:k=worst"], "single environment"),
        (["sweep", "apple_tasting", "--Ts", "2^5..2^3"], "empty range"),
    ],
)
def test_errors_exit_nonzero_with_one_line(capsys, argv, needle):
    assert main(argv) == 2
    err = capsys.readouterr().err
    assert needle in err and err.count("\n") == 1
