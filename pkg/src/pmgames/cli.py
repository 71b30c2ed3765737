"""Command-line front end: ``pm-games classify | run | sweep | check``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

from pmgames import bench
from pmgames.games import analyze_actions, chain, classify, load_game
from pmgames.simul import (
    batch,
    default_threads,
    parse_env_family,
    run,
    run_seeds,
    summarize,
    write_summary,
)


def parse_horizons(text: str) -> list[int]:
    """``1024,4096``, ``2^10..2^16`` (every power of two in between) or a mix of both."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = (p.strip() for p in part.split("..", 1))
            if not (lo.startswith("2^") and hi.startswith("2^")):
                raise ValueError(f"ranges must be written 2^a..2^b, got {part!r}")
            a, b = int(lo[2:]), int(hi[2:])
            if a > b:
                raise ValueError(f"empty range {part!r}")
            out.extend(2**k for k in range(a, b + 1))
        elif part.startswith("2^"):
            out.append(2 ** int(part[2:]))
        else:
            out.append(int(part))
    if not out or min(out) < 1:
        raise ValueError(f"invalid horizon list {text!r}")
    return out


def _delta(text: Optional[str]) -> Optional[float]:
    if text is None or text == "auto":
        return None
    return float(text)


def cmd_classify(args) -> int:
    game = load_game(args.game)
    cls = classify(game)
    info = analyze_actions(game)
    if args.json:
        ch = chain(game) if game.n_actions else None
        doc = {
            "class": cls.kind.value,
            "certificate": [i + 1 for i in cls.certificate] if cls.certificate else None,
            "rate": cls.rate,
            "chain": [i + 1 for i in ch.actions],
            "boundaries": [str(b) for b in ch.boundaries],
            "revealing": [i + 1 for i in info.indices("revealing")],
            "dominated": [i + 1 for i in info.indices("dominated")],
            "degenerate": [i + 1 for i in info.indices("degenerate")],
        }
        print(json.dumps(doc, indent=2))
        return 0
    print(cls.describe())
    ch = chain(game)
    print("chain: " + " < ".join(game.label(i) for i in ch.actions))
    if ch.boundaries:
        print("boundaries: " + ", ".join(str(b) for b in ch.boundaries))
    print(f"{'action':<10} {'loss':<14} {'revealing':<10} {'dominated':<10} degenerate")
    for i in range(game.n_actions):
        loss = "(" + ", ".join(str(x) for x in game.loss[i]) + ")"
        print(
            f"{game.label(i):<10} {loss:<14} {str(info.revealing[i]).lower():<10} "
            f"{str(info.dominated[i]).lower():<10} {str(info.degenerate[i]).lower()}"
        )
    return 0


def cmd_run(args) -> int:
    game = load_game(args.game)
    env_seed, pol_seed = run_seeds(args.seed, args.T, 0)
    envs = parse_env_family(args.env, game, env_seed)
    if len(envs) != 1:
        raise ValueError("run needs a single environment; pick k=1 or k=2")
    rec = run(args.policy, envs[0], game, args.T, pol_seed, _delta(args.delta), args.explore_scale)
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        path = os.path.join(args.out_dir, "run.csv")
        rec.to_csv(path)
        print(f"final regret {rec.final_regret_exact} ({rec.final_regret:.6g}); wrote {path}", file=sys.stderr)
    else:
        rec.to_csv(sys.stdout)
    return 0


PLOT_TEMPLATE = """\
set datafile separator ','
set logscale xy
set key top left
set xlabel 'T'
set ylabel 'median regret'
set title '{title}'
{fit_line}
plot 'summary.csv' using 1:4:5:6 skip 1 with yerrorbars title 'median (quartiles)'{fit_plot}
"""


def write_plot(path: str, title: str, fit: Optional[bench.ExponentFit]) -> None:
    if fit is None:
        fit_line, fit_plot = "", ""
    else:
        fit_line = f"f(x) = exp({fit.intercept!r}) * x**{fit.alpha_hat!r}"
        fit_plot = f", f(x) title sprintf('fit: T^%.3f', {fit.alpha_hat!r}) with lines"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(PLOT_TEMPLATE.format(title=title.replace("'", ""), fit_line=fit_line, fit_plot=fit_plot))


def cmd_sweep(args) -> int:
    game = load_game(args.game)
    Ts = parse_horizons(args.Ts)
    envs = parse_env_family(args.env, game)
    result = batch(
        args.policy, envs, game, Ts, args.seeds, args.seed, _delta(args.delta), args.explore_scale,
        threads=args.threads, keep_records=args.save_runs > 0,
    )
    rows = summarize(result)
    out = args.out_dir
    runs_dir = os.path.join(out, "runs")
    os.makedirs(runs_dir, exist_ok=True)
    write_summary(rows, os.path.join(out, "summary.csv"))
    with open(os.path.join(runs_dir, "final_regrets.csv"), "w", encoding="utf-8") as fh:
        fh.write("env,T,rep,final_regret,resets\n")
        for (m, T, r), v in sorted(result.finals.items()):
            fh.write(f"{envs[m].label},{T},{r},{v!r},{result.resets[(m, T, r)]}\n")
    for (m, T, r), rec in sorted(result.records.items()):
        if r < args.save_runs:
            rec.to_csv(os.path.join(runs_dir, f"m{m + 1}_T{T}_rep{r}.csv"))
    try:
        fit = bench.fit_exponent([row["T"] for row in rows], [row["median"] for row in rows])
        fit_doc = fit.to_dict()
    except ValueError as exc:
        fit, fit_doc = None, {"error": str(exc)}
    with open(os.path.join(out, "fit.json"), "w", encoding="utf-8") as fh:
        json.dump(fit_doc, fh, indent=2)
        fh.write("\n")
    write_plot(os.path.join(out, "plot.gp"), f"{args.policy} on {args.env}", fit)
    for row in rows:
        print(f"T={row['T']:<8d} median={row['median']:<12.6g} q1={row['q1']:<12.6g} q3={row['q3']:.6g}")
    if fit is None:
        print(f"fit: {fit_doc['error']}")
    else:
        print(f"fit: alpha_hat={fit.alpha_hat:.4f} r2={fit.r_squared:.4f}")
    return 0


CHECKS = ("kl", "khinchine", "leaf", "concentration", "resets")


def run_checks(name: str, seed: int, reps: int) -> list[bench.TheoryCheckReport]:
    reports = []
    if name in ("kl", "all"):
        reports.append(bench.kl_check())
    if name in ("khinchine", "all"):
        for label, (values, probs) in bench.KHINCHINE_DISTRIBUTIONS.items():
            reports.append(bench.khinchine_check(values, probs, reps=reps, seed=seed, name=f"khinchine_check[{label}]"))
    if name in ("leaf", "all"):
        reports.append(bench.leaf_parameter_check())
    if name in ("concentration", "all"):
        reports.append(bench.concentration_check(master_seed=seed))
    if name in ("resets", "all"):
        reports.append(bench.reset_growth_check(master_seed=seed))
    return reports


def cmd_check(args) -> int:
    reports = run_checks(args.name, args.seed, args.reps)
    for rep in reports:
        print(rep.line())
    return 0 if all(r.passed for r in reports) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pm-games", description="Two-outcome partial-monitoring games.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="classify a game and list its action properties")
    p.add_argument("game", help="game JSON file or fixture name")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_classify)

    def add_play_args(p):
        p.add_argument("game", help="game JSON file or fixture name")
        p.add_argument("--policy", default="appletree", help="appletree, forced, constant:i, uniform or ewa")
        p.add_argument("--env", default="iid:0.5", help="environment spec, e.g. iid:0.3 or epspair:hard:k=1")
        p.add_argument("--delta", default=None, help="AppleTree confidence (default 1/sqrt(T))")
        p.add_argument("--explore-scale", type=float, default=1.0, help="forced exploration constant")

    p = sub.add_parser("run", help="play one run and write its trajectory CSV")
    add_play_args(p)
    p.add_argument("--T", type=int, required=True, help="horizon")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=None, help="write run.csv here instead of stdout")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a T grid over many seeds and fit the regret exponent")
    add_play_args(p)
    p.add_argument("--Ts", default="2^10..2^16", help="horizons, e.g. 2^10..2^16 or 1000,4000")
    p.add_argument("--seeds", type=int, default=30, help="replicates per horizon")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--out-dir", default="sweep_out")
    p.add_argument("--threads", type=int, default=None, help=f"worker threads (default PM_GAMES_THREADS or {default_threads()})")
    p.add_argument("--save-runs", type=int, default=1, help="trajectory CSVs kept per horizon")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check", help="numerical theory checks")
    p.add_argument("name", choices=CHECKS + ("all",))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=100_000, help="Monte Carlo repetitions")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"pm-games {args.command}: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
