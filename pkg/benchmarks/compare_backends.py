"""Time the compiled simulation kernels against the plain-Python fallback.

Each backend runs in its own interpreter so that the fallback really
executes every nested kernel call in Python.

    python3 benchmarks/compare_backends.py --T 16384 --repeats 3
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

CASES = [
    ("appletree", "three_action", "iid:0.5"),
    ("appletree", "apple_tasting", "iid:0.3"),
    ("forced", "label_efficient", "epspair:hard:k=1:scale=0.3"),
    ("ewa", "trivial", "iid:0.5"),
]


def measure(T, repeats):
    from pmgames import _accel, load_fixture
    from pmgames.simul import parse_env, run

    out = {"jit": _accel.JIT_ENABLED, "cases": []}
    for policy, game_name, env_spec in CASES:
        game = load_fixture(game_name)
        env = parse_env(env_spec, game, seed=1)
        run(policy, env, game, min(T, 256), 0)  # compile outside the timed region
        times = []
        for r in range(repeats):
            t0 = time.perf_counter()
            rec = run(policy, env, game, T, r)
            times.append(time.perf_counter() - t0)
        out["cases"].append({"policy": policy, "game": game_name, "seconds": min(times),
                             "final_regret": rec.final_regret})
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--T", type=int, default=1 << 14)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.worker:
        json.dump(measure(args.T, args.repeats), sys.stdout)
        return
    results = {}
    for label, flag in (("numba", "0"), ("python", "1")):
        env = dict(os.environ, PM_GAMES_NO_JIT=flag)
        cmd = [sys.executable, __file__, "--worker", "--T", str(args.T), "--repeats", str(args.repeats)]
        results[label] = json.loads(subprocess.run(cmd, env=env, check=True, capture_output=True, text=True).stdout)
    print(f"T = {args.T}, best of {args.repeats}")
    print(f"{'policy':<10} {'game':<16} {'numba s':>10} {'python s':>10} {'speedup':>8}  same")
    for fast, slow in zip(results["numba"]["cases"], results["python"]["cases"]):
        same = np.isclose(fast["final_regret"], slow["final_regret"])
        print(f"{fast['policy']:<10} {fast['game']:<16} {fast['seconds']:>10.4f} {slow['seconds']:>10.4f} "
              f"{slow['seconds'] / fast['seconds']:>8.1f}  {same}")


if __name__ == "__main__":
    main()
