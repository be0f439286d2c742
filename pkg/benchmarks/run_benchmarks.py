"""Compare the compiled and interpreted kernel backends.

Each backend runs in its own subprocess because the choice is fixed at
import time by RODFLUID_NUMBA.  Workloads are warmed up once (compilation
is excluded from the timing) and sized so the compiled path runs for
around a second.

Usage: python3 benchmarks/run_benchmarks.py [--scale X]
"""

import argparse
import json
import os
import subprocess
import sys
import time


def child(scale: float) -> None:
    import numpy as np

    from rodfluid.backend import backend_name
    from rodfluid.kinetics import trial_statistics
    from rodfluid.coupling import tagged_ensemble
    from rodfluid.limit_walk import simulate_rw
    from rodfluid.model import LatticeGeometry, Params
    from rodfluid.rng import RngStream

    results = {"backend": backend_name()}

    par = Params(p=0.5, q=1.0, a=1.0, b=1.0, gamma1=10.0, gamma2=1.0,
                 kappa=1.0, N=2)
    geom = LatticeGeometry(width=16, vmin=-8, vmax=8)
    trial_statistics(par, geom, 1, 4, 1.0)  # warm up
    reps = max(int(400 * scale), 1)
    t0 = time.perf_counter()
    counters = trial_statistics(par, geom, 2, reps, 1.0)
    el = time.perf_counter() - t0
    events = sum(counters[k] for k in
                 ("hswap", "vup", "vdown", "rod_up_trials",
                  "rod_down_trials"))
    results["lattice"] = {"seconds": el, "events": events,
                          "events_per_s": events / el}

    ne = max(int(500_000 * scale), 1000)
    rw_par = Params(p=0.5, q=1.0, a=1.0, b=2.0, gamma1=1.0, gamma2=1.0,
                    kappa=1.0, N=10)
    heights = np.arange(-10, 30)
    simulate_rw(rw_par, heights, RngStream(3, 0), 1.0, 0)  # warm up
    t0 = time.perf_counter()
    run = simulate_rw(rw_par, heights, RngStream(3, 1), float("inf"), 0,
                      max_events=ne)
    el = time.perf_counter() - t0
    results["walk"] = {"seconds": el, "events": run.n_events,
                       "events_per_s": run.n_events / el}

    cpar = Params(p=0.5, q=1.0, a=0.0, b=0.0, gamma1=16.0, gamma2=1.0,
                  kappa=0.5, N=2)
    cgeom = LatticeGeometry(width=32, vmin=-4, vmax=4)
    tagged_ensemble(cpar, cgeom, 5, 2, 0.5, [0.5], 1, 10)  # warm up
    creps = max(int(100 * scale), 1)
    t0 = time.perf_counter()
    tagged_ensemble(cpar, cgeom, 6, creps, 1.0, [1.0], 1, 10)
    el = time.perf_counter() - t0
    results["coupled"] = {"seconds": el, "replicas": creps,
                          "replicas_per_s": creps / el}

    print(json.dumps(results))


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--scale", type=float, default=1.0,
                    help="workload multiplier")
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.child:
        child(args.scale)
        return 0

    rows = []
    for flag, label in (("1", "numba"), ("0", "numpy")):
        env = dict(os.environ, RODFLUID_NUMBA=flag)
        proc = subprocess.run(
            [sys.executable, os.path.abspath(__file__), "--child",
             "--scale", str(args.scale)],
            env=env, capture_output=True, text=True)
        if proc.returncode != 0:
            sys.stderr.write(proc.stderr)
            return 1
        rows.append(json.loads(proc.stdout.strip().splitlines()[-1]))

    print(f"{'case':<10} {'metric':<14} " +
          " ".join(f"{r['backend']:>12}" for r in rows) + f" {'ratio':>8}")
    for case, metric in (("lattice", "events_per_s"),
                         ("walk", "events_per_s"),
                         ("coupled", "replicas_per_s")):
        vals = [r[case][metric] for r in rows]
        ratio = vals[0] / vals[1] if vals[1] > 0 else float("inf")
        print(f"{case:<10} {metric:<14} " +
              " ".join(f"{v:>12.3g}" for v in vals) + f" {ratio:>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
