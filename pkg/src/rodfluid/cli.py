"""Command-line entry point.

Verbs map one-to-one onto the library layers: `simulate` (full lattice),
`couple` (two-copy pair with a tagged discrepancy), `rw` (effective walk),
`burgers` (density profile integration), `oracle-check` (exact
small-system checks), and `experiment <name>`.  Every verb that writes
data also writes a manifest.json echoing the effective configuration, and
a fixed config + seed reproduces every output file byte for byte.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import harness, oracle
from .config import ConfigError, RunConfig, parse_config_file, \
    parse_config_text
from .coupling import CoupledState, coupled_step, return_probability_scan
from .hydro import integrate_density, ramp_profile, stability_dt
from .kinetics import simulate
from .limit_walk import simulate_rw, stationary_measure
from .model import density_profile, sample_initial
from .rng import RngStream


def _load_config(args) -> RunConfig:
    if args.config is not None:
        rc = parse_config_file(args.config)
    else:
        text = resources.files("rodfluid").joinpath("data/tiny.cfg") \
            .read_text(encoding="utf-8")
        rc = parse_config_text(text)
    if args.seed is not None:
        rc = RunConfig(rc.params, rc.geometry, int(args.seed), rc.extras)
    return rc


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _rle_row(row: np.ndarray) -> str:
    """Run-length encoding of one lattice row, tokens <count>x<value>."""
    parts = []
    run_val = int(row[0])
    run_len = 1
    for v in row[1:]:
        if int(v) == run_val:
            run_len += 1
        else:
            parts.append(f"{run_len}x{run_val}")
            run_val = int(v)
            run_len = 1
    parts.append(f"{run_len}x{run_val}")
    return ",".join(parts)


def _write_trajectory(out: Path, times, heights, jsonl: bool) -> str:
    if jsonl:
        harness.write_jsonl(out / "trajectory.jsonl", [
            {"time": float(t), "rod_y": int(y)}
            for t, y in zip(times, heights)])
        return "trajectory.jsonl"
    harness.write_csv(out / "trajectory.csv", ["time", "rod_y"], [
        {"time": float(t), "rod_y": int(y)}
        for t, y in zip(times, heights)])
    return "trajectory.csv"


def _cmd_simulate(args) -> int:
    rc = _load_config(args)
    ex = rc.extras
    out = _outdir(args)
    t_end = float(ex.get("t_end", 10.0))
    y0 = int(ex.get("y0", 0))
    mode = ex.get("mode", "exact")
    snaps = sorted(float(t) for t in ex.get("snapshot_times", []))
    if any(t <= 0 or t > t_end for t in snaps):
        raise ValueError("snapshot_times must lie in (0, t_end]")
    if t_end not in snaps:
        snaps.append(t_end)

    rng = RngStream(rc.seed, 0)
    state = sample_initial(rc.params, rc.geometry, y0, rng)
    times, heights, records = [], [], []
    t0 = 0.0
    for t_snap in snaps:
        tr = simulate(rc.params, rc.geometry, rng, t_snap - t0,
                      initial=state, mode=mode,
                      stirred_vertical=bool(ex.get("stirred_vertical",
                                                   True)))
        times.extend(t0 + tr.times)
        heights.extend(tr.heights)
        state = tr.final
        records.append({
            "t": t_snap,
            "rod_y": int(state.rod_y),
            "rows": [_rle_row(r) for r in state.occ],
        })
        t0 = t_snap

    written = [_write_trajectory(out, times, heights, args.jsonl)]
    harness.write_jsonl(out / "snapshots.jsonl", records)
    written.append("snapshots.jsonl")
    harness.write_manifest(out / "manifest.json", "simulate", rc.echo(),
                           rc.seed)
    written.append("manifest.json")
    print(f"simulate: {len(times)} rod moves to t={t_end:g}; "
          f"wrote {', '.join(written)}")
    return 0


def _cmd_couple(args) -> int:
    rc = _load_config(args)
    ex = rc.extras
    out = _outdir(args)
    t = float(ex.get("t_end", 1.0))
    sweep = [float(g) for g in
             ex.get("gamma1_sweep", [1.0, 4.0, 16.0, 64.0, 256.0])]
    tag_y = int(ex.get("tag_y", 1))
    tag_col = int(ex.get("tag_col", rc.geometry.width // 2))
    replicas = int(ex.get("replicas", 2000))
    pts = return_probability_scan(
        rc.params, rc.geometry, sweep, rc.seed, replicas, t, tag_y,
        tag_col, rod_y=int(ex.get("y0", 0)))
    harness.write_csv(out / "scan.csv",
                      ["gamma1", "t", "return_prob", "stderr"],
                      [{"gamma1": p.gamma1, "t": t,
                        "return_prob": p.at_start, "stderr": p.stderr}
                       for p in pts])
    written = ["scan.csv"]

    if ex.get("log_events", False):
        rng = RngStream(rc.seed, 1)
        y0 = int(ex.get("y0", 0))
        eta = sample_initial(rc.params, rc.geometry, y0, rng)
        zeta = sample_initial(rc.params, rc.geometry, y0, rng)
        cs = CoupledState(eta, zeta, rc.geometry, rc.params.N)
        cap = int(ex.get("events", 1000))
        recs = []
        tt = 0.0
        for k in range(cap):
            kind, dt, r, c = coupled_step(cs, rc.params, rng)
            if kind < 0 or tt + dt > t:
                break
            tt += dt
            recs.append({"k": k, "t": tt, "kind": kind, "row": r,
                         "col": c, "discrepancies": cs.discrepancies})
        harness.write_jsonl(out / "events.jsonl", recs)
        written.append("events.jsonl")

    harness.write_manifest(out / "manifest.json", "couple", rc.echo(),
                           rc.seed)
    written.append("manifest.json")
    print(f"couple: scanned {len(sweep)} swap rates at t={t:g}; "
          f"wrote {', '.join(written)}")
    return 0


def _cmd_rw(args) -> int:
    rc = _load_config(args)
    ex = rc.extras
    out = _outdir(args)
    heights = rc.geometry.heights()
    y, m = stationary_measure(rc.params, heights)
    y0 = int(ex.get("y0", int(y[int(np.argmax(m))])))
    events = ex.get("events")
    t_end = float(ex.get("t_end", math.inf if events is not None else 100.0))
    record = bool(ex.get("log_events", False))
    run = simulate_rw(rc.params, heights, RngStream(rc.seed, 0), t_end,
                      y0, max_events=None if events is None else int(events),
                      record_trajectory=record)
    occ = run.occupation / max(run.occupation.sum(), 1e-300)
    harness.write_csv(out / "law.csv", ["y", "m_y", "occupancy"],
                      [{"y": int(yy), "m_y": float(mm),
                        "occupancy": float(ww)}
                       for yy, mm, ww in zip(y, m, occ)])
    written = ["law.csv"]
    if record:
        written.append(_write_trajectory(out, run.times, run.trajectory,
                                         args.jsonl))
    harness.write_manifest(out / "manifest.json", "rw", rc.echo(), rc.seed)
    written.append("manifest.json")
    print(f"rw: {run.n_events} jumps to t={run.t_final:.6g}, final height "
          f"{run.final_height}; wrote {', '.join(written)}")
    return 0


def _cmd_burgers(args) -> int:
    rc = _load_config(args)
    ex = rc.extras
    out = _outdir(args)
    n_rows = rc.geometry.n_rows
    if "rho_bottom" in ex or "rho_top" in ex:
        rho0 = ramp_profile(n_rows, float(ex.get("rho_bottom", 0.0)),
                            float(ex.get("rho_top", 0.0)))
    else:
        rho0 = density_profile(rc.params, rc.geometry.heights())
    t_end = float(ex.get("t_end", 10.0))
    n_steps = None
    if "dt" in ex:
        n_steps = max(int(math.ceil(t_end / float(ex["dt"]))), 1)
    evo = integrate_density(rho0, rc.params.p, rc.params.q, t_end,
                            n_steps=n_steps)
    rows = [{"t": float(t), "i": int(i), "rho": float(r)}
            for k, t in enumerate(evo.times)
            for i, r in enumerate(evo.frames[k])]
    harness.write_csv(out / "profile.csv", ["t", "i", "rho"], rows)
    harness.write_manifest(out / "manifest.json", "burgers", rc.echo(),
                           rc.seed)
    drift = evo.mass_drift_rate()
    print(f"burgers: {evo.frames.shape[0]} frames to t={t_end:g} "
          f"(dt={evo.dt:.6g}, bound {stability_dt(rc.params.p, rc.params.q):.6g}), "
          f"mass drift {drift:.3e}/unit time; wrote profile.csv, "
          f"manifest.json")
    return 0


def _cmd_oracle_check(args) -> int:
    rc = _load_config(args)
    rep = oracle.run_oracle_check(rc.params, rc.geometry)
    print(json.dumps({
        "n_states": rep.n_states,
        "db_residual": rep.db_residual,
        "stationarity": rep.stationarity,
        "rates_nonneg": rep.rates_nonneg,
        "ok": rep.ok,
    }, sort_keys=True))
    return 0 if rep.ok else 1


def _cmd_experiment(args) -> int:
    rc = _load_config(args)
    written = harness.run_experiment(args.name, rc, _outdir(args))
    print(f"experiment {args.name}: wrote {', '.join(written)}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="rodfluid",
        description="Rod-in-lattice-fluid simulator and analysis tools.")
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(p, default_config=True):
        p.add_argument("--config", default=None,
                       help="key=value config file"
                       + ("" if default_config
                          else " (default: packaged tiny system)"))
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("simulate", help="one full-lattice trajectory")
    common(p)
    p.add_argument("--jsonl", action="store_true",
                   help="trajectory as JSON-lines instead of CSV")
    p.set_defaults(fn=_cmd_simulate, need_config=True)

    p = sub.add_parser("couple", help="two-copy return-probability scan")
    common(p)
    p.set_defaults(fn=_cmd_couple, need_config=True)

    p = sub.add_parser("rw", help="effective-walk run and stationary law")
    common(p)
    p.add_argument("--jsonl", action="store_true",
                   help="trajectory as JSON-lines instead of CSV")
    p.set_defaults(fn=_cmd_rw, need_config=True)

    p = sub.add_parser("burgers", help="integrate the density profile")
    common(p)
    p.set_defaults(fn=_cmd_burgers, need_config=True)

    p = sub.add_parser("oracle-check",
                       help="exact reversibility checks on a small system")
    common(p, default_config=False)
    p.set_defaults(fn=_cmd_oracle_check, need_config=False)

    p = sub.add_parser("experiment", help="run a named experiment")
    p.add_argument("name",
                   choices=["convergence", "stationary", "archimedes"])
    common(p)
    p.set_defaults(fn=_cmd_experiment, need_config=True)
    return ap


def main(argv=None) -> int:
    ap = _build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "need_config", False) and args.config is None:
        print(json.dumps({"error": "config",
                          "message": "--config is required"}),
              file=sys.stderr)
        return 2
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "key": exc.key,
                          "constraint": exc.constraint}), file=sys.stderr)
        return 2
    except (ValueError, AssertionError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
