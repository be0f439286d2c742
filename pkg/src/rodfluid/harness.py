"""Experiment drivers and reproducible data-file output.

The three named experiments (convergence, stationary, archimedes) take an
ExperimentConfig, return plain row dicts, and leave file writing to the
emitters below so the CLI and tests share one code path.  All output is
deterministic for a fixed seed: floats are written with repr round-trip
formatting, JSON keys are sorted, and nothing records wall-clock time.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__, oracle
from .config import RunConfig
from .kinetics import run_rod_law
from .limit_walk import continuous_mean, modus, rw_rates, simulate_rw, \
    stationary_measure
from .model import LatticeGeometry, Params, density_profile
from .rng import RngStream, derive_master


# ------------------------------------------------------- empirical laws

@dataclass
class EmpiricalLaw:
    """Replica counts of the rod height over a fixed support."""

    support: np.ndarray
    counts: np.ndarray
    n_replicas: int

    def __post_init__(self):
        self.support = np.asarray(self.support, np.int64)
        self.counts = np.asarray(self.counts, np.int64)
        if self.support.shape != self.counts.shape:
            raise ValueError("support and counts must align")
        if np.any(np.diff(self.support) <= 0):
            raise ValueError("support must be strictly increasing")
        if np.any(self.counts < 0) or self.counts.sum() != self.n_replicas:
            raise ValueError("counts must be nonnegative and sum to replicas")

    @property
    def probabilities(self) -> np.ndarray:
        return self.counts / self.n_replicas

    @property
    def stderr(self) -> np.ndarray:
        p = self.probabilities
        return np.sqrt(p * (1.0 - p) / self.n_replicas)


def tv_distance(law: EmpiricalLaw, ref_support, ref_probs) -> float:
    """Total variation on the union support; reference mass outside the
    empirical window counts in full."""
    ref_support = np.asarray(ref_support, np.int64)
    ref_probs = np.asarray(ref_probs, np.float64)
    acc = {int(y): p for y, p in zip(law.support, law.probabilities)}
    for y, p in zip(ref_support, ref_probs):
        acc[int(y)] = acc.get(int(y), 0.0) - p
    return float(0.5 * sum(abs(v) for v in acc.values()))


def bootstrap_tv(law: EmpiricalLaw, ref_support, ref_probs, seed: int,
                 n_boot: int = 1000) -> tuple[float, float]:
    """Central 95% interval of the TV under multinomial resampling."""
    gen = np.random.Generator(np.random.PCG64(seed))
    p = law.probabilities
    draws = gen.multinomial(law.n_replicas, p, size=n_boot)
    tvs = np.empty(n_boot)
    for k in range(n_boot):
        resampled = EmpiricalLaw(law.support, draws[k], law.n_replicas)
        tvs[k] = tv_distance(resampled, ref_support, ref_probs)
    lo, hi = np.percentile(tvs, [2.5, 97.5])
    return float(lo), float(hi)


# ------------------------------------------------- experiment configuration

@dataclass
class ExperimentConfig:
    name: str
    params: Params
    geometry: LatticeGeometry
    replicas: int
    times: tuple[float, ...]
    gamma1_sweep: tuple[float, ...]
    seed: int
    extras: dict

    def __post_init__(self):
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if any(t2 <= t1 for t1, t2 in zip(self.times, self.times[1:])):
            raise ValueError("observation times must be increasing")

    @classmethod
    def from_run_config(cls, name: str, rc: RunConfig) -> "ExperimentConfig":
        ex = rc.extras
        return cls(
            name=name,
            params=rc.params,
            geometry=rc.geometry,
            replicas=int(ex.get("replicas", 100_000)),
            times=tuple(ex.get("times", [1.0])),
            gamma1_sweep=tuple(ex.get("gamma1_sweep",
                                      [1.0, 10.0, 100.0, 1000.0])),
            seed=rc.seed,
            extras=ex,
        )

    def echo(self) -> dict:
        out = RunConfig(self.params, self.geometry, self.seed,
                        dict(self.extras)).echo()
        out["replicas"] = self.replicas
        out["times"] = list(self.times)
        out["gamma1_sweep"] = list(self.gamma1_sweep)
        return out


# ------------------------------------------------------------ experiments

def reference_transient_law(params: Params, geometry: LatticeGeometry,
                            y0: int, times) -> np.ndarray:
    """Law of the effective walk truncated to the height window, one row
    per observation time."""
    y = geometry.heights()
    up, down = rw_rates(params, y)
    Q = oracle.birth_death_generator(up, down)
    p0 = np.zeros(y.size)
    p0[int(np.searchsorted(y, y0))] = 1.0
    return np.vstack([oracle.transient_law(Q, p0, t) for t in times])


def experiment_convergence(cfg: ExperimentConfig,
                           mode: str = "exact") -> list[dict]:
    """TV between the simulated rod law and the effective-walk reference
    at each observation time, for each swap rate in the sweep."""
    y0 = int(cfg.extras.get("y0", 0))
    y = cfg.geometry.heights()
    refs = reference_transient_law(cfg.params, cfg.geometry, y0, cfg.times)
    rows = []
    for k, g1 in enumerate(cfg.gamma1_sweep):
        par = replace(cfg.params, gamma1=float(g1))
        law = run_rod_law(par, cfg.geometry,
                          derive_master(cfg.seed, 1 + k), cfg.replicas,
                          cfg.times[-1], np.asarray(cfg.times),
                          rod_y0=y0, mode=mode)
        for j, t in enumerate(cfg.times):
            emp = EmpiricalLaw(y, law.counts[j], cfg.replicas)
            tv = tv_distance(emp, y, refs[j])
            lo, hi = bootstrap_tv(emp, y, refs[j],
                                  derive_master(cfg.seed, 1000 + 16 * k + j))
            rows.append({
                "gamma1": float(g1),
                "t": float(t),
                "tv": tv,
                "ci_lo": lo,
                "ci_hi": hi,
                "replicas": cfg.replicas,
            })
    return rows


def experiment_stationary(cfg: ExperimentConfig) -> dict:
    """One long run of the effective walk against its closed-form law:
    occupation-time TV, empirical vs. analytic mean, histogram mode."""
    n_events = int(cfg.extras.get("events", 10_000_000))
    heights, m = stationary_measure(cfg.params)
    y0 = int(heights[int(np.argmax(m))])
    rng = RngStream(cfg.seed, 0)
    run = simulate_rw(cfg.params, heights, rng, math.inf, y0,
                      max_events=n_events)
    w = run.occupation / run.occupation.sum()
    par = cfg.params
    table = [{"y": int(y), "m_y": float(mv), "occupancy": float(wv)}
             for y, mv, wv in zip(heights, m, w)]
    summary = {
        "tv": float(0.5 * np.abs(w - m).sum()),
        "empirical_mean": float(w @ heights),
        "continuous_mean": continuous_mean(par.alpha, par.beta, par.N,
                                           par.kappa),
        "log_n_over_beta": math.log(par.N) / par.beta,
        "empirical_mode": int(heights[int(np.argmax(w))]),
        "modus": modus(par.alpha, par.beta, par.N, par.kappa),
        "n_events": int(run.n_events),
        "t_final": float(run.t_final),
    }
    return {"table": table, "summary": summary}


def experiment_archimedes(cfg: ExperimentConfig) -> list[dict]:
    """Displacement table: for each rod length and reference density, the
    fluid density at the analytic mean height and at (1/beta) log N, each
    multiplied by N."""
    n_sweep = [int(n) for n in cfg.extras.get("n_sweep", [10, 100, 1000])]
    kappa_sweep = [float(k) for k in
                   cfg.extras.get("kappa_sweep", [0.5, 1.0, 2.0])]
    par = cfg.params
    rows = []
    for kap in kappa_sweep:
        for n in n_sweep:
            pk = replace(par, kappa=kap, N=n)
            mean = continuous_mean(par.alpha, par.beta, n, kap)
            band = math.log(n) / par.beta
            rows.append({
                "N": n,
                "kappa": kap,
                "mean": mean,
                "modus": modus(par.alpha, par.beta, n, kap),
                "log_N_over_beta": band,
                "rho_mean_N": n * density_profile(pk, mean),
                "rho_band_N": n * density_profile(pk, band),
            })
    return rows


# ----------------------------------------------------------- file output

def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, fieldnames, rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(fieldnames)
        for row in rows:
            wr.writerow([format_value(row[k]) for k in fieldnames])


def write_jsonl(path, records) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def write_manifest(path, experiment: str, config_echo: dict,
                   seed: int) -> None:
    doc = {
        "experiment": experiment,
        "version": __version__,
        "seed": seed,
        "config": config_echo,
    }
    with open(path, "w") as fh:
        fh.write(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def run_experiment(name: str, rc: RunConfig, outdir) -> list[str]:
    """Execute one named experiment and write its data files plus a
    manifest; returns the file names written."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = ExperimentConfig.from_run_config(name, rc)
    written = []
    if name == "convergence":
        rows = experiment_convergence(
            cfg, mode=cfg.extras.get("mode", "exact"))
        write_csv(out / "convergence.csv",
                  ["gamma1", "t", "tv", "ci_lo", "ci_hi", "replicas"], rows)
        written.append("convergence.csv")
    elif name == "stationary":
        res = experiment_stationary(cfg)
        write_csv(out / "stationary.csv", ["y", "m_y", "occupancy"],
                  res["table"])
        write_jsonl(out / "stationary_summary.jsonl", [res["summary"]])
        written += ["stationary.csv", "stationary_summary.jsonl"]
    elif name == "archimedes":
        rows = experiment_archimedes(cfg)
        write_csv(out / "archimedes.csv",
                  ["N", "kappa", "mean", "modus", "log_N_over_beta",
                   "rho_mean_N", "rho_band_N"], rows)
        written.append("archimedes.csv")
    else:
        raise ValueError(f"unknown experiment {name!r}")
    write_manifest(out / "manifest.json", name, cfg.echo(), cfg.seed)
    written.append("manifest.json")
    return written
