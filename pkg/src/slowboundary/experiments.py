"""Convergence studies tying the particle system to the exact oracles and PDEs."""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.integrate import quad

from . import hydrostatics as hs
from . import pde
from ._rng import stream, streams
from .lattice import Configuration, ModelParams, init_config, profile_values, trajectory

Z_MAX = 4.0
SITE_FRACTION = 0.95
ASSOC_MAX = 0.05
MIN_REPLICAS = 50

DEFAULT_TEST_FUNCTIONS: dict[str, Callable] = {
    "one": lambda u: np.ones_like(np.asarray(u, dtype=float)),
    "u": lambda u: np.asarray(u, dtype=float),
    "u2": lambda u: np.asarray(u, dtype=float) ** 2,
    "sin": lambda u: np.sin(np.pi * np.asarray(u, dtype=float)),
    "cos": lambda u: np.cos(np.pi * np.asarray(u, dtype=float)),
}


def _occupancies(configs) -> np.ndarray:
    if isinstance(configs, Configuration):
        return configs.occupancy[None, :]
    if isinstance(configs, np.ndarray):
        return np.atleast_2d(configs)
    return np.array([c.occupancy if isinstance(c, Configuration) else c for c in configs])


def coarse_grain_boundary(config, eps: float):
    """Averages of ``eta`` over the ``floor(eps N)`` sites nearest each reservoir."""
    eta = _occupancies(config)[0]
    N = eta.size + 1
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    k = math.floor(eps * N)
    if k < 1:
        raise ValueError(f"floor(eps*N) = 0 for eps={eps}, N={N}")
    k = min(k, N - 1)
    return float(eta[:k].mean()), float(eta[-k:].mean())


def profile_integral(H: Callable, gamma) -> float:
    """``int_0^1 H(u) gamma(u) du``."""
    if callable(gamma):
        val, _ = quad(lambda u: float(H(u)) * float(gamma(u)), 0.0, 1.0, limit=200)
    else:
        val, _ = quad(lambda u: float(H(u)) * float(gamma), 0.0, 1.0, limit=200)
    return val


def association_statistic(configs, gamma, H_family=None, delta: float = 0.05) -> float:
    """Fraction of configurations whose empirical pairing misses the profile by more than ``delta``.

    A configuration counts as a miss when, for some ``H`` in the family,
    ``|(1/N) sum H(x/N) eta(x) - int H gamma| > delta``.
    """
    occ = _occupancies(configs).astype(float)
    if occ.shape[0] == 0:
        raise ValueError("empty ensemble")
    family = _family(H_family)
    if not family:
        raise ValueError("empty test-function family")
    N = occ.shape[1] + 1
    worst = np.zeros(occ.shape[0])
    for H in family.values():
        target = profile_integral(H, gamma)
        emp = occ @ profile_values(H, N) / N
        worst = np.maximum(worst, np.abs(emp - target))
    return float(np.mean(worst > delta))


def _family(H_family) -> dict:
    if H_family is None:
        return dict(DEFAULT_TEST_FUNCTIONS)
    if isinstance(H_family, Mapping):
        return dict(H_family)
    return {getattr(H, "__name__", f"H{i}"): H for i, H in enumerate(H_family)}


def box_blocks(N: int, w: int):
    """Consecutive blocks of ``w`` sites covering 1..N-1 (last one may be shorter)."""
    if w < 1:
        raise ValueError("window must be >= 1")
    starts = np.arange(0, N - 1, w)
    return [np.arange(s, min(s + w, N - 1)) for s in starts]


def box_average(site_values: np.ndarray, w: int):
    """Block averages of a per-site array; returns ``(centres u, averages, widths)``."""
    v = np.asarray(site_values, dtype=float)
    N = v.shape[-1] + 1
    blocks = box_blocks(N, w)
    centres = np.array([(b.mean() + 1) / N for b in blocks])
    avg = np.stack([v[..., b].mean(axis=-1) for b in blocks], axis=-1)
    widths = np.array([b.size / N for b in blocks])
    return centres, avg, widths


def box_l1(site_values, reference, w: int):
    """L1 distance between block-averaged site values and block-averaged reference."""
    _, a, widths = box_average(site_values, w)
    _, b, _ = box_average(reference, w)
    return np.sum(np.abs(a - b) * widths, axis=-1)


def default_window(N: int) -> int:
    return max(1, math.ceil(N / 16))


# --------------------------------------------------------------------------
# reports


@dataclass
class ExperimentReport:
    experiment_id: str
    config: dict = field(default_factory=dict)
    columns: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    def column(self, name):
        return [r[name] for r in self.rows]

    def __eq__(self, other):
        if not isinstance(other, ExperimentReport):
            return NotImplemented
        return (self.experiment_id == other.experiment_id and self.config == other.config
                and list(self.columns) == list(other.columns) and self.rows == other.rows)


def _plain(v):
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    return v


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(s: str):
    if s == "":
        return None
    if s in ("True", "False"):
        return s == "True"
    for conv in (int, float):
        try:
            return conv(s)
        except ValueError:
            pass
    return s


def emit_report(report: ExperimentReport, fmt: str, path) -> None:
    """Write ``report`` as CSV (rows only) or JSON (config echo, columns, rows)."""
    fmt = fmt.lower()
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be csv or json, got {fmt!r}")
    try:
        with open(path, "w", newline="") as fh:
            if fmt == "csv":
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(report.columns)
                for row in report.rows:
                    writer.writerow([_cell(_plain(row.get(c))) for c in report.columns])
            else:
                json.dump({"experiment_id": report.experiment_id,
                           "config": _plain(report.config),
                           "columns": list(report.columns),
                           "rows": [{c: _plain(r.get(c)) for c in report.columns}
                                    for r in report.rows]},
                          fh, indent=2, allow_nan=True)
                fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc.strerror or exc}") from exc


def load_report(path, fmt: str | None = None) -> ExperimentReport:
    fmt = (fmt or os.path.splitext(str(path))[1].lstrip(".")).lower()
    with open(path, newline="") as fh:
        if fmt == "json":
            d = json.load(fh)
            return ExperimentReport(d["experiment_id"], d["config"], d["columns"], d["rows"])
        reader = csv.reader(fh)
        columns = next(reader, [])
        rows = [{c: _parse(v) for c, v in zip(columns, line)} for line in reader]
    return ExperimentReport("", {}, columns, rows)


def _map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------
# hydrostatics


HYDROSTATIC_COLUMNS = [
    "cell", "seed", "N", "theta", "alpha", "beta", "burn_in", "samples", "spacing",
    "linf_mean", "frac_sites_z_ok", "max_abs_z", "ess",
    "cov_x", "cov_y", "cov_mc", "cov_se", "cov_exact", "cov_z",
    "assoc_prob", "delta", "linf_exact_vs_limit", "pass_z", "pass_cov", "pass_assoc",
]


def hydrostatic_cell(params: ModelParams, burn_in: float, samples: int, spacing: float, rng,
                     H_family=None, delta: float = 0.05, pair=None) -> dict:
    pair = pair or (max(1, params.N // 4), max(2, params.N // 2))
    est = hs.stationary_mc_estimate(params, burn_in, samples, spacing, rng, pairs=[pair])
    exact = hs.mean_profile_closed_form(params)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(est.mean_se > 0, (est.mean - exact.values) / est.mean_se,
                     np.where(est.mean == exact.values, 0.0, np.inf))
    cov_exact = hs.covariance_solve(params)(*pair)
    cov_z = (est.cov[0] - cov_exact) / est.cov_se[0] if est.cov_se[0] > 0 else 0.0
    limit = hs.stationary_profile(params.theta, params.alpha, params.beta)
    assoc = association_statistic(est.samples, limit, H_family, delta)
    frac = float(np.mean(np.abs(z) <= Z_MAX))
    return {
        "N": params.N, "theta": params.theta, "alpha": params.alpha, "beta": params.beta,
        "burn_in": burn_in, "samples": samples, "spacing": spacing,
        "linf_mean": float(np.max(np.abs(est.mean - exact.values))),
        "frac_sites_z_ok": frac, "max_abs_z": float(np.max(np.abs(z))), "ess": est.ess,
        "cov_x": pair[0], "cov_y": pair[1], "cov_mc": float(est.cov[0]),
        "cov_se": float(est.cov_se[0]), "cov_exact": float(cov_exact), "cov_z": float(cov_z),
        "assoc_prob": assoc, "delta": delta,
        "linf_exact_vs_limit": float(np.max(np.abs(exact.values - limit(exact.sites / params.N)))),
        "pass_z": frac >= SITE_FRACTION, "pass_cov": abs(cov_z) <= Z_MAX,
        "pass_assoc": assoc <= ASSOC_MAX,
    }


def hydrostatic_experiment(Ns: Sequence[int], thetas: Sequence[float], alpha: float, beta: float,
                           burn_in: float, samples: int, seed: int, spacing: float = 2.0,
                           H_family=None, delta: float = 0.05, jobs: int = 1) -> ExperimentReport:
    """Stationary Monte Carlo against the exact mean/covariance and the limiting profile.

    Cell ``i`` of the (N, theta) grid draws from the stream keyed ``(seed, i)``.
    """
    grid = [(N, th) for N in Ns for th in thetas]

    def run(item):
        i, (N, th) = item
        row = hydrostatic_cell(ModelParams(N, alpha, beta, th), burn_in, samples, spacing,
                               stream(seed, i), H_family, delta)
        row.update(cell=i, seed=seed)
        return row

    rows = _map(run, list(enumerate(grid)), jobs)
    config = {"Ns": list(Ns), "thetas": list(thetas), "alpha": alpha, "beta": beta,
              "burn_in": burn_in, "samples": samples, "spacing": spacing, "seed": seed,
              "delta": delta, "test_functions": sorted(_family(H_family)),
              "z_max": Z_MAX, "site_fraction": SITE_FRACTION, "assoc_max": ASSOC_MAX}
    return ExperimentReport("hydrostatic", config, list(HYDROSTATIC_COLUMNS), rows)


# --------------------------------------------------------------------------
# hydrodynamics


def _hydro_replica(params: ModelParams, gamma, t_list, rng):
    config = init_config(params, gamma, rng)
    flux = np.zeros(4, dtype=np.int64)
    snaps = trajectory(config, params, t_list, rng, flux)
    return snaps, flux, config.particle_count()


def hydrodynamic_experiment(Ns: Sequence[int], thetas: Sequence[float], alpha: float,
                            beta: float, gamma, t_list: Sequence[float], replicas: int,
                            seed: int, window: int | None = None, M: int = 256,
                            H_family=None, gamma_id: str | None = None,
                            jobs: int = 1) -> ExperimentReport:
    """Replica-averaged empirical density against the heat equation with theta-matched data.

    For every (N, theta, t) the report holds the annealed L1 distance between
    block-averaged densities (window ``w`` sites, default ``ceil(N/16)``),
    the per-replica (quenched) L1 mean, pairing errors for the test
    functions, and the boundary flux bookkeeping.
    """
    t_list = sorted(float(t) for t in t_list)
    if not t_list or t_list[0] <= 0:
        raise ValueError("t_list must be non-empty and positive")
    if replicas < MIN_REPLICAS:
        raise ValueError(f"replicas must be >= {MIN_REPLICAS}")
    family = _family(H_family)
    rows = []
    cell = 0
    pde_cache = {}
    for N in Ns:
        w = window or default_window(N)
        for th in thetas:
            params = ModelParams(N, alpha, beta, th)
            bc = pde.bc_for_theta(th)
            rngs = streams(seed, replicas, cell)
            out = _map(lambda r: _hydro_replica(params, gamma, t_list, r), rngs, jobs)
            snaps = np.stack([o[0] for o in out]).astype(float)  # (R, T, N-1)
            flux = np.stack([o[1] for o in out])
            mass0 = np.array([o[2] for o in out])
            net = flux[:, 0] - flux[:, 1] + flux[:, 2] - flux[:, 3]
            x = np.arange(1, N) / N
            names = [k for k, H in family.items()
                     if bc != pde.DIRICHLET or _vanishes_at_ends(H)]
            for k, t in enumerate(t_list):
                key = (bc, t)
                if key not in pde_cache:
                    pde_cache[key] = pde.solve_heat(bc, gamma, alpha, beta, M, T_final=t)
                sol = pde_cache[key]
                ref = np.interp(x, sol.u, sol.values[-1])
                mean_occ = snaps[:, k].mean(axis=0)
                l1_q = box_l1(snaps[:, k], ref, w)
                row = {"cell": cell, "seed": seed, "N": N, "theta": th, "bc": bc, "t": t,
                       "replicas": replicas, "window": w, "M": M,
                       "l1_annealed": float(box_l1(mean_occ, ref, w)),
                       "l1_quenched_mean": float(l1_q.mean()),
                       "l1_quenched_se": float(l1_q.std(ddof=1) / np.sqrt(replicas))}
                for name in names:
                    H = family[name]
                    emp = snaps[:, k] @ profile_values(H, N) / N
                    target = float(np.dot(_trap_weights(sol.M), sol.values[-1] * H(sol.u)))
                    row[f"pair_{name}_diff"] = float(emp.mean() - target)
                    row[f"pair_{name}_se"] = float(emp.std(ddof=1) / np.sqrt(replicas))
                if k == len(t_list) - 1:
                    drift = snaps[:, k].sum(axis=1) - mass0
                    row["mass_drift_mean"] = float(drift.mean())
                    row["mass_drift_se"] = float(drift.std(ddof=1) / np.sqrt(replicas))
                    row["boundary_events_mean"] = float(flux.sum(axis=1).mean())
                    row["flux_mismatch"] = int(np.max(np.abs(drift - net)))
                    # |d mass / dt_micro| <= 2 N^-theta, so over t N^2 microscopic units:
                    row["injection_bound"] = 2.0 * params.boundary_scale * N**2 * t
                    row["pass_mass"] = bool(abs(row["mass_drift_mean"])
                                            <= row["injection_bound"] + Z_MAX * row["mass_drift_se"])
                rows.append(row)
            cell += 1
    columns = []
    for r in rows:
        columns += [c for c in r if c not in columns]
    rows = [{c: r.get(c) for c in columns} for r in rows]
    config = {"Ns": list(Ns), "thetas": list(thetas), "alpha": alpha, "beta": beta,
              "gamma_id": gamma_id or (repr(gamma) if not callable(gamma) else
                                       getattr(gamma, "__name__", "gamma")),
              "t_list": t_list, "replicas": replicas, "seed": seed, "window": window,
              "M": M, "test_functions": sorted(family)}
    return ExperimentReport("hydrodynamic", config, columns, rows)


def _vanishes_at_ends(H) -> bool:
    return abs(float(H(0.0))) < 1e-12 and abs(float(H(1.0))) < 1e-12


def _trap_weights(M: int) -> np.ndarray:
    w = np.full(M + 1, 1.0 / M)
    w[[0, -1]] *= 0.5
    return w
