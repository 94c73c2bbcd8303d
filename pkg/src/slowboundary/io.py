"""Plain-text export of snapshots, martingale paths, profiles and grid fields."""

from __future__ import annotations

import csv
import json

import numpy as np

from .hydrostatics import CovarianceField, MeanProfile
from .lattice import MartingaleSeries
from .pde import GridField


def _open(path, mode="w"):
    try:
        return open(path, mode, newline="")
    except OSError as exc:
        raise OSError(f"cannot open {path}: {exc.strerror or exc}") from exc


def write_snapshots(path, t_macro, occupancies) -> None:
    """JSON list of ``{"t_macro": t, "occupancy": [0/1, ...]}`` records."""
    occ = np.atleast_2d(np.asarray(occupancies))
    t = np.asarray(t_macro, dtype=float).ravel()
    if t.size != occ.shape[0]:
        raise ValueError("one time per snapshot required")
    recs = [{"t_macro": float(ti), "occupancy": [int(v) for v in row]} for ti, row in zip(t, occ)]
    with _open(path) as fh:
        json.dump(recs, fh)
        fh.write("\n")


def read_snapshots(path):
    with open(path) as fh:
        recs = json.load(fh)
    t = np.array([r["t_macro"] for r in recs], dtype=float)
    occ = np.array([r["occupancy"] for r in recs], dtype=np.int8)
    return t, occ


def write_martingale(path, series: MartingaleSeries) -> None:
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "value"])
        for t, v in zip(series.times, series.values):
            w.writerow([repr(float(t)), repr(float(v))])


def write_mean_profile(path, profile: MeanProfile) -> None:
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "value"])
        for x, v in enumerate(profile.values, start=1):
            w.writerow([x, repr(float(v))])


def write_covariance(path, field: CovarianceField) -> None:
    """Interior points ``0 < x < y < N`` as ``(x, y, value)`` rows."""
    N = field.N
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "value"])
        for x in range(1, N - 1):
            for y in range(x + 1, N):
                w.writerow([x, y, repr(float(field.values[x, y]))])


def write_grid_field(path, field: GridField) -> None:
    """CSV ``(t, u, value)`` preceded by one ``# {json}`` metadata line."""
    meta = {"bc_kind": field.bc_kind, "M": int(field.M), "dt": float(field.dt),
            "alpha": float(field.alpha), "beta": float(field.beta), "scheme": field.scheme}
    with _open(path) as fh:
        fh.write("# " + json.dumps(meta) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "u", "value"])
        for t, row in zip(field.times, field.values):
            for u, v in zip(field.u, row):
                w.writerow([repr(float(t)), repr(float(u)), repr(float(v))])


def read_grid_field(path):
    """Return ``(metadata dict, times, u, values[T, M+1])``."""
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# "):
            raise ValueError(f"{path}: missing metadata header")
        meta = json.loads(first[2:])
        data = np.loadtxt(fh, delimiter=",", skiprows=1, ndmin=2)
    M = meta["M"]
    times = data[:: M + 1, 0]
    u = data[: M + 1, 1]
    return meta, times, u, data[:, 2].reshape(times.size, M + 1)
