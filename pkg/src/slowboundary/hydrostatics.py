"""Stationary-state oracles: mean profile, two-point function, absorbed walks.

The two-point function lives on the triangle ``V = {0 <= x < y <= N}`` and
vanishes on ``dV = {x = 0 or y = N}``. It solves a conductance Laplacian
equation whose source sits on the diagonal ``D = {y = x + 1}``, so it equals
``-a_N^2`` times the expected time an absorbed walk on ``V`` spends on ``D``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded
from scipy.sparse.linalg import cg, spsolve

from . import _kernels
from ._rng import as_generator
from .lattice import ModelParams, init_config, trajectory

DIRECT_SOLVE_MAX_N = 2000
DEFAULT_MAX_STEPS = 10**9


class WalkNotAbsorbed(RuntimeError):
    """A triangle walk exceeded its step budget without being absorbed."""


# --------------------------------------------------------------------------
# mean occupation


@dataclass(frozen=True)
class MeanProfile:
    N: int
    theta: float
    alpha: float
    beta: float
    a_N: float
    b_N: float
    values: np.ndarray  # rho^N(x) for x = 1..N-1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(1, self.N)


def slope_intercept(params: ModelParams):
    """``a_N = (beta-alpha)/(2 N^theta + N - 2)`` and ``b_N = alpha + a_N (N^theta - 1)``."""
    s = params.boundary_scale
    N = params.N
    if s == 0.0:
        # theta = inf: reservoirs are off and the mean is not pinned by them
        raise ValueError("mean profile undefined for theta = inf")
    n_theta = 1.0 / s
    a = (params.beta - params.alpha) / (2.0 * n_theta + N - 2)
    b = params.alpha + a * (n_theta - 1.0)
    return a, b


def mean_profile_closed_form(params: ModelParams) -> MeanProfile:
    a, b = slope_intercept(params)
    x = np.arange(1, params.N)
    return MeanProfile(params.N, params.theta, params.alpha, params.beta, a, b, a * x + b)


def mean_profile_recurrence(params: ModelParams) -> MeanProfile:
    """Solve the stationarity equations for ``E[eta(x)]`` as a tridiagonal system.

    Row x (interior) is the discrete Laplacian ``rho(x+1) - 2 rho(x) + rho(x-1)``;
    the end rows carry the reservoir terms ``(alpha - rho(1)) N^-theta`` and
    ``(beta - rho(N-1)) N^-theta``.
    """
    N = params.N
    s = params.boundary_scale
    if s == 0.0:
        raise ValueError("mean profile undefined for theta = inf")
    n = N - 1
    ab = np.zeros((3, n))
    ab[0, 1:] = 1.0  # super-diagonal
    ab[2, :-1] = 1.0  # sub-diagonal
    ab[1, :] = -2.0
    ab[1, 0] = -1.0 - s
    ab[1, -1] = -1.0 - s
    rhs = np.zeros(n)
    rhs[0] = -params.alpha * s
    rhs[-1] = -params.beta * s
    rho = solve_banded((1, 1), ab, rhs)
    for _ in range(2):
        # iterative refinement: the end rows couple with weight N^-theta only
        resid = rhs - _banded_matvec(ab, rho)
        rho = rho + solve_banded((1, 1), ab, resid)
    assert np.all(np.isfinite(rho)), "singular mean-occupation system"
    a = (rho[-1] - rho[0]) / (n - 1)
    b = rho[0] - a
    return MeanProfile(N, params.theta, params.alpha, params.beta, a, b, rho)


def _banded_matvec(ab, v):
    out = ab[1] * v
    out[:-1] += ab[0, 1:] * v[1:]
    out[1:] += ab[2, :-1] * v[:-1]
    return out


def stationary_profile(theta: float, alpha: float, beta: float):
    """Limiting stationary density profile on [0, 1] for the given regime."""
    d = beta - alpha
    if theta < 1:
        def rho(u):
            return d * np.asarray(u, dtype=float) + alpha
    elif theta == 1:
        def rho(u):
            return d / 3.0 * np.asarray(u, dtype=float) + alpha + d / 3.0
    else:
        def rho(u):
            return np.full(np.shape(u), (alpha + beta) / 2.0)
    return rho


# --------------------------------------------------------------------------
# two-point function on the triangle


@dataclass(frozen=True)
class CovarianceField:
    """``phi[x, y]`` for ``0 <= x < y <= N``; zero on ``dV`` and below the diagonal."""

    N: int
    theta: float
    values: np.ndarray  # (N+1, N+1)

    def __call__(self, x: int, y: int) -> float:
        if not 0 <= x < y <= self.N:
            raise IndexError(f"({x}, {y}) is not in V")
        return float(self.values[x, y])

    def interior(self):
        """Arrays ``(x, y, value)`` over ``1 <= x < y <= N-1``."""
        x, y = _interior_index(self.N)
        return x, y, self.values[x, y]


def _interior_index(N: int):
    x, y = np.triu_indices(N - 1, k=1)
    return x + 1, y + 1


def conductance_laplacian(N: int, theta: float) -> sp.csr_matrix:
    """Matrix of ``A_N^theta`` restricted to the interior of ``V`` (zero data on dV).

    Rows/columns follow the order of :func:`numpy.triu_indices` shifted to
    ``1 <= x < y <= N-1``.
    """
    bdy = 0.0 if np.isinf(theta) else float(N) ** (-float(theta))
    x, y = _interior_index(N)
    n = x.size
    pos = -np.ones((N + 1, N + 1), dtype=np.int64)
    pos[x, y] = np.arange(n)
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    for dx, dy in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        vx, vy = x + dx, y + dy
        in_v = (vx >= 0) & (vy <= N) & (vx < vy)
        on_bdy = in_v & ((vx == 0) | (vy == N))
        inner = in_v & ~on_bdy
        diag -= inner.astype(float) + bdy * on_bdy
        idx = np.nonzero(inner)[0]
        rows.append(idx)
        cols.append(pos[vx[idx], vy[idx]])
        vals.append(np.ones(idx.size))
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag)
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n, n))


def _solve_on_triangle(N: int, theta: float, rhs: np.ndarray) -> np.ndarray:
    A = conductance_laplacian(N, theta)
    if N <= DIRECT_SOLVE_MAX_N:
        sol = spsolve(A.tocsc(), rhs)
    else:
        # -A is symmetric positive definite
        sol, info = cg(-A, -rhs, rtol=1e-12, maxiter=50 * A.shape[0])
        if info != 0:
            raise RuntimeError(f"conjugate gradient did not converge (info={info})")
    return sol


def covariance_solve(params: ModelParams) -> CovarianceField:
    """Stationary ``Cov(eta(x), eta(y))`` from ``A_N^theta phi = a_N^2 1_D``."""
    a, _ = slope_intercept(params)
    N = params.N
    phi = np.zeros((N + 1, N + 1))
    if N >= 3:
        x, y = _interior_index(N)
        rhs = np.where(y == x + 1, a * a, 0.0)
        if np.any(rhs):
            phi[x, y] = _solve_on_triangle(N, params.theta, rhs)
    return CovarianceField(N, params.theta, phi)


def covariance_theta0(params: ModelParams) -> CovarianceField:
    """Closed form ``-(a_N^2/(N-1)) x (N-y)`` valid for theta = 0 (and any ``a_N``)."""
    a, _ = slope_intercept(params)
    N = params.N
    phi = np.zeros((N + 1, N + 1))
    x, y = _interior_index(N)
    phi[x, y] = -(a * a / (N - 1)) * x * (N - y)
    return CovarianceField(N, params.theta, phi)


def apply_conductance_laplacian(field: CovarianceField) -> np.ndarray:
    """``A_N^theta phi`` on the interior, returned as an ``(N+1, N+1)`` array."""
    N = field.N
    x, y = _interior_index(N)
    out = np.zeros((N + 1, N + 1))
    out[x, y] = conductance_laplacian(N, field.theta) @ field.values[x, y]
    return out


def occupation_time_exact_theta0(x: int, y: int, N: int) -> float:
    if not 0 <= x < y <= N:
        raise ValueError(f"({x}, {y}) is not in V for N={N}")
    if x == 0 or y == N:
        return 0.0
    return x * (N - y) / (N - 1)


def occupation_times(N: int, theta: float) -> np.ndarray:
    """Expected diagonal occupation time from every start point, ``(N+1, N+1)`` array."""
    T = np.zeros((N + 1, N + 1))
    if N >= 3:
        x, y = _interior_index(N)
        T[x, y] = _solve_on_triangle(N, theta, -(y == x + 1).astype(float))
    return T


# --------------------------------------------------------------------------
# walks on the triangle


def _start(u, N):
    x, y = int(u[0]), int(u[1])
    if not 0 <= x < y <= N:
        raise ValueError(f"start point {u} is not in V for N={N}")
    return x, y


def occupation_time_samples(u, params: ModelParams, replicas: int, rng,
                            max_steps: int = DEFAULT_MAX_STEPS) -> np.ndarray:
    """Diagonal occupation times of ``replicas`` independent walks started at ``u``."""
    x, y = _start(u, params.N)
    out = np.zeros(replicas)
    if x == 0 or y == params.N:
        return out
    done = _kernels.triangle_walk_batch(x, y, params.N, params.boundary_scale,
                                        as_generator(rng), replicas, max_steps, out)
    if done < replicas:
        raise WalkNotAbsorbed(f"walk from {u} not absorbed within {max_steps} steps")
    return out


def occupation_time_mc(u, params: ModelParams, replicas: int, rng,
                       max_steps: int = DEFAULT_MAX_STEPS):
    """Monte Carlo estimate of the diagonal occupation time and its standard error."""
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    d = occupation_time_samples(u, params, replicas, rng, max_steps)
    se = d.std(ddof=1) / np.sqrt(d.size) if d.size > 1 else np.inf
    return float(d.mean()), float(se)


def coupling_walk(u, params: ModelParams, rng, max_steps: int = DEFAULT_MAX_STEPS):
    """One run of the layered walk: ``(level count Y, diagonal time per level)``.

    A unit-conductance walk is run on V; each attempted jump into ``dV`` is
    accepted with probability ``N^-theta`` and otherwise opens a new level at
    the same position.
    """
    x, y = _start(u, params.N)
    if x == 0 or y == params.N:
        return 0, np.zeros(0)
    levels, count, steps = _kernels.layered_walk(x, y, params.N, params.boundary_scale,
                                                 as_generator(rng), max_steps)
    if steps < 0:
        raise WalkNotAbsorbed(f"layered walk from {u} not absorbed within {max_steps} steps")
    return int(count), levels


def coupling_walk_samples(u, params: ModelParams, n: int, rng,
                          max_steps: int = DEFAULT_MAX_STEPS):
    """``n`` layered walks: arrays of level counts and total diagonal times."""
    x, y = _start(u, params.N)
    if x == 0 or y == params.N:
        return np.zeros(n, dtype=np.int64), np.zeros(n)
    d = np.zeros(n)
    levels = np.zeros(n, dtype=np.int64)
    done = _kernels.layered_walk_batch(x, y, params.N, params.boundary_scale,
                                       as_generator(rng), n, max_steps, d, levels)
    if done < n:
        raise WalkNotAbsorbed(f"layered walk from {u} not absorbed within {max_steps} steps")
    return levels, d


# --------------------------------------------------------------------------
# long-run averages of the particle system


@dataclass
class StationaryEstimate:
    mean: np.ndarray
    mean_se: np.ndarray
    pairs: list
    cov: np.ndarray
    cov_se: np.ndarray
    ess: float
    samples: np.ndarray  # (samples, N-1) snapshots


def batch_means_se(series: np.ndarray, n_batches: int) -> np.ndarray:
    """Standard error of the mean of a correlated series (axis 0) by batch means."""
    n = series.shape[0]
    if n_batches < 2 or n < n_batches:
        raise ValueError("need at least 2 batches and one sample per batch")
    size = n // n_batches
    trimmed = series[: size * n_batches]
    means = trimmed.reshape((n_batches, size) + series.shape[1:]).mean(axis=1)
    return means.std(axis=0, ddof=1) / np.sqrt(n_batches)


def stationary_mc_estimate(params: ModelParams, burn_in_macro: float, samples: int,
                           spacing_macro: float, rng, pairs=(), block_macro: float = 50.0,
                           gamma=None) -> StationaryEstimate:
    """Time averages of the particle system as estimates of stationary moments.

    Snapshots are taken every ``spacing_macro`` after a burn-in, standard
    errors come from batch means over blocks of ``block_macro`` macroscopic
    time (at least two blocks). Covariances are computed for the 1-based
    site ``pairs``.
    """
    if burn_in_macro <= 0 or spacing_macro <= 0:
        raise ValueError("burn_in_macro and spacing_macro must be > 0")
    rng = as_generator(rng)
    if gamma is None:
        gamma = (params.alpha + params.beta) / 2
    config = init_config(params, gamma, rng)
    times = burn_in_macro + spacing_macro * np.arange(samples)
    snaps = trajectory(config, params, times, rng).astype(float)
    per_block = max(1, int(round(block_macro / spacing_macro)))
    n_batches = max(2, samples // per_block)
    mean = snaps.mean(axis=0)
    mean_se = batch_means_se(snaps, n_batches)
    pairs = [tuple(p) for p in pairs]
    if pairs:
        i = np.array([p[0] - 1 for p in pairs])
        j = np.array([p[1] - 1 for p in pairs])
        prod = (snaps[:, i] - mean[i]) * (snaps[:, j] - mean[j])
        cov = prod.mean(axis=0)
        cov_se = batch_means_se(prod, n_batches)
    else:
        cov = cov_se = np.zeros(0)
    var = snaps.var(axis=0)
    ok = mean_se > 0
    ess = float(np.min(var[ok] / mean_se[ok] ** 2)) if np.any(ok) else float(samples)
    if ess < 100:
        warnings.warn(f"effective sample size {ess:.0f} < 100", RuntimeWarning, stacklevel=2)
    return StationaryEstimate(mean, mean_se, pairs, cov, cov_se, ess, snaps)
