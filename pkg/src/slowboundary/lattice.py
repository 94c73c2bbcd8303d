"""Symmetric simple exclusion with slow reservoirs at both ends.

The lattice is ``{1, ..., N-1}``. Each bond ``(x, x+1)`` carries a rate-one
exchange clock; site 1 is filled at rate ``alpha N^-theta`` and emptied at
rate ``(1 - alpha) N^-theta``, site N-1 likewise with ``beta``. Simulations
run in microscopic time; macroscopic time ``t`` corresponds to ``t N^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from ._rng import as_generator

# event kinds returned by sample_event
BOND, LEFT, RIGHT = "bond", "left", "right"


@dataclass(frozen=True)
class ModelParams:
    """Scale ``N``, reservoir densities and the boundary slowdown exponent.

    ``theta=math.inf`` switches the reservoirs off entirely.
    """

    N: int
    alpha: float
    beta: float
    theta: float

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 3:
            raise ValueError(f"N must be an integer >= 3, got {self.N}")
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0,1), got {v}")
        if not self.theta >= 0:
            raise ValueError(f"theta must be >= 0, got {self.theta}")

    @property
    def boundary_scale(self) -> float:
        """``N^-theta``."""
        if math.isinf(self.theta):
            return 0.0
        return float(self.N) ** (-float(self.theta))

    @property
    def sites(self) -> np.ndarray:
        return np.arange(1, self.N)


@dataclass
class Configuration:
    """Occupancy of sites ``1..N-1`` (``occupancy[0]`` is site 1)."""

    occupancy: np.ndarray
    micro_time: float = 0.0

    def __post_init__(self):
        occ = np.asarray(self.occupancy)
        if occ.ndim != 1 or occ.size < 2:
            raise ValueError("occupancy must be a 1-d array with at least 2 sites")
        if not np.all((occ == 0) | (occ == 1)):
            raise ValueError("occupancy entries must be 0 or 1")
        self.occupancy = occ.astype(np.int8)
        if self.micro_time < 0:
            raise ValueError("micro_time must be >= 0")

    @property
    def N(self) -> int:
        return self.occupancy.size + 1

    def t_macro(self) -> float:
        return self.micro_time / self.N**2

    def copy(self) -> "Configuration":
        return Configuration(self.occupancy.copy(), self.micro_time)

    def particle_count(self) -> int:
        return int(self.occupancy.sum())


@dataclass(frozen=True)
class RateTable:
    bond_rates: np.ndarray
    left_flip_rate: float
    right_flip_rate: float

    @property
    def total_rate(self) -> float:
        return float(self.bond_rates.sum()) + self.left_flip_rate + self.right_flip_rate


@dataclass
class MartingaleSeries:
    """``M_t(H)`` sampled on ``times`` (macroscopic), with its compensator ``<M>_t``."""

    times: np.ndarray
    values: np.ndarray
    test_function_id: str
    quadratic_variation: np.ndarray = field(default=None)


def _check(config: Configuration, params: ModelParams):
    if config.N != params.N:
        raise ValueError(f"configuration has N={config.N}, params have N={params.N}")


def profile_values(gamma, N: int) -> np.ndarray:
    """Evaluate a profile (callable or constant) at ``x/N``, x = 1..N-1."""
    return on_grid(gamma, np.arange(1, N) / N)


def on_grid(f, u: np.ndarray) -> np.ndarray:
    """Evaluate ``f`` on the array ``u``; scalar-only callables are looped."""
    if not callable(f):
        return np.full(u.shape, float(f))
    try:
        vals = np.asarray(f(u), dtype=float)
    except (TypeError, ValueError):
        vals = None
    if vals is None or vals.shape not in ((), u.shape):
        vals = np.array([float(f(v)) for v in u])
    return np.broadcast_to(vals, u.shape).astype(float)


def init_config(params: ModelParams, gamma, rng) -> Configuration:
    """Product Bernoulli configuration with site ``x`` occupied w.p. ``gamma(x/N)``."""
    p = profile_values(gamma, params.N)
    if not np.all(np.isfinite(p)) or p.min() < 0.0 or p.max() > 1.0:
        raise ValueError("profile values must lie in [0, 1]")
    rng = as_generator(rng)
    occ = (rng.random(p.size) < p).astype(np.int8)
    return Configuration(occ, 0.0)


def rates(config: Configuration, params: ModelParams) -> RateTable:
    _check(config, params)
    eta = config.occupancy
    s = params.boundary_scale
    left = s * (params.alpha if eta[0] == 0 else 1.0 - params.alpha)
    right = s * (params.beta if eta[-1] == 0 else 1.0 - params.beta)
    return RateTable(np.ones(params.N - 2), left, right)


def sample_event(config: Configuration, params: ModelParams, rng):
    """Draw the next clock ring: ``(kind, bond index x or site, micro_dt)``.

    Bond events carry the left site ``x`` of bond ``(x, x+1)`` (1-based).
    """
    rng = as_generator(rng)
    table = rates(config, params)
    nb = params.N - 2
    total = table.total_rate
    dt = rng.exponential(1.0 / total)
    u = rng.random() * total
    if u < nb:
        return BOND, min(int(u), nb - 1) + 1, dt
    if u < nb + table.left_flip_rate:
        return LEFT, 1, dt
    return RIGHT, params.N - 1, dt


def apply_event(config: Configuration, kind: str, where: int, dt: float = 0.0) -> Configuration:
    new = config.copy()
    eta = new.occupancy
    if kind == BOND:
        i = where - 1
        eta[i], eta[i + 1] = eta[i + 1], eta[i]
    elif kind in (LEFT, RIGHT):
        eta[where - 1] = 1 - eta[where - 1]
    else:
        raise ValueError(f"unknown event kind {kind!r}")
    new.micro_time += dt
    return new


def step(config: Configuration, params: ModelParams, rng):
    """One clock ring of the generator; returns ``(new configuration, micro_dt)``."""
    kind, where, dt = sample_event(config, params, rng)
    return apply_event(config, kind, where, dt), dt


def simulate_until(config: Configuration, params: ModelParams, t_macro: float, rng,
                   flux: np.ndarray | None = None) -> Configuration:
    """Advance by macroscopic time ``t_macro`` (microscopic ``t_macro * N^2``).

    ``flux``, if given, is an int64 array of length 4 incremented with the
    counts of (left in, left out, right in, right out) boundary events.
    """
    _check(config, params)
    if t_macro < 0:
        raise ValueError("t_macro must be >= 0")
    new = config.copy()
    if t_macro == 0:
        return new
    if flux is None:
        flux = np.zeros(4, dtype=np.int64)
    span = t_macro * params.N**2
    _kernels.advance(new.occupancy, 0.0, span, params.boundary_scale,
                     params.alpha, params.beta, as_generator(rng), flux)
    new.micro_time = config.micro_time + span
    return new


def trajectory(config: Configuration, params: ModelParams, t_list: Sequence[float], rng,
               flux: np.ndarray | None = None) -> np.ndarray:
    """Occupancies at the sorted macroscopic times ``t_list`` (relative to now)."""
    _check(config, params)
    t = np.asarray(t_list, dtype=float)
    if t.ndim != 1 or np.any(t < 0) or np.any(np.diff(t) < 0):
        raise ValueError("t_list must be non-negative and sorted")
    out = np.empty((t.size, params.N - 1), dtype=np.int8)
    eta = config.occupancy.copy()
    if flux is None:
        flux = np.zeros(4, dtype=np.int64)
    _kernels.record(eta, t * params.N**2, params.boundary_scale, params.alpha,
                    params.beta, as_generator(rng), flux, out)
    return out


def empirical_pairing(config, H: Callable) -> float:
    """``<pi^N, H> = (1/N) sum_x H(x/N) eta(x)``."""
    eta = config.occupancy if isinstance(config, Configuration) else np.asarray(config)
    N = eta.shape[-1] + 1
    h = profile_values(H, N)
    return float(eta @ h) / N


def drift_coefficients(params: ModelParams, H: Callable):
    """Affine form of ``N^2 L_N <pi, H>``: returns ``(hx, coef, const)``.

    ``N^2 L_N <pi, H>(eta) = const + coef @ eta`` with ``hx = H(x/N)``.
    """
    N = params.N
    hx = profile_values(H, N)
    coef = np.zeros(N - 1)
    coef[1:] += N * (hx[:-1] - hx[1:])
    coef[:-1] += N * (hx[1:] - hx[:-1])
    gain = N * params.boundary_scale
    coef[0] -= gain * hx[0]
    coef[-1] -= gain * hx[-1]
    const = gain * (params.alpha * hx[0] + params.beta * hx[-1])
    return hx, coef, const


def dynkin_martingale(params: ModelParams, H: Callable, t_grid, rng, gamma=0.5,
                      test_function_id: str | None = None,
                      config: Configuration | None = None) -> MartingaleSeries:
    """Dynkin martingale of ``<pi_t, H>`` along one trajectory.

    The trajectory starts from ``config`` or, if omitted, from a product
    Bernoulli(``gamma``) configuration drawn from ``rng``. A time 0 is
    prepended to ``t_grid`` when missing.
    """
    rng = as_generator(rng)
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or np.any(np.diff(t) <= 0) or t[0] < 0:
        raise ValueError("t_grid must be strictly increasing and non-negative")
    if t[0] > 0:
        t = np.concatenate([[0.0], t])
    if config is None:
        config = init_config(params, gamma, rng)
    _check(config, params)
    hx, coef, const = drift_coefficients(params, H)
    m = np.empty(t.size)
    qv = np.empty(t.size)
    _kernels.martingale_path(config.occupancy.copy(), t * params.N**2, params.N,
                             params.boundary_scale, params.alpha, params.beta,
                             hx, coef, const, rng, m, qv)
    return MartingaleSeries(t, m, test_function_id or getattr(H, "__name__", "H"), qv)


def quadratic_variation_bound(params: ModelParams, H: Callable, T: float, grid: int = 4097) -> float:
    """Bulk plus boundary bound ``T (||H'||^2 / N + 2 ||H||^2 N^-theta)`` on ``E <M>_T``.

    Sup norms are taken on a fine grid with ``H'`` by central differences.
    """
    u = np.linspace(0.0, 1.0, grid)
    h = np.asarray(H(u), dtype=float) * np.ones_like(u)
    dh = np.gradient(h, u, edge_order=2)
    return T * (np.max(dh**2) / params.N + 2.0 * np.max(h**2) * params.boundary_scale)
