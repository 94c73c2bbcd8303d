"""Heat equation on [0, 1] with Dirichlet, Robin or Neumann data.

Grid ``u_j = j/M``. Robin and Neumann ends are closed with ghost nodes
(second order); time stepping is Crank-Nicolson by default. Also holds the
integral operator inverting ``-d^2/du^2`` on Robin-compatible functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.sparse.linalg import splu

from .lattice import on_grid

DIRICHLET, ROBIN, NEUMANN = "dirichlet", "robin", "neumann"
BC_KINDS = (DIRICHLET, ROBIN, NEUMANN)
SCHEMES = ("crank-nicolson", "implicit")


def bc_for_theta(theta: float) -> str:
    if theta < 1:
        return DIRICHLET
    if theta == 1:
        return ROBIN
    return NEUMANN


def _bc(kind: str) -> str:
    k = str(kind).lower()
    if k not in BC_KINDS:
        raise ValueError(f"bc_kind must be one of {BC_KINDS}, got {kind!r}")
    return k


@dataclass
class GridField:
    """Snapshots ``values[k, j] = rho(times[k], j/M)``.

    ``initial`` is the initial profile sampled on the grid before Dirichlet
    data are imposed at the endpoints.
    """

    M: int
    dt: float
    times: np.ndarray
    values: np.ndarray
    bc_kind: str
    alpha: float
    beta: float
    initial: np.ndarray = field(default=None)
    scheme: str = "crank-nicolson"

    @property
    def u(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.M + 1)

    @property
    def h(self) -> float:
        return 1.0 / self.M

    def index(self, t: float, tol: float = 1e-9) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > tol * max(1.0, abs(t)):
            raise ValueError(f"t={t} is not a stored snapshot time")
        return k

    def at(self, t: float) -> np.ndarray:
        return self.values[self.index(t)]

    def mass(self) -> np.ndarray:
        """Trapezoid mass of every snapshot."""
        return trapezoid(self.values, dx=self.h, axis=1)


def heat_operator(bc_kind: str, alpha: float, beta: float, M: int):
    """Semi-discrete ``d rho/dt = L rho + g`` as a sparse ``L`` and a vector ``g``."""
    kind = _bc(bc_kind)
    h = 1.0 / M
    main = np.full(M + 1, -2.0)
    upper = np.ones(M)
    lower = np.ones(M)
    g = np.zeros(M + 1)
    if kind == DIRICHLET:
        main[0] = main[-1] = 0.0
        upper[0] = 0.0
        lower[-1] = 0.0
    else:
        # ghost nodes: rho_{-1} = rho_1 - 2h rho'(0), rho_{M+1} = rho_{M-1} + 2h rho'(1)
        upper[0] = 2.0
        lower[-1] = 2.0
        if kind == ROBIN:
            main[0] = main[-1] = -2.0 - 2.0 * h
            g[0] = 2.0 * alpha * h
            g[-1] = 2.0 * beta * h
    L = sp.diags([lower, main, upper], [-1, 0, 1], format="csc") / h**2
    return L, g / h**2


def solve_heat(bc_kind: str, gamma, alpha: float, beta: float, M: int,
               dt: float | None = None, T_final: float = 0.1, snapshot_every: int = 10,
               scheme: str = "crank-nicolson") -> GridField:
    """Integrate the heat equation up to ``T_final``.

    ``dt`` defaults to ``h^2/2``, which keeps Crank-Nicolson within its
    discrete maximum principle for all three closures. ``dt`` is shrunk so
    that ``T_final`` is hit exactly; the final state is always stored.
    """
    kind = _bc(bc_kind)
    if M < 8:
        raise ValueError("M must be >= 8")
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}")
    if T_final < 0:
        raise ValueError("T_final must be >= 0")
    u = np.linspace(0.0, 1.0, M + 1)
    rho0 = on_grid(gamma, u)
    if not np.all(np.isfinite(rho0)):
        raise ValueError("initial profile must be finite")
    h = 1.0 / M
    if dt is None:
        dt = 0.5 * h * h
    n_steps = max(1, int(np.ceil(T_final / dt - 1e-9))) if T_final > 0 else 0
    dt = T_final / n_steps if n_steps else dt
    L, g = heat_operator(kind, alpha, beta, M)
    eye = sp.identity(M + 1, format="csc")
    if scheme == "crank-nicolson":
        lhs = splu((eye - 0.5 * dt * L).tocsc())
        rhs_op = (eye + 0.5 * dt * L).tocsr()
    else:
        lhs = splu((eye - dt * L).tocsc())
        rhs_op = eye.tocsr()
    src = dt * g
    rho = rho0.copy()
    if kind == DIRICHLET:
        rho[0], rho[-1] = alpha, beta
    times = [0.0]
    snaps = [rho.copy()]
    for n in range(1, n_steps + 1):
        rho = lhs.solve(rhs_op @ rho + src)
        if n % snapshot_every == 0 or n == n_steps:
            times.append(n * dt)
            snaps.append(rho.copy())
    return GridField(M, dt, np.array(times), np.array(snaps), kind, alpha, beta, rho0, scheme)


def stationary_solution(bc_kind: str, alpha: float, beta: float) -> Callable:
    kind = _bc(bc_kind)
    d = beta - alpha
    if kind == DIRICHLET:
        return lambda u: d * np.asarray(u, dtype=float) + alpha
    if kind == ROBIN:
        return lambda u: d / 3.0 * np.asarray(u, dtype=float) + alpha + d / 3.0
    return lambda u: np.full(np.shape(u), (alpha + beta) / 2.0)


# --------------------------------------------------------------------------
# analytic decaying modes (used as oracles)


def robin_decay_rate() -> float:
    """Smallest ``lam > 0`` with ``tan(lam) = 2 lam / (lam^2 - 1)``."""
    from scipy.optimize import brentq
    return brentq(lambda x: (1 - x * x) * np.sin(x) + 2 * x * np.cos(x), 1.0, 2.0, xtol=1e-15)


def decaying_mode(bc_kind: str):
    """Exact solution ``(t, u) -> rho`` with zero boundary data for each closure."""
    kind = _bc(bc_kind)
    if kind == DIRICHLET:
        return lambda t, u: np.exp(-np.pi**2 * t) * np.sin(np.pi * u)
    if kind == NEUMANN:
        return lambda t, u: np.exp(-np.pi**2 * t) * np.cos(np.pi * u)
    lam = robin_decay_rate()
    return lambda t, u: np.exp(-lam * lam * t) * (lam * np.cos(lam * u) + np.sin(lam * u))


# --------------------------------------------------------------------------
# weak formulation


@dataclass(frozen=True)
class TestFunction:
    """Space-time test function with the derivatives the weak form needs."""

    value: Callable
    ds: Callable
    du: Callable
    duu: Callable
    name: str = "H"

    __test__ = False  # not a pytest class

    @classmethod
    def static(cls, f, df, d2f, name="H"):
        return cls(lambda s, u: f(u) * np.ones_like(u),
                   lambda s, u: np.zeros_like(u),
                   lambda s, u: df(u) * np.ones_like(u),
                   lambda s, u: d2f(u) * np.ones_like(u), name)

    @classmethod
    def separable(cls, a, da, f, df, d2f, name="H"):
        """``H(s, u) = a(s) f(u)``."""
        return cls(lambda s, u: a(s) * f(u) * np.ones_like(u),
                   lambda s, u: da(s) * f(u) * np.ones_like(u),
                   lambda s, u: a(s) * df(u) * np.ones_like(u),
                   lambda s, u: a(s) * d2f(u) * np.ones_like(u), name)


def weak_residual(field: GridField, H: TestFunction, t: float) -> float:
    """Left side minus right side of the weak formulation matching ``field.bc_kind``.

    Space integrals use the trapezoid rule on the grid, time integrals the
    trapezoid rule over stored snapshots up to ``t``.
    """
    k = field.index(t)
    u = field.u
    times = field.times[: k + 1]
    rho = field.values[: k + 1]
    hv = np.array([H.value(s, u) for s in times])
    if field.bc_kind == DIRICHLET:
        if np.max(np.abs(hv[:, [0, -1]])) > 1e-12:
            raise ValueError("Dirichlet test functions must vanish at u = 0 and u = 1")
    gen = np.array([H.ds(s, u) + H.duu(s, u) for s in times])
    dh = np.array([H.du(s, u) for s in times])
    lhs = trapezoid(rho[-1] * hv[-1], u) - trapezoid(field.initial * hv[0], u)
    bulk = trapezoid(rho * gen, u, axis=1)
    a, b = field.alpha, field.beta
    if field.bc_kind == DIRICHLET:
        edge = -(b * dh[:, -1] - a * dh[:, 0])
    elif field.bc_kind == ROBIN:
        edge = (rho[:, 0] * dh[:, 0] - rho[:, -1] * dh[:, -1]
                + hv[:, 0] * (a - rho[:, 0]) + hv[:, -1] * (b - rho[:, -1]))
    else:
        edge = -(rho[:, -1] * dh[:, -1] - rho[:, 0] * dh[:, 0])
    if k == 0:
        return float(lhs)
    rhs = trapezoid(bulk + edge, times)
    return float(lhs - rhs)


# --------------------------------------------------------------------------
# inverse Laplacian with Robin closure


def green_kernel(r, u):
    """``G(r, u) = (u+1)(2-r)/3 - (u-r) 1{r <= u}``."""
    r = np.asarray(r, dtype=float)
    u = np.asarray(u, dtype=float)
    return (u + 1.0) * (2.0 - r) / 3.0 - (u - r) * (r <= u)


@dataclass
class GreenOperator:
    """Kernel tabulated on ``u_j = j/M`` as ``kernel[i, j] = G(u_i, u_j)``."""

    M: int
    kernel: np.ndarray

    @classmethod
    def on_grid(cls, M: int) -> "GreenOperator":
        u = np.linspace(0.0, 1.0, M + 1)
        return cls(M, green_kernel(u[:, None], u[None, :]))

    def apply(self, g) -> np.ndarray:
        """Trapezoid quadrature of ``int G(r, u) g(r) dr``; kink at r=u falls on a node."""
        g = np.asarray(g, dtype=float)
        w = np.full(self.M + 1, 1.0 / self.M)
        w[[0, -1]] *= 0.5
        return (w * g) @ self.kernel


def robin_inverse_laplacian(g) -> np.ndarray:
    """``f(u) = int_0^1 G(r, u) g(r) dr`` for ``g`` on a uniform grid of [0, 1].

    Uses ``f(u) = (u+1)/3 int (2-r) g - u int_0^u g + int_0^u r g`` with
    cumulative trapezoid sums, so the split at ``r = u`` is exact per node.
    """
    g = np.asarray(g, dtype=float)
    if g.ndim != 1 or g.size < 2 or not np.all(np.isfinite(g)):
        raise ValueError("g must be a finite 1-d grid function")
    M = g.size - 1
    u = np.linspace(0.0, 1.0, M + 1)
    whole = trapezoid((2.0 - u) * g, u)
    cg = cumulative_trapezoid(g, u, initial=0.0)
    crg = cumulative_trapezoid(u * g, u, initial=0.0)
    return (u + 1.0) / 3.0 * whole - u * cg + crg


def robin_negative_laplacian(f) -> np.ndarray:
    """Second difference ``-f''`` with ghost closures ``f'(0) = f(0)``, ``f'(1) = -f(1)``."""
    f = np.asarray(f, dtype=float)
    M = f.size - 1
    h = 1.0 / M
    out = np.empty_like(f)
    out[1:-1] = -(f[:-2] - 2.0 * f[1:-1] + f[2:]) / h**2
    out[0] = -(2.0 * f[1] - 2.0 * f[0] - 2.0 * h * f[0]) / h**2
    out[-1] = -(2.0 * f[-2] - 2.0 * f[-1] - 2.0 * h * f[-1]) / h**2
    return out


def inner(f, g) -> float:
    """Trapezoid ``L^2[0,1]`` inner product of grid functions."""
    f = np.asarray(f, dtype=float)
    return float(trapezoid(f * np.asarray(g, dtype=float), dx=1.0 / (f.size - 1)))


@dataclass(frozen=True)
class MembershipReport:
    left_gap: float  # f'(0) - f(0)
    right_gap: float  # f'(1) + f(1)
    tol: float

    @property
    def passed(self) -> bool:
        return abs(self.left_gap) <= self.tol and abs(self.right_gap) <= self.tol


def check_H_membership(f, tol: float) -> MembershipReport:
    """Test ``f'(0) = f(0)`` and ``f'(1) = -f(1)`` with one-sided 3-point stencils."""
    f = np.asarray(f, dtype=float)
    M = f.size - 1
    if M < 8:
        raise ValueError("need a grid with M >= 8")
    h = 1.0 / M
    d0 = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
    d1 = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * h)
    return MembershipReport(float(d0 - f[0]), float(d1 + f[-1]), float(tol))


@dataclass(frozen=True)
class IdentityCheck:
    quad_form_t: float  # <rho_t, (-Lap)^-1 rho_t>
    quad_form_0: float
    lhs: float  # quad_form_t - quad_form_0
    rhs: float  # -2 int_0^t <rho_s, rho_s> ds
    gap: float


def uniqueness_identity_check(field: GridField, t: float) -> IdentityCheck:
    """Energy identity for Robin data ``alpha = beta = 0``.

    ``<rho_t, K rho_t> - <rho_0, K rho_0> = -2 int_0^t <rho_s, rho_s> ds`` with
    ``K`` the Robin inverse Laplacian.
    """
    if field.bc_kind != ROBIN or field.alpha != 0 or field.beta != 0:
        raise ValueError("identity check needs a Robin field with alpha = beta = 0")
    k = field.index(t)
    q_t = inner(field.values[k], robin_inverse_laplacian(field.values[k]))
    q_0 = inner(field.values[0], robin_inverse_laplacian(field.values[0]))
    sq = trapezoid(field.values[: k + 1] ** 2, dx=field.h, axis=1)
    rhs = -2.0 * trapezoid(sq, field.times[: k + 1]) if k > 0 else 0.0
    lhs = q_t - q_0
    return IdentityCheck(q_t, q_0, lhs, float(rhs), float(lhs - rhs))
