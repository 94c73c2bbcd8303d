"""Compiled inner loops.

Everything here works on raw arrays and scalars in microscopic time. Sites
are stored zero-based: ``eta[0]`` is site 1 and ``eta[n - 1]`` is site N-1.
"""

import numpy as np
from numba import njit

# flux counter slots
LEFT_IN, LEFT_OUT, RIGHT_IN, RIGHT_OUT = 0, 1, 2, 3


@njit(nogil=True, cache=False)
def advance(eta, t, t_end, bdy, alpha, beta, rng, flux):
    """Run the null-event Gillespie loop from ``t`` up to ``t_end``.

    Returns the number of clock rings executed (null swaps included).
    """
    n = eta.shape[0]
    nb = n - 1
    events = 0
    while True:
        r_left = bdy * (alpha if eta[0] == 0 else 1.0 - alpha)
        r_right = bdy * (beta if eta[n - 1] == 0 else 1.0 - beta)
        total = nb + r_left + r_right
        t += rng.exponential(1.0 / total)
        if t > t_end:
            return events
        events += 1
        u = rng.random() * total
        if u < nb:
            x = int(u)
            if x >= nb:
                x = nb - 1
            a = eta[x]
            eta[x] = eta[x + 1]
            eta[x + 1] = a
        elif u < nb + r_left:
            if eta[0] == 0:
                eta[0] = 1
                flux[LEFT_IN] += 1
            else:
                eta[0] = 0
                flux[LEFT_OUT] += 1
        else:
            if eta[n - 1] == 0:
                eta[n - 1] = 1
                flux[RIGHT_IN] += 1
            else:
                eta[n - 1] = 0
                flux[RIGHT_OUT] += 1


@njit(nogil=True, cache=False)
def record(eta, t_micro, bdy, alpha, beta, rng, flux, out):
    """Advance through the sorted times ``t_micro`` storing ``eta`` in ``out`` rows."""
    t = 0.0
    for k in range(t_micro.shape[0]):
        if t_micro[k] > t:
            advance(eta, t, t_micro[k], bdy, alpha, beta, rng, flux)
            t = t_micro[k]
        out[k, :] = eta


@njit(nogil=True, cache=False)
def _bond_qv(eta, hdiff2, x):
    d = eta[x] - eta[x + 1]
    return d * d * hdiff2[x]


@njit(nogil=True, cache=False)
def martingale_path(eta, t_micro, N, bdy, alpha, beta, hx, coef, const, rng,
                    out_m, out_qv):
    """Dynkin martingale and its predictable quadratic variation along one path.

    ``hx[i] = H((i+1)/N)``; ``coef``/``const`` encode the drift
    ``N^2 L_N <pi, H>`` as an affine function of ``eta``. Both integrals are
    accumulated exactly since the integrands are constant between events.
    """
    n = eta.shape[0]
    nb = n - 1
    hdiff2 = np.empty(nb)
    for x in range(nb):
        hdiff2[x] = (hx[x + 1] - hx[x]) ** 2
    f = 0.0
    drift = const
    bulk_qv = 0.0
    for x in range(n):
        f += hx[x] * eta[x]
        drift += coef[x] * eta[x]
    for x in range(nb):
        bulk_qv += _bond_qv(eta, hdiff2, x)
    f0 = f
    n2 = float(N) * float(N)
    comp = 0.0
    qv = 0.0
    t = 0.0
    for k in range(t_micro.shape[0]):
        t_end = t_micro[k]
        while True:
            r_left = bdy * (alpha if eta[0] == 0 else 1.0 - alpha)
            r_right = bdy * (beta if eta[n - 1] == 0 else 1.0 - beta)
            total = nb + r_left + r_right
            dt = rng.exponential(1.0 / total)
            q_rate = bulk_qv + (r_left * hx[0] ** 2 + r_right * hx[n - 1] ** 2)
            if t + dt > t_end:
                span = (t_end - t) / n2
                comp += drift * span
                qv += q_rate * span
                t = t_end
                break
            comp += drift * dt / n2
            qv += q_rate * dt / n2
            t += dt
            u = rng.random() * total
            if u < nb:
                x = int(u)
                if x >= nb:
                    x = nb - 1
                if eta[x] == eta[x + 1]:
                    continue
                lo = max(x - 1, 0)
                hi = min(x + 1, nb - 1)
                for b in range(lo, hi + 1):
                    bulk_qv -= _bond_qv(eta, hdiff2, b)
                a = eta[x]
                eta[x] = eta[x + 1]
                eta[x + 1] = a
                for b in range(lo, hi + 1):
                    bulk_qv += _bond_qv(eta, hdiff2, b)
                s = eta[x] - eta[x + 1]
                f += (hx[x] - hx[x + 1]) * s
                drift += (coef[x] - coef[x + 1]) * s
            else:
                site = 0 if u < nb + r_left else n - 1
                b = 0 if site == 0 else nb - 1
                bulk_qv -= _bond_qv(eta, hdiff2, b)
                s = 1 - 2 * eta[site]
                eta[site] = 1 - eta[site]
                bulk_qv += _bond_qv(eta, hdiff2, b)
                f += hx[site] * s
                drift += coef[site] * s
        out_m[k] = (f - f0) / N - comp
        out_qv[k] = qv


@njit(nogil=True, cache=False)
def triangle_walk(x, y, N, bdy, rng, max_steps):
    """Walk with conductances c_theta on V from (x, y) until absorption.

    Returns ``(time on the diagonal, steps)``; ``steps == -1`` signals the
    step limit was hit (or a state with no exit rate).
    """
    d = 0.0
    steps = 0
    while True:
        r_l = bdy if x == 1 else 1.0
        r_r = 1.0 if x + 1 < y else 0.0
        r_d = 1.0 if y - 1 > x else 0.0
        r_u = bdy if y + 1 == N else 1.0
        q = r_l + r_r + r_d + r_u
        if q <= 0.0:
            return d, -1
        if y == x + 1:
            d += rng.exponential(1.0 / q)
        u = rng.random() * q
        steps += 1
        if u < r_l:
            if x == 1:
                return d, steps
            x -= 1
        elif u < r_l + r_r:
            x += 1
        elif u < r_l + r_r + r_d:
            y -= 1
        else:
            if y + 1 == N:
                return d, steps
            y += 1
        if steps >= max_steps:
            return d, -1


@njit(nogil=True, cache=False)
def layered_walk(x, y, N, bdy, rng, max_steps):
    """Layered coupling walk: unit-rate walk, coin flip on every attempt to exit.

    Returns ``(per-level diagonal times, level count, steps)``.
    """
    levels = np.zeros(16)
    level = 0
    steps = 0
    while True:
        r_r = 1.0 if x + 1 < y else 0.0
        r_d = 1.0 if y - 1 > x else 0.0
        q = 2.0 + r_r + r_d
        if y == x + 1:
            levels[level] += rng.exponential(1.0 / q)
        u = rng.random() * q
        steps += 1
        exit_try = False
        if u < 1.0:
            if x == 1:
                exit_try = True
            else:
                x -= 1
        elif u < 1.0 + r_r:
            x += 1
        elif u < 1.0 + r_r + r_d:
            y -= 1
        else:
            if y + 1 == N:
                exit_try = True
            else:
                y += 1
        if exit_try:
            if rng.random() < bdy:
                return levels[:level + 1].copy(), level + 1, steps
            level += 1
            if level >= levels.shape[0]:
                grown = np.zeros(2 * levels.shape[0])
                grown[:levels.shape[0]] = levels
                levels = grown
        if steps >= max_steps:
            return levels[:level + 1].copy(), level + 1, -1


@njit(nogil=True, cache=False)
def triangle_walk_batch(x, y, N, bdy, rng, n, max_steps, out):
    for i in range(n):
        d, steps = triangle_walk(x, y, N, bdy, rng, max_steps)
        if steps < 0:
            return i
        out[i] = d
    return n


@njit(nogil=True, cache=False)
def layered_walk_batch(x, y, N, bdy, rng, n, max_steps, out_d, out_y):
    for i in range(n):
        levels, count, steps = layered_walk(x, y, N, bdy, rng, max_steps)
        if steps < 0:
            return i
        out_d[i] = levels.sum()
        out_y[i] = count
    return n
