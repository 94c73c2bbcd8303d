import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from slowboundary import lattice
from slowboundary.lattice import BOND, LEFT, RIGHT, Configuration, ModelParams


# --------------------------------------------------------------------------
# parameter and configuration validation


@pytest.mark.parametrize("kw", [dict(N=2), dict(N=3.5), dict(alpha=0.0), dict(alpha=1.0),
                                dict(beta=1.5), dict(theta=-0.1), dict(theta=float("nan"))])
def test_model_params_rejects_out_of_range(kw):
    base = dict(N=10, alpha=0.2, beta=0.8, theta=1.0)
    base.update(kw)
    with pytest.raises(ValueError):
        ModelParams(**base)


def test_model_params_infinite_theta_switches_off_boundary():
    assert ModelParams(10, 0.2, 0.8, math.inf).boundary_scale == 0.0
    assert ModelParams(10, 0.2, 0.8, 1.0).boundary_scale == pytest.approx(0.1)


def test_configuration_validation():
    with pytest.raises(ValueError):
        Configuration(np.array([0, 2, 1]))
    with pytest.raises(ValueError):
        Configuration(np.array([0, 1]), micro_time=-1.0)
    c = Configuration(np.array([1, 0, 1]), 32.0)
    assert c.N == 4 and c.t_macro() == 2.0 and c.occupancy.dtype == np.int8


# --------------------------------------------------------------------------
# init_config


def test_init_config_degenerate_profiles(rng):
    p = ModelParams(50, 0.3, 0.7, 1.0)
    assert lattice.init_config(p, 1.0, rng).occupancy.all()
    assert not lattice.init_config(p, 0.0, rng).occupancy.any()
    assert lattice.init_config(p, lambda u: u * 0 + 1, rng).micro_time == 0.0


def test_init_config_rejects_values_outside_unit_interval(rng):
    p = ModelParams(10, 0.3, 0.7, 1.0)
    with pytest.raises(ValueError):
        lattice.init_config(p, 1.2, rng)
    with pytest.raises(ValueError):
        lattice.init_config(p, lambda u: u - 0.5, rng)


def test_init_config_binomial_concentration():
    # site average within 4 sd of 1/2 for at least 99% of seeds
    p = ModelParams(10_000, 0.3, 0.7, 1.0)
    tol = 4 * math.sqrt(0.25 / 9999)
    hits = [abs(lattice.init_config(p, 0.5, np.random.default_rng(s)).occupancy.mean() - 0.5) <= tol
            for s in range(200)]
    assert np.mean(hits) >= 0.99


# --------------------------------------------------------------------------
# rates and single steps


def test_rates_examples():
    p = ModelParams(4, 0.3, 0.6, 1.0)
    t = lattice.rates(Configuration(np.array([0, 1, 1])), p)
    assert t.left_flip_rate == pytest.approx(0.075)
    assert t.right_flip_rate == pytest.approx(0.4 / 4)
    assert t.total_rate == pytest.approx(2 + t.left_flip_rate + t.right_flip_rate)
    sym = ModelParams(4, 0.5, 0.5, 0.0)
    for eta1 in (0, 1):
        assert lattice.rates(Configuration(np.array([eta1, 0, 0])), sym).left_flip_rate == 0.5


def test_rates_rejects_size_mismatch():
    with pytest.raises(ValueError):
        lattice.rates(Configuration(np.zeros(5, dtype=int)), ModelParams(4, 0.3, 0.6, 1.0))


def test_bond_event_on_full_lattice_is_null():
    c = Configuration(np.ones(5, dtype=int))
    for x in range(1, 5):
        assert np.array_equal(lattice.apply_event(c, BOND, x).occupancy, c.occupancy)


def test_left_flip_fills_empty_site():
    c = Configuration(np.array([0, 1, 0]))
    assert lattice.apply_event(c, LEFT, 1).occupancy[0] == 1
    assert lattice.apply_event(c, RIGHT, 3).occupancy[2] == 1


def test_event_frequencies_match_rate_proportions(rng):
    p = ModelParams(6, 0.3, 0.9, 0.5)
    c = Configuration(np.array([0, 1, 0, 1, 1]))
    table = lattice.rates(c, p)
    probs = np.array([p.N - 2, table.left_flip_rate, table.right_flip_rate]) / table.total_rate
    n = 100_000
    counts = {BOND: 0, LEFT: 0, RIGHT: 0}
    for _ in range(n):
        kind, _, _ = lattice.sample_event(c, p, rng)
        counts[kind] += 1
    freq = np.array([counts[BOND], counts[LEFT], counts[RIGHT]]) / n
    se = np.sqrt(probs * (1 - probs) / n)
    assert np.all(np.abs(freq - probs) <= 4 * se)


def test_inter_event_times_are_exponential(rng):
    p = ModelParams(8, 0.3, 0.9, 1.0)
    c = Configuration(np.array([0, 1, 0, 1, 1, 0, 1]))
    total = lattice.rates(c, p).total_rate
    dts = np.array([lattice.step(c, p, rng)[1] for _ in range(10_000)])
    assert stats.kstest(dts, "expon", args=(0, 1 / total)).pvalue > 0.01


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=3, max_size=12), st.integers(0, 2**32 - 1))
def test_steps_preserve_occupancy_values_and_change_mass_only_at_boundary(bits, seed):
    p = ModelParams(len(bits) + 1, 0.4, 0.6, 0.5)
    c = Configuration(np.array(bits))
    rng = np.random.default_rng(seed)
    for _ in range(50):
        kind, where, dt = lattice.sample_event(c, p, rng)
        new = lattice.apply_event(c, kind, where, dt)
        assert set(np.unique(new.occupancy)) <= {0, 1}
        delta = new.particle_count() - c.particle_count()
        if kind == BOND:
            assert delta == 0
        else:
            assert abs(delta) == 1
        assert new.micro_time == pytest.approx(c.micro_time + dt)
        c = new


# --------------------------------------------------------------------------
# simulate_until / trajectory


def test_simulate_zero_time_is_identity(rng):
    p = ModelParams(10, 0.3, 0.7, 1.0)
    c = lattice.init_config(p, 0.5, rng)
    out = lattice.simulate_until(c, p, 0.0, rng)
    assert np.array_equal(out.occupancy, c.occupancy) and out.micro_time == c.micro_time


def test_simulate_advances_microscopic_clock(rng):
    p = ModelParams(10, 0.3, 0.7, 1.0)
    c = Configuration(np.zeros(9, dtype=int), 5.0)
    assert lattice.simulate_until(c, p, 0.25, rng).micro_time == pytest.approx(5.0 + 25.0)


def test_mass_conserved_without_reservoirs(rng):
    p = ModelParams(30, 0.3, 0.7, math.inf)
    c = lattice.init_config(p, 0.4, rng)
    flux = np.zeros(4, dtype=np.int64)
    out = lattice.simulate_until(c, p, 1.0, rng, flux)
    assert out.particle_count() == c.particle_count()
    assert not flux.any()


def test_flux_log_accounts_for_mass_change(rng):
    p = ModelParams(20, 0.1, 0.9, 0.0)
    c = lattice.init_config(p, 0.5, rng)
    flux = np.zeros(4, dtype=np.int64)
    out = lattice.simulate_until(c, p, 0.5, rng, flux)
    assert out.particle_count() - c.particle_count() == flux[0] - flux[1] + flux[2] - flux[3]
    assert flux.sum() > 0


def test_bernoulli_product_is_invariant_when_reservoirs_agree():
    rho0 = 0.3
    p = ModelParams(12, rho0, rho0, 1.0)
    R = 2000
    finals = np.empty((R, p.N - 1))
    for r in range(R):
        g = np.random.default_rng([7, r])
        c = lattice.init_config(p, rho0, g)
        finals[r] = lattice.simulate_until(c, p, 0.3, g).occupancy
    se = math.sqrt(rho0 * (1 - rho0) / R)
    assert np.all(np.abs(finals.mean(axis=0) - rho0) <= 4 * se)


def test_simulation_is_deterministic_given_seed():
    p = ModelParams(25, 0.2, 0.8, 1.0)
    runs = []
    for _ in range(2):
        g = np.random.default_rng(99)
        c = lattice.init_config(p, 0.5, g)
        runs.append(lattice.simulate_until(c, p, 0.7, g).occupancy)
    assert np.array_equal(*runs)


def test_trajectory_matches_repeated_simulation(rng):
    p = ModelParams(15, 0.2, 0.8, 1.0)
    c = lattice.init_config(p, 0.5, rng)
    snaps = lattice.trajectory(c, p, [0.0, 0.1, 0.1, 0.3], rng)
    assert snaps.shape == (4, 14)
    assert np.array_equal(snaps[0], c.occupancy)
    assert np.array_equal(snaps[1], snaps[2])
    with pytest.raises(ValueError):
        lattice.trajectory(c, p, [0.3, 0.1], rng)


# --------------------------------------------------------------------------
# pairings and the Dynkin martingale


def test_empirical_pairing_examples():
    assert lattice.empirical_pairing(Configuration(np.ones(3, dtype=int)), lambda u: 1.0) == 0.75
    assert lattice.empirical_pairing(Configuration(np.array([1, 0, 1])), lambda u: u) == 0.25
    assert lattice.empirical_pairing(Configuration(np.zeros(7, dtype=int)), np.cos) == 0.0


def _brute_force_drift(eta, p, H):
    """N^2 L_N <pi, H> by summing over every transition."""
    N = p.N
    s = p.boundary_scale

    def pair(e):
        return sum(H((x + 1) / N) * e[x] for x in range(N - 1)) / N

    base = pair(eta)
    total = 0.0
    for x in range(N - 2):
        e = eta.copy()
        e[x], e[x + 1] = e[x + 1], e[x]
        total += pair(e) - base
    for site, dens in ((0, p.alpha), (N - 2, p.beta)):
        e = eta.copy()
        rate = s * (dens if e[site] == 0 else 1 - dens)
        e[site] = 1 - e[site]
        total += rate * (pair(e) - base)
    return N**2 * total


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=3, max_size=10),
       st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0, 3))
def test_drift_coefficients_match_generator(bits, a, b, theta):
    p = ModelParams(len(bits) + 1, a, b, theta)
    H = lambda u: np.sin(2 * u) + u**2  # noqa: E731
    _, coef, const = lattice.drift_coefficients(p, H)
    eta = np.array(bits)
    assert const + coef @ eta == pytest.approx(_brute_force_drift(eta, p, H), rel=1e-10, abs=1e-10)


def test_martingale_vanishes_for_zero_test_function(rng):
    p = ModelParams(20, 0.2, 0.8, 1.0)
    s = lattice.dynkin_martingale(p, lambda u: 0 * u, [0.05, 0.1], rng)
    assert s.times[0] == 0 and np.all(s.values == 0)
    assert np.all(np.diff(s.times) > 0)


def test_martingale_starts_at_zero_and_rejects_bad_grid(rng):
    p = ModelParams(20, 0.2, 0.8, 1.0)
    s = lattice.dynkin_martingale(p, np.sin, [0.0, 0.1], rng, test_function_id="sin")
    assert s.values[0] == 0 and s.test_function_id == "sin"
    with pytest.raises(ValueError):
        lattice.dynkin_martingale(p, np.sin, [0.1, 0.05], rng)


def test_martingale_mean_zero_and_variance_matches_compensator():
    p = ModelParams(32, 0.2, 0.8, 1.0)
    H = lambda u: np.sin(np.pi * u)  # noqa: E731
    R = 1000
    mt = np.empty(R)
    qv = np.empty(R)
    for r, g in enumerate(np.random.default_rng(5).spawn(R)):
        s = lattice.dynkin_martingale(p, H, [0.1], g)
        mt[r], qv[r] = s.values[-1], s.quadratic_variation[-1]
    se = mt.std(ddof=1) / math.sqrt(R)
    assert abs(mt.mean()) <= 4 * se
    # E[M_T^2] = E[<M>_T]
    sq = mt**2
    se2 = math.hypot(sq.std(ddof=1), qv.std(ddof=1)) / math.sqrt(R)
    assert abs(sq.mean() - qv.mean()) <= 4 * se2
    assert mt.var(ddof=1) <= 2 * lattice.quadratic_variation_bound(p, H, 0.1)


def test_quadratic_variation_bound_formula():
    p = ModelParams(64, 0.2, 0.8, 1.0)
    got = lattice.quadratic_variation_bound(p, lambda u: np.sin(np.pi * u), 0.1)
    assert got == pytest.approx(0.1 * (np.pi**2 / 64 + 2 / 64), rel=1e-6)
