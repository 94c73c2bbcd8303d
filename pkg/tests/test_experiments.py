import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slowboundary import experiments as ex, pde
from slowboundary.lattice import Configuration, ModelParams, init_config

FAMILY4 = {k: ex.DEFAULT_TEST_FUNCTIONS[k] for k in ("one", "u", "u2", "sin")}


# --------------------------------------------------------------------------
# coarse graining


def test_coarse_grain_examples():
    assert ex.coarse_grain_boundary(Configuration(np.ones(19, dtype=int)), 0.3) == (1.0, 1.0)
    eta = np.array([1, 0, 0, 1, 1, 0, 1, 0, 0])
    assert ex.coarse_grain_boundary(Configuration(eta), 0.1) == (1.0, 0.0)
    alt = Configuration(np.arange(19) % 2 == 0)
    assert ex.coarse_grain_boundary(alt, 0.2)[0] == 0.5


def test_coarse_grain_rejects_empty_window():
    with pytest.raises(ValueError):
        ex.coarse_grain_boundary(Configuration(np.ones(9, dtype=int)), 0.05)
    with pytest.raises(ValueError):
        ex.coarse_grain_boundary(Configuration(np.ones(9, dtype=int)), 1.5)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=4, max_size=40))
def test_full_window_gives_global_density(bits):
    eta = np.array(bits)
    _, avg, _ = ex.box_average(eta, len(bits))
    assert avg[0] == pytest.approx(eta.mean())
    assert ex.coarse_grain_boundary(Configuration(eta), 1.0) == (pytest.approx(eta.mean()),) * 2


def test_box_average_blocks():
    centres, avg, widths = ex.box_average(np.array([1, 1, 0, 0, 1]), 2)
    np.testing.assert_allclose(avg, [1, 0, 1])
    np.testing.assert_allclose(widths, [2 / 6, 2 / 6, 1 / 6])
    assert centres[0] == pytest.approx(1.5 / 6)
    assert ex.default_window(64) == 4 and ex.default_window(65) == 5


# --------------------------------------------------------------------------
# association statistic


def test_association_empty_profile():
    configs = np.zeros((20, 30), dtype=int)
    for delta in (1e-6, 0.05, 0.5):
        assert ex.association_statistic(configs, 0.0, FAMILY4, delta) == 0.0


def test_association_product_bernoulli_large_n():
    gamma = lambda u: 0.2 + 0.6 * u  # noqa: E731
    p = ModelParams(10_000, 0.2, 0.8, 1.0)
    gens = np.random.default_rng(3).spawn(200)
    configs = [init_config(p, gamma, g) for g in gens]
    assert ex.association_statistic(configs, gamma, FAMILY4, 0.05) <= 0.01


def test_association_rejects_empty_inputs():
    with pytest.raises(ValueError):
        ex.association_statistic(np.zeros((0, 5)), 0.5, FAMILY4, 0.05)
    with pytest.raises(ValueError):
        ex.association_statistic(np.zeros((3, 5)), 0.5, {}, 0.05)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.001, 0.3), st.floats(0.001, 0.3))
def test_association_monotone_in_delta(seed, d1, d2):
    rng = np.random.default_rng(seed)
    configs = (rng.random((40, 25)) < 0.4).astype(int)
    lo, hi = sorted((d1, d2))
    assert (ex.association_statistic(configs, 0.4, None, hi)
            <= ex.association_statistic(configs, 0.4, None, lo))


def test_profile_integral():
    assert ex.profile_integral(lambda u: u, 1.0) == pytest.approx(0.5)
    assert ex.profile_integral(np.sin, lambda u: 2.0) == pytest.approx(2 * (1 - math.cos(1)))


# --------------------------------------------------------------------------
# hydrostatic experiment


def _quiet(fn, *a, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return fn(*a, **kw)


def test_hydrostatic_equal_densities_pass():
    # 1000 macroscopic units: about 20 batch-means blocks per cell
    rep = _quiet(ex.hydrostatic_experiment, [16], [0.0, 1.0, 2.0], 0.4, 0.4, burn_in=2.0,
                 samples=400, spacing=2.5, seed=1)
    assert rep.experiment_id == "hydrostatic" and len(rep.rows) == 3
    for row in rep.rows:
        assert row["linf_exact_vs_limit"] == 0.0
        assert row["cov_exact"] == 0.0
        assert row["pass_z"]
        assert row["seed"] == 1


def test_hydrostatic_z_scores_theta1():
    rep = _quiet(ex.hydrostatic_experiment, [50], [1.0], 0.2, 0.8, burn_in=200.0, samples=500,
                 seed=8)
    assert rep.rows[0]["frac_sites_z_ok"] >= 0.95


def test_hydrostatic_exact_vs_limit_column_decreases():
    rep = _quiet(ex.hydrostatic_experiment, [25, 50, 100], [1.0], 0.2, 0.8, burn_in=0.5,
                 samples=4, spacing=0.1, seed=2)
    col = rep.column("linf_exact_vs_limit")
    assert col[0] > col[1] > col[2]


@pytest.fixture(scope="module")
def association_trend():
    return _quiet(ex.hydrostatic_experiment, [50, 100, 200], [1.0], 0.2, 0.8, burn_in=10.0,
                  samples=200, spacing=0.5, seed=21)


def test_association_statistic_falls_with_n(association_trend):
    probs = association_trend.column("assoc_prob")
    assert probs[0] > probs[1] > probs[2]


def test_association_stationary_samples_n200(association_trend):
    row = association_trend.rows[-1]
    assert row["N"] == 200
    assert row["assoc_prob"] <= 0.05


def test_hydrostatic_rows_replay_from_seed():
    kw = dict(burn_in=1.0, samples=20, spacing=0.2, seed=44)
    a = _quiet(ex.hydrostatic_experiment, [12, 16], [0.5, 2.0], 0.3, 0.6, **kw)
    row = a.rows[3]
    assert row["cell"] == 3 and row["seed"] == 44
    replay = _quiet(ex.hydrostatic_cell, ModelParams(16, 0.3, 0.6, 2.0), 1.0, 20, 0.2,
                    ex.stream(44, 3))
    assert all(replay[k] == row[k] for k in replay)


def test_hydrostatic_parallel_matches_serial():
    kw = dict(burn_in=1.0, samples=20, spacing=0.2, seed=5)
    a = _quiet(ex.hydrostatic_experiment, [12, 14], [0.0, 1.0], 0.3, 0.6, jobs=1, **kw)
    b = _quiet(ex.hydrostatic_experiment, [12, 14], [0.0, 1.0], 0.3, 0.6, jobs=3, **kw)
    assert a == b


def test_hydrostatic_propagates_ess_warning():
    with pytest.warns(RuntimeWarning, match="effective sample size"):
        ex.hydrostatic_experiment([10], [1.0], 0.3, 0.6, burn_in=0.5, samples=10, spacing=0.1, seed=0)


# --------------------------------------------------------------------------
# hydrodynamic experiment


def test_hydrodynamic_preconditions():
    with pytest.raises(ValueError):
        ex.hydrodynamic_experiment([16], [1.0], 0.2, 0.8, 0.5, [0.0], 50, seed=0)
    with pytest.raises(ValueError):
        ex.hydrodynamic_experiment([16], [1.0], 0.2, 0.8, 0.5, [0.1], 10, seed=0)


@pytest.mark.parametrize("theta", [0.5, 1.0, 2.0])
def test_hydrodynamic_stationary_start(theta):
    a, b = 0.3, 0.6
    bc = pde.bc_for_theta(theta)
    gamma = pde.stationary_solution(bc, a, b)
    rep = ex.hydrodynamic_experiment([64], [theta], a, b, gamma, [0.05, 0.1], 100, seed=4)
    for row in rep.rows:
        # one block of w sites averages w*R Bernoulli variables
        noise = 4 * math.sqrt(0.25 / (row["window"] * row["replicas"]))
        assert row["l1_annealed"] <= noise
        assert row["bc"] == bc


def test_hydrodynamic_flux_bookkeeping_theta2():
    rep = ex.hydrodynamic_experiment([32, 64], [2.0], 0.1, 0.9, 0.5, [0.25, 0.5], 60, seed=9)
    finals = [r for r in rep.rows if r["t"] == 0.5]
    for row in finals:
        assert row["flux_mismatch"] == 0
        assert row["pass_mass"]
        assert abs(row["mass_drift_mean"]) <= row["injection_bound"] + 4 * row["mass_drift_se"]


def test_hydrodynamic_dirichlet_uses_vanishing_test_functions_only():
    rep = ex.hydrodynamic_experiment([16], [0.0], 0.2, 0.8, 0.5, [0.05], 50, seed=1)
    pair_cols = [c for c in rep.columns if c.startswith("pair_")]
    assert pair_cols == ["pair_sin_diff", "pair_sin_se"]


def test_hydrodynamic_pairings_within_noise():
    rep = ex.hydrodynamic_experiment([64], [1.0], 0.1, 0.9, 0.5, [0.1], 200, seed=12)
    row = rep.rows[0]
    for name in ex.DEFAULT_TEST_FUNCTIONS:
        # pairing bias is O(1/N); allow it on top of the statistical error
        assert abs(row[f"pair_{name}_diff"]) <= 4 * row[f"pair_{name}_se"] + 2 / 64


def test_hydrodynamic_deterministic():
    kw = dict(replicas=50, seed=3)
    a = ex.hydrodynamic_experiment([16], [1.0], 0.2, 0.8, 0.5, [0.1], **kw)
    b = ex.hydrodynamic_experiment([16], [1.0], 0.2, 0.8, 0.5, [0.1], jobs=2, **kw)
    assert a == b


# --------------------------------------------------------------------------
# reports


def _small_report():
    return ex.hydrodynamic_experiment([16], [1.0, 2.0], 0.2, 0.8, 0.5, [0.05, 0.1], 50, seed=6)


def test_report_round_trip(tmp_path):
    rep = _small_report()
    ex.emit_report(rep, "json", tmp_path / "r.json")
    assert ex.load_report(tmp_path / "r.json") == rep
    ex.emit_report(rep, "csv", tmp_path / "r.csv")
    back = ex.load_report(tmp_path / "r.csv")
    assert back.columns == rep.columns and back.rows == rep.rows


def test_report_json_echoes_config_and_seed(tmp_path):
    rep = _small_report()
    ex.emit_report(rep, "json", tmp_path / "r.json")
    import json
    d = json.loads((tmp_path / "r.json").read_text())
    assert d["config"]["seed"] == 6 and d["config"]["replicas"] == 50
    assert all(r["seed"] == 6 for r in d["rows"])


def test_empty_report_is_header_only(tmp_path):
    rep = ex.ExperimentReport("hydrostatic", {}, list(ex.HYDROSTATIC_COLUMNS), [])
    ex.emit_report(rep, "csv", tmp_path / "e.csv")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines == [",".join(ex.HYDROSTATIC_COLUMNS)]


def test_identical_seeds_give_identical_bytes(tmp_path):
    for name in ("a.csv", "b.csv"):
        ex.emit_report(_small_report(), "csv", tmp_path / name)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_emit_report_errors(tmp_path):
    rep = _small_report()
    with pytest.raises(ValueError):
        ex.emit_report(rep, "xml", tmp_path / "r.xml")
    with pytest.raises(OSError, match="nope"):
        ex.emit_report(rep, "csv", tmp_path / "nope" / "r.csv")
