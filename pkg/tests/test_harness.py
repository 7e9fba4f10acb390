import json
import math
import os

import numpy as np
import pytest
from scipy.special import ndtr, ndtri

from blockee.harness.config import ExperimentConfig, parse_config
from blockee.harness.experiments import (BudgetExceeded, OP_BUDGET, estimate_ops, expected_periodogram,
                                         expected_power, run_experiment, run_row)
from blockee.harness.persist import read_result, result_json, write_result
from blockee.harness.stats import (ks_distance, ks_two_sample, moderate_deviation_stat,
                                   moment_diagnostic_hs)
from blockee.procgen import LinearProcessSpec, ValidationError, derive_truth, linear_paths
from blockee.rng import stream


# -- stats ----------------------------------------------------------------------

def test_ks_grid_and_single_point():
    R = 200
    grid = ndtri(np.arange(1, R + 1) / (R + 1))
    assert ks_distance(grid, ndtr) <= 1 / (R + 1) + 1e-12
    assert ks_distance([0.0], ndtr) == pytest.approx(0.5)
    with pytest.raises(ValidationError):
        ks_distance([], ndtr)


def test_ks_normal_draws_below_kolmogorov_bound():
    x = stream(3).standard_normal(10 ** 4)
    assert ks_distance(x, ndtr) < 1.63 / 100


def test_ks_matches_dense_brute_force():
    rng = np.random.default_rng(4)
    for _ in range(30):
        R = int(rng.integers(1, 100))
        x = rng.normal(size=R)
        # sup over points just left/right of each jump plus a dense grid
        xs = np.sort(x)
        pts = np.concatenate([xs, xs - 1e-13, np.linspace(-6, 6, 4001)])
        ecdf = np.array([np.mean(x <= p) for p in pts])
        brute = np.max(np.abs(ecdf - ndtr(pts)))
        assert ks_distance(x, ndtr) == pytest.approx(brute, abs=1e-12)


def test_ks_two_sample_brute_force():
    rng = np.random.default_rng(5)
    a, b = rng.normal(size=37), rng.normal(0.3, size=53)
    pts = np.concatenate([a, b])
    brute = max(abs(np.mean(a <= p) - np.mean(b <= p)) for p in pts)
    assert ks_two_sample(a, b) == pytest.approx(brute, abs=1e-15)
    assert ks_two_sample(a, a) == 0.0


def test_moderate_deviation_stat_cases():
    assert moderate_deviation_stat(np.zeros(10), 3, 1.0, 100) == 0.0
    c = 10.0
    assert moderate_deviation_stat(np.full(5, c), 3, 1.0, 100) == pytest.approx(1 + c ** 2)
    assert moderate_deviation_stat(np.full(5, c), 5, 1.0, 100) == pytest.approx(1 + c ** 4)
    v = np.array([[3.0, 4.0], [0.0, 0.1]])
    thr = math.sqrt(1 * 1.0 * math.log(100))
    assert 5 > thr
    assert moderate_deviation_stat(v, 3, 1.0, 100) == pytest.approx((1 + 25) / 2)
    with pytest.raises(ValidationError):
        moderate_deviation_stat(v, 2, 1.0, 100)
    with pytest.raises(ValidationError):
        moderate_deviation_stat(v, 3, 0.0, 100)


def test_moderate_deviation_iid_decreasing():
    meds = []
    for n in (500, 2000, 8000):
        vals = []
        for g in range(5):
            x = linear_paths(LinearProcessSpec((1.0,)), n, stream(40, n, g), 4000)
            vals.append(moderate_deviation_stat(x.sum(axis=1) / math.sqrt(n), 3, 1.5, n))
        meds.append(np.median(vals))
    assert meds[0] > meds[1] > meds[2]


def test_hs_diagnostic():
    assert moment_diagnostic_hs(np.zeros(4), 3) == 0.0
    assert moment_diagnostic_hs([1.0], 3) == pytest.approx(math.log(2) ** 18)
    u = np.linspace(0, 5, 200)
    h = np.array([moment_diagnostic_hs([v], 4) for v in u])
    assert np.all(np.diff(h) >= 0)


# -- config ---------------------------------------------------------------------

def test_config_round_trip_and_comments():
    text = """
    # an ee run
    kind = ee
    coeffs = 1, -0.5   # MA(1)
    innov = exponential
    n_ladder = 1000, 3375, 8000
    replicates = 50
    """
    cfg = parse_config(text)
    assert cfg.coeffs == (1.0, -0.5) and cfg.n_ladder == (1000, 3375, 8000)
    assert parse_config(cfg.to_text()) == cfg
    assert cfg.digest() == parse_config(cfg.to_text()).digest()
    assert [cfg.block_length(i) for i in range(3)] == [10, 15, 20]


@pytest.mark.parametrize("text", ["bogus = 1", "kind = ee\nkind = ee", "n_ladder = 10, 5",
                                  "replicates = 0", "kind = nope", "replicates = x", "kind"])
def test_config_rejects(text):
    with pytest.raises(ValidationError):
        parse_config(text)


def test_block_rules():
    cfg = ExperimentConfig(n_ladder=(8000, 20000), block_rule="fifth_root", block_const=3.0)
    assert [cfg.block_length(i) for i in range(2)] == [math.ceil(3 * 8000 ** 0.2), math.ceil(3 * 20000 ** 0.2)]
    cfg = ExperimentConfig(kind="soc", n_ladder=(8000, 20000), block_rule="explicit", block_list=(21, 21),
                           ell1_rule="divisor", ell1_const=4.0, ell1_exponent=0.1)
    for i, n in enumerate(cfg.n_ladder):
        l1 = cfg.bobb_length(i)
        assert (n - 21 + 1) % l1 == 0 and l1 > 21


# -- population constants ------------------------------------------------------

def test_expected_power_and_periodogram_by_simulation():
    spec = LinearProcessSpec((1.0, 0.5))
    t = derive_truth(spec)
    ell = 6
    assert expected_power(derive_truth(LinearProcessSpec((1.0,))), ell, 2) == pytest.approx(1.0)
    x = linear_paths(spec, 2000, stream(6), 200)
    from blockee.blocks import periodogram_values, scaled_block_sums
    u2 = (scaled_block_sums(x, ell) ** 2).mean()
    assert u2 == pytest.approx(expected_power(t, ell, 2), rel=0.02)
    y = periodogram_values(x, ell, math.pi / 2).mean()
    assert y == pytest.approx(expected_periodogram(t, ell, math.pi / 2), rel=0.02)


# -- experiments ----------------------------------------------------------------

def _ee_cfg(**kw):
    base = dict(kind="ee", coeffs=(1.0, -0.5), innov="exponential", n_ladder=(125, 343),
                replicates=300, seed_groups=2, master_seed=5)
    base.update(kw)
    return ExperimentConfig(**base)


def test_ee_experiment_rows_and_bounds():
    res = run_experiment(_ee_cfg())
    assert len(res.rows) == 2 * 2
    for r in res.rows:
        assert 0 <= r["ks_normal"] <= 1 and 0 <= r["ks_ee"] <= 1
        assert r["seed_outer"] > 0
    assert set(res.summary["per_n"]) == {"125", "343"}
    assert "limitation" in res.metadata


def test_ee_degenerate_corrections_collapse_to_normal():
    res = run_experiment(_ee_cfg(coeffs=(1.0,), innov="normal"))
    for r in res.rows:
        assert r["ks_ee"] == pytest.approx(r["ks_normal"], abs=1e-12)


def test_ee_rejects_non_dividing_block_unless_dropping():
    with pytest.raises(ValidationError):
        run_experiment(_ee_cfg(n_ladder=(130,)))
    res = run_experiment(_ee_cfg(n_ladder=(130,), nbb_incomplete="drop", seed_groups=1))
    assert len(res.rows) == 1


def test_row_reproduces_in_isolation():
    cfg = _ee_cfg()
    res = run_experiment(cfg)
    assert run_row(cfg, 1, 1) == res.rows[3]


def _soc_cfg(**kw):
    base = dict(kind="soc", statistic="studentized-periodogram", coeffs=(1.0, 0.5),
                n_ladder=(400, 1204), block_rule="explicit", block_list=(5, 5), ell1_list=(12, 30),
                replicates=200, boot_replicates=200, seed_groups=2, master_seed=3)
    base.update(kw)
    return ExperimentConfig(**base)


def test_soc_rejects_non_dividing_ell1_before_simulating(monkeypatch):
    import blockee.harness.experiments as ex
    monkeypatch.setattr(ex, "paths", lambda *a, **k: pytest.fail("simulated before validation"))
    with pytest.raises(ValidationError):
        run_experiment(_soc_cfg(ell1_list=(13, 30)))


def test_soc_rejects_bad_rules():
    with pytest.raises(ValidationError):
        run_experiment(_soc_cfg(ell1_list=(12, 12)))  # ratio must grow
    with pytest.raises(ValidationError):
        run_experiment(_soc_cfg(block_list=(40, 40), ell1_list=(361, 1165)))  # ell above kappa_inv n^(1/5)


def test_soc_experiment_runs():
    res = run_experiment(_soc_cfg())
    assert len(res.rows) == 4
    for r in res.rows:
        assert 0 <= r["ks_boot"] <= 1 and r["sqrt_b_ks_boot"] >= 0
    # the outer law is shared across groups at each n
    assert res.rows[0]["ks_normal"] == res.rows[1]["ks_normal"]
    assert run_row(_soc_cfg(), 1, 0) == res.rows[2]


def test_tail_experiments_run():
    cfg = ExperimentConfig(kind="mbbmom", n_ladder=(125, 512), replicates=300, s=3, seed_groups=2,
                           pilot_replicates=300, master_seed=2)
    res = run_experiment(cfg)
    assert res.metadata["center_source"] == ["analytic", "analytic"]
    assert res.metadata["deviation_scale_source"] == "pilot"
    assert all(r["md_stat"] >= 0 and r["hs_diag"] >= 0 for r in res.rows)
    cor = cfg.replace(variant="variance", side_replicates=300)
    res = run_experiment(cor)
    assert res.metadata["center_source"] == ["side-mc", "side-mc"]
    m = ExperimentConfig(kind="mdev", component="joint", n_ladder=(125, 512), replicates=300, s=3,
                         seed_groups=1, pilot_replicates=300)
    assert len(run_experiment(m).rows) == 2
    a = ExperimentConfig(kind="mdev", component="s1", lam_base="analytic", n_ladder=(125,),
                         replicates=100, s=3, seed_groups=1)
    assert run_experiment(a).metadata["deviation_scale"] == 1.0


def test_budget_guard():
    big = _ee_cfg(n_ladder=(10 ** 6,), replicates=10 ** 5, seed_groups=5, block_rule="explicit",
                  block_list=(100,))
    assert estimate_ops(big) > OP_BUDGET
    with pytest.raises(BudgetExceeded):
        run_experiment(big)


def test_persisted_result_is_bit_identical(tmp_path):
    cfg = _ee_cfg()
    a, b = tmp_path / "a", tmp_path / "b"
    write_result(run_experiment(cfg), cfg, str(a))
    again = parse_config((a / "config.copy").read_text())
    write_result(run_experiment(again), again, str(b))
    assert (a / "result.json").read_bytes() == (b / "result.json").read_bytes()
    assert sorted(os.listdir(a)) == ["config.copy", "result.json", "rows.csv", "timing.json"]
    rows = (a / "rows.csv").read_text().splitlines()
    assert len(rows) == 1 + 4 and "wall_time_s" in rows[0]
    assert read_result(str(a))["config_hash"] == cfg.digest()
    json.loads(result_json(run_experiment(cfg)))
