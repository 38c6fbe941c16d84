"""Desk-scale acceptance checks, one test per criterion.

Each test prints a single ``[PASS]``/``[FAIL]`` line with the measured numbers.
Run on their own with ``pytest -m acceptance -s``.
"""
import math
import time

import numpy as np
import pytest

from excursion_lab import GridSpec, Rect, sample_field
from excursion_lab.boundary_geom import interior_diameter_bound
from excursion_lab.experiments import ExperimentConfig, run_campaign, summarize
from excursion_lab.field_synth import numerical_autoconvolution
from excursion_lab.experiments.seeds import trial_seed

from oracles import star_polygon

pytestmark = pytest.mark.acceptance


def report(capsys, n, name, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n:>2} {name}: {detail}")


def test_01_kernel_identity(bf, capsys):
    t = time.perf_counter()
    r, conv = numerical_autoconvolution(bf, 0.02, 4.0)
    err = float(np.max(np.abs(conv - np.exp(-r * r / 2))))
    elapsed = time.perf_counter() - t
    ok = err <= 1e-3 and elapsed < 60
    report(capsys, 1, "kernel identity", ok, f"max |q*q - kappa| = {err:.2e} in {elapsed:.2f}s")
    assert ok


def test_02_field_law(bf, capsys):
    # the field is stationary, so node averages within a sample are pooled
    grid = GridSpec(0.05, Rect(0.0, 0.0, 6.0, 6.0), padding=5.0)
    lag = 20   # one unit of distance at pitch 0.05
    s2 = cx = 0.0
    n_var = n_cov = 0
    for t in range(2000):
        v = sample_field(bf, grid, trial_seed(2, t)).values
        s2 += float(np.sum(v * v))
        n_var += v.size
        cx += float(np.sum(v[:, :-lag] * v[:, lag:]) + np.sum(v[:-lag, :] * v[lag:, :]))
        n_cov += 2 * v[:, lag:].size
    var, cov = s2 / n_var, cx / n_cov
    ok = abs(var - 1.0) <= 0.05 and abs(cov - math.exp(-0.5)) <= 0.05
    report(capsys, 2, "field law", ok, f"variance {var:.4f}, lag-1 covariance {cov:.4f} (target 0.6065)")
    assert ok


def test_03_kac_rice_length(capsys):
    cfg = ExperimentConfig("KacRiceMoments", level=0.0, r_values=(0.5,), n_trials=2000,
                           pitch=0.02, measure_s=False, master_seed=3)
    t = time.perf_counter()
    s = summarize(run_campaign(cfg, write=False), cfg)
    elapsed = time.perf_counter() - t
    mean_l = s[0.5][("E_L", 1)]
    ok = abs(mean_l - 0.5) <= 0.03 and elapsed <= 600
    report(capsys, 3, "Kac-Rice length", ok,
           f"E[L] on unit square = {mean_l:.4f} over 2000 samples ({elapsed:.1f}s)")
    assert ok


def test_04_diameter_vs_boundary(capsys):
    cfg = ExperimentConfig("LemmaSweep", level=0.5, r_values=(1.0, 2.0, 4.0, 8.0), n_trials=80,
                           pitch=0.05, master_seed=4)
    recs = run_campaign(cfg, write=False)
    s = summarize(recs, cfg)
    ok = s["n_components"] >= 500 and s["violations"] == 0
    report(capsys, 4, "chemical diameter <= 2.2 boundary", ok,
           f"{s['n_components']} components, max ratio {s['max_ratio']:.3f}, "
           f"{s['violations']} violations, {s['with_holes']} with holes")
    assert ok


def test_05_polygon_diameter(capsys):
    rng = np.random.default_rng(5)
    worst, bad = 0.0, 0
    for _ in range(1000):
        check = interior_diameter_bound(star_polygon(rng))
        worst = max(worst, check.ratio)
        bad += not check.holds
    ok = bad == 0
    report(capsys, 5, "polygon diameter <= perimeter/2", ok,
           f"1000 polygons, max diam/perimeter {worst:.4f}, {bad} violations")
    assert ok


def test_06_s_statistic_chain(capsys):
    # subcritical level; see the informational line for level 0
    cfg = ExperimentConfig("SBMoments", level=-1.0, r_values=(2.0, 4.0, 8.0), n_trials=300,
                           pitch=0.1, diameter_cap=10 ** 6, master_seed=6)
    s = summarize(run_campaign(cfg, write=False), cfg)
    viol = sum(row["chain_violations"] for row in s.values())
    n = min(row["n_s"] for row in s.values())
    ratios = [row[("S_ratio", 2)] for row in s.values()]
    spread = max(ratios) / min(ratios)
    ok = viol == 0 and n >= 300 and spread < 3
    report(capsys, 6, "S(B) chain and moment ratio", ok,
           f"level -1: {viol} chain violations, E[S^2]/R^4 = "
           f"{', '.join(f'{r:.3f}' for r in ratios)} (spread {spread:.2f}x)")

    cfg0 = ExperimentConfig("SBMoments", level=0.0, r_values=(2.0, 8.0), n_trials=100,
                            pitch=0.1, diameter_cap=10 ** 6, master_seed=6)
    s0 = summarize(run_campaign(cfg0, write=False), cfg0)
    r0 = [row[("S_ratio", 2)] for row in s0.values()]
    with capsys.disabled():
        print(f"[INFO] criterion  6 at level 0: E[S^2]/R^4 spread R=2..8 is {r0[0] / r0[1]:.2f}x, "
              f"chain violations {sum(row['chain_violations'] for row in s0.values())}")
    assert ok


def test_07_critical_crossing(capsys):
    cfg = ExperimentConfig("CrossingScaling", level=0.0, aspect=1.0, lambda_values=(8.0,),
                           n_trials=2000, pitch=0.1, master_seed=7)
    s = summarize(run_campaign(cfg, write=False), cfg)
    p = s["rows"][8.0]["p"]
    ok = abs(p - 0.5) <= 0.05
    report(capsys, 7, "critical square crossing", ok, f"p = {p:.4f} over 2000 trials at lambda=8")
    assert ok


def test_08_supercritical_crossing(capsys):
    cfg = ExperimentConfig("CrossingScaling", level=0.5, aspect=2.0, lambda_values=(4.0, 8.0, 16.0),
                           n_trials=500, pitch=0.1, master_seed=8)
    s = summarize(run_campaign(cfg, write=False), cfg)
    ps = [row["p"] for row in s["rows"].values()]
    ok = s["p_non_decreasing"] and s["log_failure_slope"] < 0
    report(capsys, 8, "supercritical crossing trend", ok,
           f"p = {', '.join(f'{p:.3f}' for p in ps)}, slope of ln(1-p) = {s['log_failure_slope']:.4f}")
    assert ok


def test_09_concentration(capsys):
    cfg = ExperimentConfig("Concentration", epsilon_values=(0.4, 0.3, 0.2), s_values=(0.5,),
                           n_trials=1000, pitch=0.02, master_seed=9)
    s = summarize(run_campaign(cfg, write=False), cfg)
    logs = [s[("log_tail", 0.5)][e] for e in (0.4, 0.3, 0.2)]
    ok = all(math.isfinite(v) for v in logs) and logs[0] > logs[1] > logs[2]
    report(capsys, 9, "concentration trend", ok,
           "ln P[sup >= 0.5] at eps 0.4/0.3/0.2 = " + ", ".join(f"{v:.3f}" for v in logs))
    assert ok


CONNECTION = dict(campaign="Connection", level=1.0, delta=0.5, c1=3.0, x_values=(10.0, 20.0, 40.0),
                  n_trials=200, pitch=0.1, master_seed=10)


@pytest.fixture(scope="module")
def connection_csv(tmp_path_factory):
    out = tmp_path_factory.mktemp("conn") / "threads1.csv"
    cfg = ExperimentConfig(**CONNECTION, output_path=str(out))
    t = time.perf_counter()
    recs = run_campaign(cfg, threads=1)
    return cfg, recs, out, time.perf_counter() - t


def test_10_main_theorem_direction(connection_csv, capsys):
    cfg, recs, _, elapsed = connection_csv
    s = summarize(recs, cfg)
    fracs = [row["frac_exceeds_given_connected"] for row in s.values()]
    means = [row["mean_ratio_given_connected"] for row in s.values()]
    ok = (all(f <= 0.05 for f in fracs) and all(b <= a for a, b in zip(fracs, fracs[1:]))
          and all(m < 3 for m in means) and min(row["n"] for row in s.values()) >= 200
          and elapsed <= 3600)
    detail = "; ".join(f"x={x:g}: connected {row['n_connected']}/{row['n']}, "
                       f"exceed {row['frac_exceeds_given_connected']:.3f}, "
                       f"mean d/x {row['mean_ratio_given_connected']:.3f}"
                       for x, row in s.items())
    report(capsys, 10, "chemical vs Euclidean distance", ok, f"{detail} ({elapsed:.0f}s)")
    assert ok


def test_11_determinism(connection_csv, tmp_path, capsys):
    _, _, first, _ = connection_csv
    second = tmp_path / "threads3.csv"
    cfg = ExperimentConfig(**CONNECTION, output_path=str(second))
    run_campaign(cfg, threads=3)
    ok = first.read_bytes() == second.read_bytes()
    report(capsys, 11, "determinism across thread counts", ok,
           f"threads=1 vs threads=3 CSVs {'identical' if ok else 'differ'} "
           f"({len(first.read_bytes())} bytes)")
    assert ok
