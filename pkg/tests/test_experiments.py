import dataclasses
import math

import numpy as np
import pytest

from excursion_lab import discretize, sample_field
from excursion_lab.errors import ConfigurationError
from excursion_lab.experiments import (
    Campaign, ExperimentConfig, ExperimentRecord, emit_report, parse_config, parse_report,
    run_campaign, summarize, trial_seed,
)
from excursion_lab.experiments.config import config_to_text, load_config
from excursion_lab.experiments.report import (
    COLUMNS, corrected_failure, records_to_csv, slope, wilson_interval,
)
from excursion_lab.experiments.runner import Runner, connection_epsilon, partial_path
from excursion_lab.field_synth import FieldSample, KernelSpec
from excursion_lab.global_structure import build_geometry

from oracles import heap_dijkstra


def constant_factory(c):
    def make(grid, seed):
        return FieldSample(grid, np.full(grid.shape, float(c)), seed)
    return make


# ------------------------------------------------------------------ config

def test_config_text_round_trip():
    cfg = ExperimentConfig(Campaign.CONNECTION, level=0.7, x_values=(5, 10), n_trials=3,
                           master_seed=9, pitch=0.1, epsilon_values=(0.2, 0.3))
    back = parse_config(config_to_text(cfg))
    assert back == cfg


def test_config_parse_comments_and_lists(tmp_path):
    text = """
    # sweep
    campaign = crossingscaling
    lambda_values = [4, 8,16]
    n_trials = 5   # small
    measure_s = no
    kernel = bargmann-fock;m=4
    """
    p = tmp_path / "c.cfg"
    p.write_text(text)
    cfg = load_config(p, master_seed=4)
    assert cfg.campaign is Campaign.CROSSING_SCALING
    assert cfg.lambda_values == (4.0, 8.0, 16.0)
    assert cfg.n_trials == 5 and not cfg.measure_s and cfg.master_seed == 4
    assert cfg.kernel.regularity_m == 4
    assert cfg.params() == cfg.lambda_values


@pytest.mark.parametrize("text", [
    "level = 1",                                    # no campaign
    "campaign = Connection\nfoo = 1",               # unknown key
    "campaign = Connection\nlevel 1",               # missing '='
    "campaign = Nope",
    "campaign = Concentration\nepsilon_values = 0.15",   # not a multiple of h = 0.1
    "campaign = KacRiceMoments\nk_max = 3",         # default m = 3 allows k <= 2
    "campaign = Connection\nx_values = 3",
    "campaign = Connection\nkernel = matern",
    "campaign = Connection\nmeasure_s = maybe",
])
def test_config_rejects(text):
    with pytest.raises(ConfigurationError):
        parse_config(text)


def test_config_missing_file(tmp_path):
    with pytest.raises(OSError, match="nope.cfg"):
        load_config(tmp_path / "nope.cfg")


def test_connection_epsilon_is_pitch_multiple():
    eps = connection_epsilon(10.0, 0.5, 0.1)
    assert eps == pytest.approx(0.4)       # ln(10)^-1 = 0.434
    assert connection_epsilon(1e40, 0.5, 0.1) == pytest.approx(0.1)


def test_trial_seeds_depend_on_master_and_trial():
    seeds = {trial_seed(m, t) for m in range(5) for t in range(50)}
    assert len(seeds) == 250
    assert trial_seed(3, 7) == trial_seed(3, 7)
    assert 0 <= trial_seed(3, 7) < 2 ** 64


# ------------------------------------------------------------------ report

def fake_records(campaign, n=4):
    cols = COLUMNS[campaign]
    rng = np.random.default_rng(0)
    return [ExperimentRecord(campaign, t, float(p), trial_seed(1, t),
                             {c: float(rng.normal()) for c in cols})
            for p in (2.0, 1.0) for t in range(n)]


@pytest.mark.parametrize("campaign", list(Campaign))
def test_report_round_trip(tmp_path, campaign):
    recs = fake_records(campaign)
    path = emit_report(recs, tmp_path / "r.csv", campaign=campaign)
    back = parse_report(path)
    assert back == sorted(recs, key=ExperimentRecord.sort_key)


def test_report_special_values_round_trip(tmp_path):
    rec = ExperimentRecord(Campaign.CONCENTRATION, 0, 0.5, 1, {"sup_diff": math.inf})
    back = parse_report(emit_report([rec], tmp_path / "r.csv"))
    assert math.isinf(back[0].observables["sup_diff"])


def test_empty_report_is_header_only(tmp_path):
    cfg = ExperimentConfig(Campaign.LEMMA_SWEEP, r_values=(1,), n_trials=0)
    path = emit_report([], tmp_path / "r.csv", cfg)
    assert path.read_text() == ("campaign,trial,param,seed,label,n_cells,n_holes,"
                                "boundary_length,diameter,ratio,holds,clipped\n")
    assert parse_config((tmp_path / "r.csv.meta").read_text()) == cfg
    assert parse_report(path) == []
    with pytest.raises(ValueError):
        emit_report([], tmp_path / "x.csv")


GOLDEN_HEADERS = {
    Campaign.CONNECTION: "connected,d_chem,euclid,ratio,threshold,exceeds,raw_ratio,epsilon,"
                         "g1,g2,sup_diff,lemma_path,aborted",
    Campaign.CROSSING_SCALING: "crossing,crossing_eps,epsilon,width,height",
    Campaign.CONCENTRATION: "sup_diff",
    Campaign.KAC_RICE_MOMENTS: "L_length,S_B,chain_bound,chain_holds,capped",
    Campaign.SB_MOMENTS: "L_length,S_B,chain_bound,chain_holds,capped",
    Campaign.LEMMA_SWEEP: "label,n_cells,n_holes,boundary_length,diameter,ratio,holds,clipped",
}


@pytest.mark.parametrize("campaign", list(Campaign))
def test_column_schema(campaign):
    header = records_to_csv([], campaign).strip()
    assert header == "campaign,trial,param,seed," + GOLDEN_HEADERS[campaign]


def test_report_write_error_names_path(tmp_path):
    with pytest.raises(OSError, match="missing"):
        emit_report(fake_records(Campaign.CONCENTRATION), tmp_path / "missing" / "r.csv")


def test_statistics_helpers():
    lo, hi = wilson_interval(0, 100)
    assert lo == 0.0 and 0.03 < hi < 0.04
    lo, hi = wilson_interval(50, 100)
    assert lo == pytest.approx(1 - hi)
    assert wilson_interval(0, 0) == (0.0, 1.0)
    assert slope([1, 2, 3], [5, 3, 1]) == pytest.approx(-2.0)
    assert corrected_failure(0, 99) == pytest.approx(0.005)


# ------------------------------------------------------------- campaigns

def test_crossing_all_open_field(tmp_path):
    cfg = ExperimentConfig(Campaign.CROSSING_SCALING, level=0.0, lambda_values=(1, 2),
                           epsilon_values=(0.2,), n_trials=4, output_path=str(tmp_path / "c.csv"))
    recs = run_campaign(cfg, field_factory=constant_factory(1.0))
    s = summarize(recs, cfg)
    for row in s["rows"].values():
        assert row["p"] == 1.0 and row["p_eps"] == 1.0 and row["one_minus_p"] == 0.0
    assert s["p_non_decreasing"]
    assert recs[0].observables["width"] == pytest.approx(2.0)


def test_connection_open_limit():
    cfg = ExperimentConfig(Campaign.CONNECTION, level=10.0, x_values=(5, 8), n_trials=3)
    recs = run_campaign(cfg, write=False)
    s = summarize(recs, cfg)
    for x, row in s.items():
        assert row["p_connected"] == 1.0
        assert row["mean_ratio_given_connected"] <= 1.1
        assert row["frac_exceeds_given_connected"] == 0.0
    assert all(r.observables["g1"] and r.observables["g2"] for r in recs)
    assert all(r.observables["lemma_path"] == 1 for r in recs)


def test_connection_empty_limit():
    cfg = ExperimentConfig(Campaign.CONNECTION, level=-10.0, x_values=(5,), n_trials=3)
    recs = run_campaign(cfg, write=False)
    assert summarize(recs, cfg)[5.0]["p_connected"] == 0.0
    assert all(math.isinf(r.observables["d_chem"]) for r in recs)
    assert all(r.observables["lemma_path"] == -1 for r in recs)


def test_connection_recomputed_from_stored_seeds():
    cfg = ExperimentConfig(Campaign.CONNECTION, level=1.0, x_values=(10,), n_trials=12,
                           master_seed=5)
    recs = run_campaign(cfg, write=False)
    kernel = cfg.kernel
    runner = Runner(cfg)
    geom = build_geometry(10.0, cfg.delta)
    grid = runner.grid_for(geom.H.expand(2 * geom.l))
    exceed = 0
    for r in recs:
        assert r.seed == trial_seed(5, r.trial)
        f = sample_field(kernel, grid, r.seed)
        bits = f.values >= -cfg.level
        a, b = grid.snap(0.0, 0.0), grid.snap(10.0, 0.0)
        if bits[a]:
            dist = heap_dijkstra(bits, grid.pitch, a).get(b, math.inf)
        else:
            dist = math.inf
        assert bool(r.observables["connected"]) == math.isfinite(dist)
        if math.isfinite(dist):
            assert r.observables["d_chem"] == pytest.approx(dist, abs=1e-9)
            exceed += dist > r.observables["threshold"]
    row = summarize(recs, cfg)[10.0]
    assert row["p_connected_and_exceeds"] == exceed / len(recs)
    lo, hi = row["wilson"]
    assert lo <= row["p_connected_and_exceeds"] <= hi


def test_connection_over_budget_aborts():
    cfg = ExperimentConfig(Campaign.CONNECTION, x_values=(5,), n_trials=2, memory_budget=100)
    recs = run_campaign(cfg, write=False)
    assert len(recs) == 2 and all(r.observables["aborted"] == 1 for r in recs)
    assert summarize(recs, cfg)[5.0]["n"] == 0


def test_lemma_sweep_all_open_square():
    R = 1.0
    cfg = ExperimentConfig(Campaign.LEMMA_SWEEP, level=0.0, r_values=(R,), n_trials=1)
    recs = run_campaign(cfg, field_factory=constant_factory(1.0), write=False)
    assert len(recs) == 1
    obs = recs[0].observables
    # the whole box: corner-to-corner octile diameter over the box perimeter
    assert obs["diameter"] == pytest.approx(2 * math.sqrt(2) * R)
    assert obs["boundary_length"] == pytest.approx(8 * R, rel=1e-6)
    assert obs["ratio"] == pytest.approx(math.sqrt(2) / 4, rel=1e-6)
    assert obs["clipped"] == 1 and obs["holds"] == 1


def test_lemma_sweep_empty_field():
    cfg = ExperimentConfig(Campaign.LEMMA_SWEEP, level=0.0, r_values=(1,), n_trials=3)
    recs = run_campaign(cfg, field_factory=constant_factory(-1.0), write=False)
    assert recs == []
    assert summarize(recs, cfg)["n_components"] == 0


def test_lemma_sweep_bf_components():
    cfg = ExperimentConfig(Campaign.LEMMA_SWEEP, level=0.5, r_values=(3,), n_trials=5)
    recs = run_campaign(cfg, write=False)
    s = summarize(recs, cfg)
    assert s["n_components"] > 5 and s["violations"] == 0


def test_concentration_at_grid_pitch_matches_brute_force():
    cfg = ExperimentConfig(Campaign.CONCENTRATION, epsilon_values=(0.1, 0.4), n_trials=3,
                           s_values=(1e-12, 0.5), pitch=0.1)
    recs = run_campaign(cfg, write=False)
    runner = Runner(cfg)
    for r in recs:
        grid = runner.grid_for(runner_extent(cfg))
        f = sample_field(cfg.kernel, grid, r.seed)
        fe = discretize(f, r.param)
        best = 0.0
        for i in range(grid.rows):
            for j in range(grid.cols):
                x, y = grid.node_xy(i, j)
                if x * x + y * y <= 1.0 + 1e-12:
                    best = max(best, abs(fe.values[i, j] - f.values[i, j]))
        assert r.observables["sup_diff"] == pytest.approx(best, abs=1e-12)
        if r.param == pytest.approx(0.1):
            # every node is its own eps-centre when eps equals the pitch
            assert r.observables["sup_diff"] < 1e-12
    table = summarize(recs, cfg)["table"]
    # s below every observed positive gap gives probability one
    assert table[0.4][1e-12] == 1.0


def runner_extent(cfg):
    from excursion_lab import Rect
    reach = 1.0 + max(cfg.epsilon_values)
    return Rect(-reach, -reach, reach, reach)


def test_kac_rice_zeroth_moment():
    cfg = ExperimentConfig(Campaign.KAC_RICE_MOMENTS, level=0.0, r_values=(0.5, 1.0), n_trials=4,
                           measure_s=False)
    recs = run_campaign(cfg, write=False)
    rows = summarize(recs, cfg)
    for row in rows.values():
        assert row[("E_L", 0)] == 1.0
        assert row["n_s"] == 0
    assert all(r.observables["S_B"] == -1 for r in recs)


def test_sb_moments_capped_rows_are_excluded():
    cfg = ExperimentConfig(Campaign.SB_MOMENTS, level=0.0, r_values=(2.0,), n_trials=3,
                           diameter_cap=10)
    recs = run_campaign(cfg, write=False)
    row = summarize(recs, cfg)[2.0]
    assert row["capped"] == 3 and row["n_s"] == 0
    assert all(r.observables["S_B"] > 0 for r in recs)


def test_sb_chain_holds_small_run():
    cfg = ExperimentConfig(Campaign.SB_MOMENTS, level=0.0, r_values=(1.0, 2.0), n_trials=5)
    recs = run_campaign(cfg, write=False)
    rows = summarize(recs, cfg)
    for R, row in rows.items():
        assert row["chain_violations"] == 0
        assert row[("S_ratio", 1)] == pytest.approx(row[("E_S", 1)] / R ** 2)


# --------------------------------------------------- determinism and resume

def small_crossing(tmp_path, **kw):
    base = dict(level=0.0, lambda_values=(1.0, 2.0), n_trials=6, master_seed=3, pitch=0.1,
                output_path=str(tmp_path / "out.csv"))
    base.update(kw)
    return ExperimentConfig(Campaign.CROSSING_SCALING, **base)


def test_seed_isolation(tmp_path):
    full = run_campaign(small_crossing(tmp_path), write=False)
    fewer = run_campaign(small_crossing(tmp_path, n_trials=4), write=False)
    index = {(r.param, r.trial): r for r in full}
    for r in fewer:
        assert index[r.param, r.trial] == r


def test_thread_count_does_not_change_output(tmp_path):
    cfg = small_crossing(tmp_path)
    run_campaign(cfg, threads=1, output_path=tmp_path / "a.csv")
    run_campaign(cfg, threads=4, output_path=tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_resume_reuses_finished_units(tmp_path):
    cfg = small_crossing(tmp_path)
    reference = run_campaign(cfg, output_path=tmp_path / "ref.csv")

    out = tmp_path / "out.csv"
    runner = Runner(cfg)
    units = runner.units()
    from excursion_lab.experiments.runner import _dump_unit
    # fake an interrupted run: half of the units logged, then a torn line
    with open(partial_path(out), "w") as fh:
        for u in units[:5]:
            fh.write(_dump_unit(u, runner.run_unit(u)))
        fh.write('{"unit": [1, ')

    calls = []

    def counting(grid, seed):
        calls.append(seed)
        return sample_field(cfg.kernel, grid, seed)

    records = run_campaign(cfg, resume=True, field_factory=counting)
    assert len(calls) == len(units) - 5
    assert records == reference
    assert out.read_bytes() == (tmp_path / "ref.csv").read_bytes()
    assert not partial_path(out).exists()


def test_fresh_run_discards_stale_partial(tmp_path):
    cfg = small_crossing(tmp_path)
    out = tmp_path / "out.csv"
    partial_path(out).write_text('{"unit": [0, 0], "records": []}\n')
    recs = run_campaign(cfg)
    assert len(recs) == 12


def test_records_carry_derived_seeds(tmp_path):
    recs = run_campaign(small_crossing(tmp_path), write=False)
    assert all(r.seed == trial_seed(3, r.trial) for r in recs)
    # common random numbers: the same trial uses one seed for every parameter
    assert len({r.seed for r in recs}) == 6


def test_config_must_allow_k_max():
    kernel = KernelSpec.bargmann_fock(regularity_m=5)
    cfg = ExperimentConfig(Campaign.KAC_RICE_MOMENTS, kernel=kernel, k_max=4)
    assert dataclasses.replace(cfg, k_max=1).k_max == 1
