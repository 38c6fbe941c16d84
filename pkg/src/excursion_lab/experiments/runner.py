"""Monte Carlo campaign runner.

A campaign is split into independent units, one per (parameter, trial) pair
(the concentration campaign uses one unit per trial and evaluates every eps on
the same field). Each trial's seed depends only on the master seed and the
trial index, so units may run in any order on any number of threads.
"""
from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ..boundary_geom import analyze_components, level_set_length
from ..chem_dist import DiameterMode, chemical_distance, s_statistic
from ..errors import CapExceeded
from ..excursion import Direction, crosses, excursion_mask, label_components
from ..field_synth import FieldSample, discretize, sample_field
from ..geometry import GridSpec, Rect
from ..global_structure import build_geometry, detect_structure, lemma_path_exists
from .config import Campaign, ExperimentConfig
from .report import ExperimentRecord, emit_report
from .seeds import trial_seed

log = logging.getLogger(__name__)

FieldFactory = Callable[[GridSpec, int], FieldSample]

# per-sample slack allowed on the S(B) chain inequality
CHAIN_SLACK = 0.10


def connection_epsilon(x: float, delta: float, pitch: float) -> float:
    """(ln x)^-(1/2 + delta) rounded to a multiple of the pitch (at least one pitch)."""
    raw = math.log(x) ** -(0.5 + delta)
    return max(1, round(raw / pitch)) * pitch


def padded_nodes(grid: GridSpec) -> int:
    margin = int(math.ceil(grid.padding / grid.pitch - 1e-9))
    return (grid.rows + 2 * margin) * (grid.cols + 2 * margin)


class Runner:
    def __init__(self, config: ExperimentConfig, field_factory: Optional[FieldFactory] = None):
        self.config = config
        if field_factory is None:
            kernel = config.kernel

            def field_factory(grid, seed):
                return sample_field(kernel, grid, seed)
        self.field_factory = field_factory

    def grid_for(self, rect: Rect) -> GridSpec:
        c = self.config
        return GridSpec.aligned(rect, c.pitch, padding=c.kernel.truncation_radius)

    # -------------------------------------------------------------- units

    def units(self) -> list[tuple[int, int]]:
        c = self.config
        if c.campaign is Campaign.CONCENTRATION:
            return [(0, t) for t in range(c.n_trials)] if c.epsilon_values else []
        return [(p, t) for p in range(len(c.params())) for t in range(c.n_trials)]

    def run_unit(self, unit: tuple[int, int]) -> list[ExperimentRecord]:
        p_idx, trial = unit
        seed = trial_seed(self.config.master_seed, trial)
        camp = self.config.campaign
        if camp is Campaign.CONCENTRATION:
            return self.concentration_trial(trial, seed)
        param = self.config.params()[p_idx]
        fn = {
            Campaign.CONNECTION: self.connection_trial,
            Campaign.CROSSING_SCALING: self.crossing_trial,
            Campaign.KAC_RICE_MOMENTS: self.moments_trial,
            Campaign.SB_MOMENTS: self.moments_trial,
            Campaign.LEMMA_SWEEP: self.lemma_trial,
        }[camp]
        return fn(param, trial, seed)

    def _record(self, trial, param, seed, **obs) -> ExperimentRecord:
        return ExperimentRecord(self.config.campaign, trial, float(param), seed,
                                {k: float(v) for k, v in obs.items()})

    # ---------------------------------------------------------- campaigns

    def connection_trial(self, x, trial, seed):
        c = self.config
        geom = build_geometry(x, c.delta)
        grid = self.grid_for(geom.H.expand(2 * geom.l))
        eps = connection_epsilon(x, c.delta, c.pitch)
        log_term = math.log(x) ** (1.5 + c.delta)
        threshold = c.c1 * x * log_term
        if padded_nodes(grid) > c.memory_budget:
            log.warning("trial %d at x=%g aborted: %d nodes over budget %d",
                        trial, x, padded_nodes(grid), c.memory_budget)
            return [self._record(trial, x, seed, connected=0, d_chem=math.inf, euclid=x,
                                 ratio=math.inf, threshold=threshold, exceeds=0,
                                 raw_ratio=math.inf, epsilon=eps, g1=0, g2=0,
                                 sup_diff=math.nan, lemma_path=-1, aborted=1)]
        field = self.field_factory(grid, seed)
        field_eps = discretize(field, eps)
        labeling = label_components(excursion_mask(field, c.level))
        res = chemical_distance(labeling, (0.0, 0.0), (x, 0.0))
        d = res.length if res.reachable else math.inf
        rep = detect_structure(field, field_eps, geom, c.level)
        if rep.g1 and res.reachable:
            lemma = 1 if lemma_path_exists(field, field_eps, geom, c.level) else 0
        else:
            lemma = -1
        return [self._record(
            trial, x, seed, connected=res.reachable, d_chem=d, euclid=x, ratio=d / x,
            threshold=threshold, exceeds=res.reachable and d > threshold,
            raw_ratio=d / (x * log_term), epsilon=eps, g1=rep.g1, g2=rep.g2,
            sup_diff=rep.sup_diff, lemma_path=lemma, aborted=0)]

    def crossing_trial(self, lam, trial, seed):
        c = self.config
        rect = Rect(0.0, 0.0, c.aspect * lam, lam)
        eps = c.epsilon_values[0] if c.epsilon_values else None
        grid = self.grid_for(rect.expand(eps if eps else 0.0))
        field = self.field_factory(grid, seed)
        rs, cs = grid.index_range(rect)
        cross = crosses(field.values[rs, cs] >= -c.level, Direction.LEFT_RIGHT)
        cross_eps = -1
        if eps:
            vals = discretize(field, eps).values
            cross_eps = crosses(vals[rs, cs] >= -c.level, Direction.LEFT_RIGHT)
        return [self._record(trial, lam, seed, crossing=cross, crossing_eps=cross_eps,
                             epsilon=eps if eps else -1, width=rect.width, height=rect.height)]

    def concentration_trial(self, trial, seed):
        c = self.config
        reach = 1.0 + max(c.epsilon_values)
        grid = self.grid_for(Rect(-reach, -reach, reach, reach))
        field = self.field_factory(grid, seed)
        X, Y = np.meshgrid(grid.xs(), grid.ys())
        disk = X * X + Y * Y <= 1.0 + 1e-12
        out = []
        for eps in c.epsilon_values:
            fe = discretize(field, eps)
            sup = float(np.max(np.abs(fe.values - field.values)[disk]))
            out.append(self._record(trial, eps, seed, sup_diff=sup))
        return out

    def moments_trial(self, R, trial, seed):
        c = self.config
        box = Rect.square(R)
        grid = self.grid_for(box)
        field = self.field_factory(grid, seed)
        L = level_set_length(field, c.level, box)
        chain = 2.0 * (8.0 * R + L)
        S, capped, holds = -1.0, 0, 1
        if c.measure_s or c.campaign is Campaign.SB_MOMENTS:
            labeling = label_components(excursion_mask(field, c.level))
            try:
                S = s_statistic(labeling, box, DiameterMode.EXACT, c.diameter_cap)
            except CapExceeded:
                # lower bound only; excluded from the moment table
                S = s_statistic(labeling, box, DiameterMode.DOUBLE_SWEEP)
                capped = 1
            holds = S <= chain * (1 + CHAIN_SLACK)
        return [self._record(trial, R, seed, L_length=L, S_B=S, chain_bound=chain,
                             chain_holds=holds, capped=capped)]

    def lemma_trial(self, R, trial, seed):
        c = self.config
        box = Rect.square(R)
        field = self.field_factory(self.grid_for(box), seed)
        reports, skipped = analyze_components(field, c.level, box, c.diameter_cap)
        if skipped:
            log.info("trial %d R=%g: %d components above the diameter cap skipped", trial, R, skipped)
        return [self._record(trial, R, seed, label=r.label, n_cells=r.n_cells, n_holes=r.n_holes,
                             boundary_length=r.boundary_length, diameter=r.diameter,
                             ratio=r.ratio, holds=r.holds, clipped=r.clipped)
                for r in reports]


# -------------------------------------------------------------- resume log


def partial_path(output_path) -> Path:
    return Path(str(output_path) + ".partial")


def _load_partial(path: Path) -> dict:
    done = {}
    if not path.exists():
        return done
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError:
                # a torn last line from an interrupted run
                break
            recs = [ExperimentRecord(Campaign.parse(r["campaign"]), r["trial"], r["param"],
                                     r["seed"], r["obs"]) for r in entry["records"]]
            done[tuple(entry["unit"])] = recs
    return done


def _dump_unit(unit, records) -> str:
    return json.dumps({"unit": list(unit), "records": [
        {"campaign": r.campaign.value, "trial": r.trial, "param": r.param, "seed": r.seed,
         "obs": r.observables} for r in records]}) + "\n"


def run_campaign(config: ExperimentConfig, threads: int = 1, resume: bool = False,
                 field_factory: Optional[FieldFactory] = None, write: bool = True,
                 output_path=None) -> list[ExperimentRecord]:
    """Run every unit of the campaign and (optionally) write the CSV report.

    With ``resume`` the units already listed in ``<output>.partial`` are reused.
    """
    runner = Runner(config, field_factory)
    out = Path(output_path or config.output_path)
    part = partial_path(out)
    done = _load_partial(part) if (resume and write) else {}
    if write and not resume and part.exists():
        part.unlink()
    todo = [u for u in runner.units() if u not in done]
    log.info("%s: %d units, %d already done", config.campaign.value, len(todo) + len(done), len(done))

    fh = open(part, "a") if write else None
    try:
        def work(unit):
            return unit, runner.run_unit(unit)

        if threads <= 1:
            results = map(work, todo)
        else:
            pool = ThreadPoolExecutor(max_workers=threads)
            results = pool.map(work, todo)
        for unit, recs in results:
            done[unit] = recs
            if fh is not None:
                fh.write(_dump_unit(unit, recs))
                fh.flush()
        if threads > 1:
            pool.shutdown()
    finally:
        if fh is not None:
            fh.close()

    records = [r for u in sorted(done) for r in done[u]]
    records.sort(key=ExperimentRecord.sort_key)
    if write:
        emit_report(records, out, config)
        os.remove(part)
    return records
