"""Trial records, the per-campaign CSV schema and summary statistics."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .config import Campaign, ExperimentConfig, config_to_text

BASE_COLUMNS = ("campaign", "trial", "param", "seed")

COLUMNS = {
    Campaign.CONNECTION: ("connected", "d_chem", "euclid", "ratio", "threshold", "exceeds",
                          "raw_ratio", "epsilon", "g1", "g2", "sup_diff", "lemma_path", "aborted"),
    Campaign.CROSSING_SCALING: ("crossing", "crossing_eps", "epsilon", "width", "height"),
    Campaign.CONCENTRATION: ("sup_diff",),
    Campaign.KAC_RICE_MOMENTS: ("L_length", "S_B", "chain_bound", "chain_holds", "capped"),
    Campaign.SB_MOMENTS: ("L_length", "S_B", "chain_bound", "chain_holds", "capped"),
    Campaign.LEMMA_SWEEP: ("label", "n_cells", "n_holes", "boundary_length", "diameter",
                           "ratio", "holds", "clipped"),
}


@dataclass
class ExperimentRecord:
    campaign: Campaign
    trial: int
    param: float
    seed: int
    observables: dict = field(default_factory=dict)

    def sort_key(self):
        return (self.campaign.value, self.param, self.trial, self.observables.get("label", 0.0))


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1.0" if v else "0.0"
    return repr(float(v))


def records_to_csv(records: Iterable[ExperimentRecord], campaign: Campaign) -> str:
    cols = COLUMNS[campaign]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BASE_COLUMNS + cols)
    for r in sorted(records, key=ExperimentRecord.sort_key):
        writer.writerow([r.campaign.value, r.trial, _fmt(r.param), r.seed]
                        + [_fmt(r.observables[c]) for c in cols])
    return buf.getvalue()


def emit_report(records, path, config: Optional[ExperimentConfig] = None,
                campaign: Optional[Campaign] = None) -> Path:
    """Write the CSV and, when a config is given, the ``<path>.meta`` sidecar."""
    records = list(records)
    if campaign is None:
        if config is not None:
            campaign = config.campaign
        elif records:
            campaign = records[0].campaign
        else:
            raise ValueError("campaign unknown for an empty record list")
    path = Path(path)
    try:
        path.write_text(records_to_csv(records, campaign))
        if config is not None:
            Path(str(path) + ".meta").write_text(config_to_text(config))
    except OSError as exc:
        raise OSError(f"cannot write report {path}: {exc}") from exc
    return path


def parse_report(path) -> list[ExperimentRecord]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read report {path}: {exc}") from exc
    return parse_csv(text)


def parse_csv(text: str) -> list[ExperimentRecord]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    obs_cols = header[len(BASE_COLUMNS):]
    out = []
    for row in reader:
        if not row:
            continue
        camp = Campaign.parse(row[0])
        obs = {c: float(v) for c, v in zip(obs_cols, row[len(BASE_COLUMNS):])}
        out.append(ExperimentRecord(camp, int(row[1]), float(row[2]), int(row[3]), obs))
    return out


# ---------------------------------------------------------------- statistics


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054):
    if n == 0:
        return 0.0, 1.0
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == n else min(1.0, centre + half)
    return lo, hi


def slope(xs, ys) -> float:
    """Least-squares slope of ys against xs."""
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    xc = xs - xs.mean()
    return float(np.dot(xc, ys - ys.mean()) / np.dot(xc, xc))


def by_param(records) -> dict:
    out = {}
    for r in records:
        out.setdefault(r.param, []).append(r)
    return dict(sorted(out.items()))


def connection_summary(records, config: ExperimentConfig) -> dict:
    rows = {}
    for x, recs in by_param(records).items():
        recs = [r for r in recs if not r.observables["aborted"]]
        conn = [r for r in recs if r.observables["connected"]]
        exceeds = sum(1 for r in conn if r.observables["exceeds"])
        n = len(recs)
        lemma = [r.observables["lemma_path"] for r in recs if r.observables["lemma_path"] >= 0]
        rows[x] = {
            "n": n,
            "n_connected": len(conn),
            "p_connected": len(conn) / n if n else float("nan"),
            "frac_exceeds_given_connected": exceeds / len(conn) if conn else 0.0,
            "p_connected_and_exceeds": exceeds / n if n else 0.0,
            "wilson": wilson_interval(exceeds, n),
            "mean_ratio_given_connected": (float(np.mean([r.observables["ratio"] for r in conn]))
                                           if conn else float("nan")),
            "max_raw_ratio": max((r.observables["raw_ratio"] for r in conn), default=float("nan")),
            "p_g1": float(np.mean([r.observables["g1"] for r in recs])) if recs else float("nan"),
            "p_g2": float(np.mean([r.observables["g2"] for r in recs])) if recs else float("nan"),
            "lemma_checked": len(lemma),
            "lemma_violations": sum(1 for v in lemma if v == 0),
        }
    return rows


def corrected_failure(failures: int, n: int) -> float:
    """(failures + 1/2) / (n + 1): keeps log(1 - p) finite when no trial fails."""
    return (failures + 0.5) / (n + 1)


def crossing_summary(records, config: ExperimentConfig) -> dict:
    rows = {}
    for lam, recs in by_param(records).items():
        c = [r.observables["crossing"] for r in recs]
        ce = [r.observables["crossing_eps"] for r in recs if r.observables["crossing_eps"] >= 0]
        n = len(c)
        fails = n - int(sum(c))
        rows[lam] = {
            "n": n,
            "p": sum(c) / n if n else float("nan"),
            "one_minus_p": fails / n if n else float("nan"),
            "p_eps": (sum(ce) / len(ce)) if ce else float("nan"),
            "log_failure": math.log(corrected_failure(fails, n)) if n else float("nan"),
        }
    lams = list(rows)
    result = {"rows": rows}
    if len(lams) >= 2:
        result["log_failure_slope"] = slope(lams, [rows[l]["log_failure"] for l in lams])
        ps = [rows[l]["p"] for l in lams]
        result["p_non_decreasing"] = all(b >= a for a, b in zip(ps, ps[1:]))
    return result


def concentration_summary(records, config: ExperimentConfig) -> dict:
    table = {}
    for eps, recs in by_param(records).items():
        sup = np.array([r.observables["sup_diff"] for r in recs])
        table[eps] = {s: float(np.mean(sup >= s)) if sup.size else float("nan")
                      for s in config.s_values}
        table[eps]["n"] = int(sup.size)
    result = {"table": table}
    eps_sorted = sorted(table)
    for s in config.s_values:
        logs = []
        for e in eps_sorted:
            p = table[e][s]
            logs.append(math.log(p) if p > 0 else -math.inf)
        finite = [(e ** -2, v) for e, v in zip(eps_sorted, logs) if math.isfinite(v)]
        result[("log_tail", s)] = dict(zip(eps_sorted, logs))
        if len(finite) >= 2:
            result[("slope", s)] = slope(*zip(*finite))
    return result


def moments_summary(records, config: ExperimentConfig) -> dict:
    rows = {}
    for R, recs in by_param(records).items():
        L = np.array([r.observables["L_length"] for r in recs])
        S = np.array([r.observables["S_B"] for r in recs
                      if r.observables["S_B"] >= 0 and not r.observables["capped"]])
        chain = [r.observables["chain_holds"] for r in recs if r.observables["S_B"] >= 0
                 and not r.observables["capped"]]
        row = {"n": len(recs), "n_s": int(S.size),
               "chain_violations": sum(1 for v in chain if not v),
               "capped": sum(1 for r in recs if r.observables["capped"])}
        for k in range(config.k_max + 1):
            row[("E_L", k)] = float(np.mean(L ** k)) if L.size else float("nan")
            if S.size:
                row[("E_S", k)] = float(np.mean(S ** k))
                row[("S_ratio", k)] = row[("E_S", k)] / R ** (2 * k)
        rows[R] = row
    return rows


def lemma_summary(records, config: ExperimentConfig) -> dict:
    ratios = [r.observables["ratio"] for r in records]
    return {
        "n_components": len(records),
        "max_ratio": max(ratios, default=float("nan")),
        "violations": sum(1 for r in records if not r.observables["holds"]),
        "with_holes": sum(1 for r in records if r.observables["n_holes"] > 0),
        "clipped": sum(1 for r in records if r.observables["clipped"]),
    }


SUMMARIES = {
    Campaign.CONNECTION: connection_summary,
    Campaign.CROSSING_SCALING: crossing_summary,
    Campaign.CONCENTRATION: concentration_summary,
    Campaign.KAC_RICE_MOMENTS: moments_summary,
    Campaign.SB_MOMENTS: moments_summary,
    Campaign.LEMMA_SWEEP: lemma_summary,
}


def summarize(records, config: ExperimentConfig) -> dict:
    return SUMMARIES[config.campaign](list(records), config)
