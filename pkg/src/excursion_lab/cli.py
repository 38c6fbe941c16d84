"""Command line entry point ``excursion-lab``."""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys

from . import __version__
from .boundary_geom import analyze_components
from .chem_dist import DiameterMode, chemical_distance, s_statistic
from .errors import ExcursionLabError
from .excursion import Direction, detect_crossing, excursion_mask, label_components
from .field_synth import KernelSpec, discretize, sample_field
from .fieldio import read_field, write_field
from .geometry import GridSpec, Rect
from .global_structure import build_geometry, detect_structure, lemma_path_exists


def _point(text: str):
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected X,Y, got {text!r}")
    return x, y


def _rect(text: str) -> Rect:
    try:
        return Rect.parse(text)
    except (ValueError, ExcursionLabError) as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _labeling(args):
    field = read_field(args.infile)
    return field, label_components(excursion_mask(field, args.level))


def _writer():
    return csv.writer(sys.stdout, lineterminator="\n")


def cmd_sample(args):
    if args.kernel.lower() not in ("bargmann-fock", "bf"):
        raise SystemExit(f"unsupported kernel {args.kernel!r}")
    kernel = KernelSpec.bargmann_fock()
    grid = GridSpec(args.pitch, args.extent, padding=kernel.truncation_radius)
    field = sample_field(kernel, grid, args.seed)
    write_field(field, args.out)
    print(f"wrote {grid.rows}x{grid.cols} field to {args.out}")


def cmd_crossing(args):
    _, labeling = _labeling(args)
    hit = detect_crossing(labeling, args.rect, Direction.parse(args.dir))
    print("true" if hit else "false")
    if args.csv:
        w = _writer()
        w.writerow(["level", "x0", "y0", "x1", "y1", "dir", "crossing"])
        r = args.rect
        w.writerow([args.level, r.x0, r.y0, r.x1, r.y1, args.dir, int(hit)])


def cmd_chemdist(args):
    _, labeling = _labeling(args)
    res = chemical_distance(labeling, args.src, args.dst)
    if res.error:
        print(f"unreachable ({res.error})")
    elif not res.reachable:
        print("inf")
    else:
        print(repr(res.length))


def cmd_sstat(args):
    _, labeling = _labeling(args)
    print(repr(s_statistic(labeling, args.box, DiameterMode.parse(args.mode), args.cap)))


def cmd_boundary(args):
    field = read_field(args.infile)
    reports, skipped = analyze_components(field, args.level, args.box, args.cap)
    w = _writer()
    w.writerow(["label", "n_holes", "boundary_length", "diam_exact", "ratio", "holds"])
    for r in reports:
        w.writerow([r.label, r.n_holes, repr(r.boundary_length), repr(r.diameter),
                    repr(r.ratio), int(r.holds)])
    if skipped:
        print(f"{skipped} components above the cap skipped", file=sys.stderr)


def cmd_gstruct(args):
    field = read_field(args.infile)
    geom = build_geometry(args.x, args.delta)
    field_eps = discretize(field, args.epsilon)
    rep = detect_structure(field, field_eps, geom, args.level)
    w = _writer()
    names = list(rep.per_subevent)
    w.writerow(["x", "delta", "level", "epsilon", "g1", *names, "g2", "sup_diff", "lemma_path"])
    lemma = int(lemma_path_exists(field, field_eps, geom, args.level)) if rep.g1 else -1
    w.writerow([args.x, args.delta, args.level, args.epsilon, int(rep.g1),
                *(int(rep.per_subevent[n]) for n in names), int(rep.g2),
                repr(rep.sup_diff), lemma])


def _format_summary(summary, indent=0):
    pad = "  " * indent
    lines = []
    for key, val in summary.items():
        if isinstance(val, dict):
            lines.append(f"{pad}{key}:")
            lines.extend(_format_summary(val, indent + 1))
        else:
            if isinstance(val, float) and not math.isinf(val):
                val = f"{val:.6g}"
            lines.append(f"{pad}{key}: {val}")
    return lines


def cmd_run(args):
    from .experiments import load_config, run_campaign, summarize

    overrides = {}
    if args.output:
        overrides["output_path"] = args.output
    config = load_config(args.config, **overrides)
    records = run_campaign(config, threads=args.threads, resume=args.resume)
    print(f"{config.campaign.value}: {len(records)} records -> {config.output_path}")
    print("\n".join(_format_summary(summarize(records, config))))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="excursion-lab",
                                description="Excursion-set percolation experiments on smooth Gaussian fields.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample", help="synthesize a field and write it in EXCF1 format")
    s.add_argument("--kernel", default="bargmann-fock")
    s.add_argument("--pitch", type=float, required=True)
    s.add_argument("--extent", type=_rect, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample)

    def field_cmd(name, helptext, func):
        c = sub.add_parser(name, help=helptext)
        c.add_argument("--in", dest="infile", required=True)
        c.add_argument("--level", type=float, required=True)
        c.set_defaults(func=func)
        return c

    c = field_cmd("crossing", "does the excursion set cross a rectangle", cmd_crossing)
    c.add_argument("--rect", type=_rect, required=True)
    c.add_argument("--dir", choices=["lr", "bt"], default="lr")
    c.add_argument("--csv", action="store_true")

    c = field_cmd("chemdist", "chemical distance between two points", cmd_chemdist)
    c.add_argument("--from", dest="src", type=_point, required=True)
    c.add_argument("--to", dest="dst", type=_point, required=True)

    c = field_cmd("sstat", "sum of cluster diameters inside a box", cmd_sstat)
    c.add_argument("--box", type=_rect, required=True)
    c.add_argument("--mode", choices=["exact", "sweep"], default="exact")
    c.add_argument("--cap", type=int, default=20_000)

    c = field_cmd("boundary", "per-component boundary length vs diameter", cmd_boundary)
    c.add_argument("--box", type=_rect, default=None)
    c.add_argument("--cap", type=int, default=20_000)

    c = field_cmd("gstruct", "global structure events in the thin rectangle", cmd_gstruct)
    c.add_argument("--x", type=float, required=True)
    c.add_argument("--delta", type=float, default=0.5)
    c.add_argument("--epsilon", type=float, required=True)

    r = sub.add_parser("run", help="run a Monte Carlo campaign from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--resume", action="store_true")
    r.add_argument("--output", default=None, help="override output_path from the config")
    r.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ExcursionLabError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
