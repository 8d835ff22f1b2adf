"""Command-line entry point: ``simulate``, ``optimize``, ``compare`` and ``init-config``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import fis
from .config import ConfigError, ToolkitConfig, default_config_dict, load_config
from .cycle import DriveCycleError
from .moo import MooSettings, OptimizationResult, optimize
from .sim import HessDesign, SimResult, evaluate_objectives, simulate, simulate_batch, write_trace

OUT_ENV = "HESS_CODESIGN_OUT"


class DesignError(ValueError):
    pass


def _finite_or_none(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n")


def _gene_header(n: int) -> list[str]:
    return [f"g{k}" for k in range(1, n + 1)]


def parse_design(text: str, template: fis.FisSpec, base_dir: Path | None = None) -> HessDesign:
    """Parse ``N``, ``N:battery``, ``N:g1,...,gK`` or ``file.csv#row``.

    ``N`` alone uses the evenly spaced (initial) membership functions.  A
    row reference selects a 1-based data row of a front or archive export.
    """
    n_genes = fis.genome_length(template)
    if "#" in text:
        file_part, _, row_part = text.rpartition("#")
        path = Path(file_part)
        if base_dir is not None and not path.is_absolute() and not path.exists():
            path = base_dir / path
        if not path.is_file():
            raise FileNotFoundError(f"design file not found: {path}")
        try:
            row_no = int(row_part)
        except ValueError:
            raise DesignError(f"design row must be an integer, got '{row_part}'") from None
        with path.open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not 1 <= row_no <= len(rows):
            raise DesignError(f"{path}: row {row_no} out of range (1..{len(rows)})")
        row = rows[row_no - 1]
        try:
            genome = [float(row[h]) for h in _gene_header(n_genes)]
            return HessDesign(int(row["n_sc"]), genome)
        except (KeyError, TypeError, ValueError) as exc:
            raise DesignError(f"{path}: row {row_no}: bad design ({exc})") from None

    head, sep, tail = text.partition(":")
    try:
        n_sc = int(head)
    except ValueError:
        raise DesignError(f"bad design '{text}': expected N, N:battery, N:g1,...,g{n_genes} or file.csv#row") from None
    if not sep:
        return HessDesign(n_sc, fis.uniform_genome(template))
    if tail.strip() == "battery":
        return HessDesign(n_sc, None)
    try:
        genome = [float(g) for g in tail.split(",")]
    except ValueError:
        raise DesignError(f"bad genome in design '{text}'") from None
    fis._check_genomes(np.array(genome), n_genes)
    return HessDesign(n_sc, genome)


def _summary(design: HessDesign, result: SimResult) -> dict:
    out = {
        "n_sc": design.n_sc,
        "n_bat": result.n_bat,
        "feasible": result.feasible,
        "j_laps": _finite_or_none(result.j_laps),
        "j_lifebat": _finite_or_none(result.j_lifebat),
        "avg_cell_current": _finite_or_none(result.avg_cell_current),
        "ah_discharged": _finite_or_none(result.ah_discharged),
        "ems": "battery-only" if design.genome is None else "fuzzy",
        "genome": None if design.genome is None else design.genome.tolist(),
    }
    if result.traces is not None and len(result.traces["t"]):
        out["soc_final"] = float(result.traces["soc"][-1])
        out["soe_final"] = float(result.traces["soe"][-1])
    return out


def _relative_change(a, b):
    if a is None or b is None:
        return None
    if a == 0:
        return 0.0 if b == 0 else None
    return 100.0 * (b - a) / abs(a)


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args) -> ToolkitConfig:
    cfg = load_config(args.config) if args.config else ToolkitConfig()
    if args.seed is not None:
        cfg = replace(cfg, moo=replace(cfg.moo, seed=args.seed))
    return cfg


def cmd_simulate(args) -> int:
    cfg = _load(args)
    if len(args.design) != 1:
        raise DesignError("simulate takes exactly one --design")
    design = parse_design(args.design[0], cfg.plant.template, cfg.base_dir)
    cycle = cfg.load_cycle()
    result = simulate(design, cycle, cfg.limits, cfg.plant, record_traces=True)
    out = _out_dir(args)
    summary = _summary(design, result)
    _write_json(out / "summary.json", summary)
    if result.traces is not None:
        write_trace(out / "trace.csv", result.traces)
    print(json.dumps({k: summary[k] for k in ("n_sc", "n_bat", "j_laps", "j_lifebat", "avg_cell_current")}))
    return 0


def make_evaluator(cfg: ToolkitConfig, cycle):
    def evaluate(n_sc, genomes):
        designs = [HessDesign(int(s), g) for s, g in zip(n_sc, genomes)]
        results = simulate_batch(designs, cycle, cfg.limits, cfg.plant)
        return [(evaluate_objectives(r), r.avg_cell_current) for r in results]

    return evaluate


def write_population_csv(path: Path, individuals, n_genes: int) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["gen", "n_sc", "j_laps", "j_lifebat", *_gene_header(n_genes)])
        for ind in individuals:
            w.writerow([ind.gen, ind.n_sc, repr(ind.objectives[0]), repr(ind.objectives[1]),
                        *(repr(float(g)) for g in ind.genome)])


def run_optimization(cfg: ToolkitConfig, settings: MooSettings | None = None, progress=None) -> OptimizationResult:
    cycle = cfg.load_cycle()
    template = cfg.plant.template
    return optimize(make_evaluator(cfg, cycle), fis.uniform_genome(template), settings or cfg.moo, progress)


def cmd_optimize(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)

    def progress(entry):
        if not args.quiet:
            print(f"gen {entry['gen']:3d}  hv {entry['hypervolume']:.6g}  "
                  f"best laps {entry['best_laps']:.4f}  front {entry['front_size']}", file=sys.stderr)

    res = run_optimization(cfg, progress=progress)
    n_genes = fis.genome_length(cfg.plant.template)
    write_population_csv(out / "front.csv", res.front, n_genes)
    write_population_csv(out / "archive.csv", res.archive, n_genes)
    with (out / "hypervolume.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["gen", "hypervolume", "best_laps", "best_life", "front_size"])
        for h in res.history:
            w.writerow([h["gen"], repr(h["hypervolume"]), repr(h["best_laps"]), repr(h["best_life"]), h["front_size"]])
    print(json.dumps({"front_size": len(res.front), "evaluations": len(res.archive),
                      "hypervolume": res.history[-1]["hypervolume"]}))
    return 0


def compare_designs(cfg: ToolkitConfig, a: HessDesign, b: HessDesign) -> tuple[dict, SimResult, SimResult]:
    if a.n_sc != b.n_sc:
        raise DesignError(f"compare needs equal n_sc, got {a.n_sc} and {b.n_sc}")
    cycle = cfg.load_cycle()
    ra, rb = simulate_batch([a, b], cycle, cfg.limits, cfg.plant, record_traces=True)
    sa, sb = _summary(a, ra), _summary(b, rb)
    report = {
        "a": sa,
        "b": sb,
        "j_laps_change_percent": _relative_change(sa["j_laps"], sb["j_laps"]),
        "j_lifebat_change_percent": _relative_change(sa["j_lifebat"], sb["j_lifebat"]),
        "avg_cell_current_change_percent": _relative_change(sa["avg_cell_current"], sb["avg_cell_current"]),
    }
    return report, ra, rb


def cmd_compare(args) -> int:
    cfg = _load(args)
    if len(args.design) != 2:
        raise DesignError("compare takes exactly two --design values (a, then b)")
    a, b = (parse_design(d, cfg.plant.template, cfg.base_dir) for d in args.design)
    report, ra, rb = compare_designs(cfg, a, b)
    out = _out_dir(args)
    _write_json(out / "compare.json", report)
    write_trace(out / "trace_a.csv", ra.traces)
    write_trace(out / "trace_b.csv", rb.traces)
    print(json.dumps({k: report[k] for k in ("j_laps_change_percent", "j_lifebat_change_percent")}))
    return 0


def cmd_init_config(args) -> int:
    text = json.dumps(default_config_dict(), indent=2) + "\n"
    if args.path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.path).write_text(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hess-codesign", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file (defaults built in)")
        p.add_argument("--out", help=f"output directory (env {OUT_ENV}, default ./out)")
        p.add_argument("--seed", type=int, help="optimizer seed override")

    p = sub.add_parser("simulate", help="simulate one design and export its trace")
    common(p)
    p.add_argument("--design", action="append", default=[], required=True,
                   help="N | N:battery | N:g1,...,g28 | front.csv#row")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("optimize", help="run the sizing and membership-function optimization")
    common(p)
    p.add_argument("--quiet", action="store_true", help="no per-generation progress")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("compare", help="paired simulation of two designs with equal n_sc")
    common(p)
    p.add_argument("--design", action="append", default=[], required=True, help="give twice: a, then b")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("init-config", help="print or write a config with all defaults")
    p.add_argument("path", nargs="?", help="output path, or - for stdout")
    p.set_defaults(func=cmd_init_config)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command != "init-config" and args.seed is not None and args.seed < 0:
        parser.error("--seed must be non-negative")
    try:
        return args.func(args)
    except (ConfigError, DesignError, DriveCycleError, fis.GenomeDomainError, FileNotFoundError, OSError, ValueError) as exc:
        print(f"error: {exc}".splitlines()[0], file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
