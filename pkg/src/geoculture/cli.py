"""Command line entry point: ``geoculture synth|validate|analyze``.

Exit codes: 0 success, 1 analysis failure (or diagnostics found, for
``validate``), 2 bad input or configuration.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import platform
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__, ingest
from .areas import AdvantageError, MetricsError, load_cultural_categories
from .cohort import PanelError
from .graph import EmptyGraphError
from .pipeline import AnalysisError, Options, analyze, load_inputs, table_keys
from .report import write_report
from .stats import AnovaError
from .synth import ConfigError, SynthConfig, generate_city

log = logging.getLogger("geoculture")

LOG_ENV = "GEOCULTURE_LOG"
EXIT_OK, EXIT_ANALYSIS, EXIT_INPUT = 0, 1, 2

INPUT_FILES = {"venues": "venues.csv", "transitions": "transitions.csv", "imd": "imd.csv",
               "expenditure": "expenditure.csv", "polygons": "polygons.csv"}

RUN_DEFAULTS = {
    "inputs": None,
    "input_dir": None,
    "synth_config": None,
    "first_year": 2011,
    "years": 3,
    "lag_months": 9,
    "alpha": 0.05,
    "density_mode": "per_km2",
    "h1_mode": "mean",
    "cea_fiscal_year": None,
    "cultural_categories": None,
    "max_diagnostics": ingest.DEFAULT_MAX_DIAGNOSTICS,
    "dump_graphs": False,
    "out": None,
    "threads": 1,
}
# settings that cannot change the report contents stay out of the manifest
_EXECUTION_ONLY = ("threads", "out")


class UsageError(Exception):
    pass


def _load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise UsageError(f"{path}: top-level JSON value must be an object")
    return data


def _run_config(args) -> dict:
    cfg = dict(RUN_DEFAULTS)
    base = Path(".")
    if getattr(args, "config", None):
        data = _load_json(args.config)
        unknown = sorted(set(data) - set(cfg))
        if unknown:
            raise UsageError(f"unknown run config field(s): {', '.join(unknown)}")
        cfg.update(data)
        base = Path(args.config).parent
        for key in ("input_dir", "synth_config", "cultural_categories", "out"):
            if cfg[key] and not os.path.isabs(cfg[key]):
                cfg[key] = str(base / cfg[key])
        if cfg["inputs"]:
            cfg["inputs"] = {k: v if os.path.isabs(v) else str(base / v) for k, v in cfg["inputs"].items()}
    overrides = {
        "input_dir": getattr(args, "input_dir", None),
        "synth_config": getattr(args, "synth_config", None),
        "out": getattr(args, "out", None),
        "lag_months": getattr(args, "lag_months", None),
        "alpha": getattr(args, "alpha", None),
        "density_mode": getattr(args, "density_mode", None),
        "h1_mode": getattr(args, "h1_mode", None),
        "threads": getattr(args, "threads", None),
        "cultural_categories": getattr(args, "categories", None),
    }
    for k, v in overrides.items():
        if v is not None:
            cfg[k] = v
    if getattr(args, "dump_graphs", False):
        cfg["dump_graphs"] = True
    if cfg["lag_months"] < 0:
        raise UsageError("lag_months must be >= 0")
    if not 0 < cfg["alpha"] < 1:
        raise UsageError("alpha must lie in (0, 1)")
    return cfg


def _input_paths(cfg: dict) -> dict[str, str]:
    if cfg["inputs"]:
        missing = [k for k in table_keys() if k not in cfg["inputs"]]
        if missing:
            raise UsageError(f"run config inputs lack: {', '.join(missing)}")
        return {k: cfg["inputs"][k] for k in table_keys()}
    if cfg["input_dir"]:
        return {k: os.path.join(cfg["input_dir"], INPUT_FILES[k]) for k in table_keys()}
    raise UsageError("no inputs given: use --input-dir, --synth-config or a run config with 'inputs'")


def _read_inputs(cfg: dict) -> tuple[dict[str, bytes], dict[str, str]]:
    """Raw bytes of the five tables and a label describing where each came from."""
    if cfg["synth_config"] and not (cfg["inputs"] or cfg["input_dir"]):
        try:
            synth = SynthConfig.from_dict(_load_json(cfg["synth_config"]))
            files = generate_city(synth).files()
        except ConfigError as exc:
            raise UsageError(f"synth config: {exc}") from None
        return ({k: files[INPUT_FILES[k]] for k in table_keys()},
                {k: f"synth:{INPUT_FILES[k]}" for k in table_keys()})
    paths = _input_paths(cfg)
    data = {}
    for k, p in paths.items():
        try:
            with open(p, "rb") as fh:
                data[k] = fh.read()
        except OSError as exc:
            raise UsageError(f"cannot read {k} table {p}: {exc.strerror}") from None
    return data, paths


def _options(cfg: dict) -> Options:
    cats = None
    if cfg["cultural_categories"]:
        try:
            cats = load_cultural_categories(cfg["cultural_categories"])
        except OSError as exc:
            raise UsageError(f"cannot read category file: {exc.strerror}") from None
    return Options(first_year=cfg["first_year"], years=cfg["years"], lag_months=cfg["lag_months"],
                   alpha=cfg["alpha"], density_mode=cfg["density_mode"], h1_mode=cfg["h1_mode"],
                   cea_fiscal_year=cfg["cea_fiscal_year"], cultural_categories=cats,
                   max_diagnostics=cfg["max_diagnostics"], threads=cfg["threads"])


def _publish(tmp: Path, out: Path) -> None:
    if out.exists():
        if not out.is_dir() or (any(out.iterdir()) and not (out / "run_manifest.json").exists()):
            raise UsageError(f"refusing to replace {out}: not an earlier report directory")
        shutil.rmtree(out)
    os.chmod(tmp, 0o755)
    os.rename(tmp, out)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    data = _load_json(args.config) if args.config else {}
    if args.seed is not None:
        data["seed"] = args.seed
    try:
        cfg = SynthConfig.from_dict(data)
        bundle = generate_city(cfg)
    except ConfigError as exc:
        raise UsageError(f"synth config: {exc}") from None
    try:
        written = bundle.write(args.out)
    except OSError as exc:
        print(f"error: cannot write to {args.out}: {exc.strerror}", file=sys.stderr)
        return EXIT_ANALYSIS
    for p in written:
        print(p)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _run_config(args)
    data, _ = _read_inputs(cfg)
    try:
        inputs = load_inputs(data["venues"], data["transitions"], data["imd"], data["expenditure"],
                             data["polygons"], cfg["max_diagnostics"])
        diags = inputs.diagnostics
    except ingest.TooManyDiagnostics as exc:
        diags = exc.diagnostics
    except ingest.IngestError as exc:
        raise UsageError(str(exc)) from None
    for d in diags:
        print(d)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump([d.to_dict() for d in diags], fh, indent=2)
            fh.write("\n")
    print(f"{len(diags)} diagnostic(s)", file=sys.stderr)
    return EXIT_ANALYSIS if diags else EXIT_OK


def cmd_analyze(args) -> int:
    cfg = _run_config(args)
    if not cfg["out"]:
        raise UsageError("analyze needs an output directory (--out)")
    data, labels = _read_inputs(cfg)
    opts = _options(cfg)
    try:
        inputs = load_inputs(data["venues"], data["transitions"], data["imd"], data["expenditure"],
                             data["polygons"], opts.max_diagnostics)
    except ingest.IngestError as exc:
        raise UsageError(str(exc)) from None
    try:
        result = analyze(inputs, opts)
    except (AnalysisError, AnovaError, PanelError, AdvantageError, MetricsError, EmptyGraphError) as exc:
        print(f"analysis failed: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS

    manifest = {
        "tool": "geoculture",
        "versions": {"geoculture": __version__, "python": platform.python_version(),
                     "numpy": np.__version__},
        "config": {k: v for k, v in sorted(cfg.items()) if k not in _EXECUTION_ONLY},
        "inputs": {k: {"source": labels[k], "sha256": hashlib.sha256(data[k]).hexdigest()}
                   for k in table_keys()},
        "group_sizes": {g.value: n for g, n in result.panel.group_sizes.items()},
        "diagnostics": len(result.diagnostics),
    }
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        write_report(result, tmp, dump_graphs=cfg["dump_graphs"], manifest=manifest)
        _publish(tmp, out)
    finally:
        if tmp.exists():
            shutil.rmtree(tmp)
    for s in result.summaries:
        log.info("t=%d |V|=%d |E|=%d <C>=%.3f <k>=%.2f", s.t, s.node_count, s.edge_count,
                 s.avg_clustering, s.avg_degree)
    print(out)
    return EXIT_OK


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="run configuration (JSON)")
    p.add_argument("--input-dir", help="directory holding the five canonical tables")
    p.add_argument("--synth-config", help="generate the inputs from a synth config instead")
    p.add_argument("--lag-months", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--density-mode", choices=("per_km2", "per_venue"))
    p.add_argument("--h1-mode", choices=("mean", "per_snapshot"))
    p.add_argument("--categories", help="cultural category file, one tag per line")
    p.add_argument("--threads", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geoculture", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic city bundle")
    p.add_argument("--config", help="synth configuration (JSON); defaults used when omitted")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("validate", help="report ingest diagnostics without analysing")
    _add_run_flags(p)
    p.add_argument("--report", help="also write diagnostics as JSON here")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("analyze", help="run the full analysis and write a report bundle")
    _add_run_flags(p)
    p.add_argument("--out")
    p.add_argument("--dump-graphs", action="store_true", help="also write edges_t<N>.csv per snapshot")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get(LOG_ENV, "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
