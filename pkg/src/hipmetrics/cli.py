"""Command-line interface.

Subcommands: ``analyze`` (masks to measurements), ``validate`` (compare
against expert values), ``phantom`` (generate synthetic cases with ground
truth), ``formats`` (print the file schemas). Configuration comes from
flags, optionally seeded from a ``--config`` JSON file; flags win. The
``HIPMETRICS_LOG`` environment variable sets log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .errors import HipmetricsError
from .manifest import CaseRecord, save_manifest
from .phantom import (
    gen_us_phantom,
    gen_xray_phantom,
    sample_us_spec,
    sample_xray_spec,
    write_truth_json,
)
from .pipeline import EXIT_HARD_ERROR, RunConfig, run_analyze, run_validate
from .raster import save_label_mask
from .ultrasound import DEFAULT_US_LABEL_MAP
from .xray import DEFAULT_XRAY_LABEL_MAP

log = logging.getLogger("hipmetrics")


def _positive_int(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def _fraction(value: str) -> float:
    x = float(value)
    if not 0.0 < x < 1.0:
        raise argparse.ArgumentTypeError("must lie strictly between 0 and 1")
    return x


def build_parser() -> argparse.ArgumentParser:
    parser, _ = _build_parser_with_subparsers()
    return parser


def _build_parser_with_subparsers():
    parser = argparse.ArgumentParser(
        prog="hipmetrics",
        description="Rule-based hip dysplasia measurements from segmentation "
                    "masks (all outputs are experimental)")
    parser.add_argument("--config", help="JSON file with flag defaults; "
                                         "explicit flags win")
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="run the measurement pipeline")
    pa.add_argument("--manifest", required=True)
    pa.add_argument("--out", required=True)
    pa.add_argument("--workers", type=_positive_int, default=1)
    pa.add_argument("--backend", default=None,
                    help="segmentation backend executable")
    pa.add_argument("--timeout-s", type=float, default=120.0)
    pa.add_argument("--curvature-window", type=_positive_int, default=7)
    pa.add_argument("--graf-class", action="store_true",
                    help="emit the experimental Graf class from alpha")
    pa.add_argument("--coverage-mode", choices=("diameter", "area"),
                    default="diameter")

    pv = sub.add_parser("validate", help="score predictions against expert values")
    pv.add_argument("--manifest", required=True)
    pv.add_argument("--predictions", required=True,
                    help="analyze output directory")
    pv.add_argument("--out", required=True)
    pv.add_argument("--alpha-level", type=_fraction, default=0.05)

    pp = sub.add_parser("phantom", help="generate synthetic cases + manifest")
    pp.add_argument("--modality", choices=("ultrasound", "xray"), required=True)
    pp.add_argument("--n", type=_positive_int, required=True)
    pp.add_argument("--seed", type=int, default=0)
    pp.add_argument("--out", required=True)

    sub.add_parser("formats", help="print file format documentation")
    return parser, {"analyze": pa, "validate": pv, "phantom": pp}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    _setup_logging()
    parser, subparsers = _build_parser_with_subparsers()
    args, remaining = parser.parse_known_args(argv)
    if remaining:
        parser.error(f"unrecognized arguments: {' '.join(remaining)}")
    if args.config:
        defaults = _load_config_defaults(args.config, parser)
        # subparsers parse into a fresh namespace, so defaults must reach
        # each of them, not just the root parser
        for sp in subparsers.values():
            known = {a.dest for a in sp._actions}
            sp.set_defaults(**{k: v for k, v in defaults.items() if k in known})
        args = parser.parse_args(argv)

    try:
        if args.command == "analyze":
            config = RunConfig(
                workers=args.workers,
                curvature_window=args.curvature_window,
                graf_class_enabled=args.graf_class,
                coverage_mode=args.coverage_mode,
                backend=args.backend,
                timeout_s=args.timeout_s)
            return run_analyze(args.manifest, args.out, config)
        if args.command == "validate":
            config = RunConfig(alpha_level=args.alpha_level)
            return run_validate(args.manifest, args.predictions, args.out, config)
        if args.command == "phantom":
            return cmd_phantom(args.modality, args.n, args.seed, args.out)
        if args.command == "formats":
            print(FORMATS_DOC)
            return 0
        parser.error(f"unknown command {args.command!r}")
    except HipmetricsError as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_HARD_ERROR
    return EXIT_HARD_ERROR


def _setup_logging() -> None:
    level_name = os.environ.get("HIPMETRICS_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level,
                        format="%(levelname)s %(name)s: %(message)s")


def _load_config_defaults(path, parser) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read --config {path}: {exc}")
    if not isinstance(doc, dict):
        parser.error("--config must contain a JSON object")
    return {k.replace("-", "_"): v for k, v in doc.items()}


def cmd_phantom(modality: str, n: int, seed: int, out_dir) -> int:
    """Write n phantom cases plus a manifest whose expert values are the
    constructed ground truth, ready for analyze + validate."""
    out_dir = Path(out_dir)
    cases_dir = out_dir / "cases"
    cases_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for i in range(n):
        case_seed = seed + i
        case_id = f"{'us' if modality == 'ultrasound' else 'xr'}-{i:04d}"
        if modality == "ultrasound":
            mask, truth = gen_us_phantom(sample_us_spec(case_seed))
            expert = {"alpha_deg": truth.alpha_deg, "coverage": truth.coverage}
            label_map = dict(DEFAULT_US_LABEL_MAP)
        else:
            mask, truth = gen_xray_phantom(sample_xray_spec(case_seed))
            expert = {
                side: {
                    "acetabular_index_deg": getattr(truth, side).acetabular_index_deg,
                    "wiberg_deg": getattr(truth, side).wiberg_deg,
                    "ihdi_grade": getattr(truth, side).ihdi_grade,
                } for side in ("left", "right")
            }
            label_map = dict(DEFAULT_XRAY_LABEL_MAP)
        mask_path = cases_dir / f"{case_id}_mask.png"
        save_label_mask(mask, mask_path)
        write_truth_json(truth, cases_dir / f"{case_id}_truth.json")
        records.append(CaseRecord(
            case_id=case_id, modality=modality, label_map=label_map,
            mask_path=str(mask_path), expert=expert))
        log.info("generated %s (seed %d)", case_id, case_seed)
    save_manifest(records, out_dir / "manifest.json")
    print(f"wrote {n} {modality} phantom case(s) to {out_dir}")
    return 0


FORMATS_DOC = """\
hipmetrics file formats (schema_version 1)

manifest.json
  {"schema_version": 1, "cases": [{
     "case_id": str (unique), "modality": "ultrasound" | "xray",
     "image_path": str?, "mask_path": str?,
     "label_map": {"<label int>": "<structure>"},
     "expert": ultrasound {"alpha_deg": num, "coverage": num}
             | xray {"left"/"right": {"acetabular_index_deg": num,
                      "wiberg_deg": num, "ihdi_grade": 1..4}}}]}
  Relative paths resolve against the manifest directory.
  Default label maps: ultrasound 1=ilium_acetabulum 2=femoral_head;
  xray 1=left_triangle 2=right_triangle (patient sides).

mask PNG
  8-bit single-channel, non-interlaced; 0 = background; label semantics per
  the case's label_map.

backend protocol (one request/response pair per process invocation)
  stdin:  {"schema_version": 1, "case_id", "modality", "image_path",
           "output_dir", "mask_path", "label_map", "params"}
  stdout: {"schema_version": 1, "mask_path",
           "confidence": {"<structure>": 0..1}, "backend_version"}
  Nonzero exit, malformed output, or timeout = case status 0.

analyze output tree
  out/<case_id>/report.json   measurements, landmarks, status (0 = error),
                              experimental flag
  out/<case_id>/overlay.svg   landmarks + reference lines + readout
  out/batch.json              case ids (lexicographic), statuses, exit code
  out/run.log                 timestamps only; excluded from determinism

validate output tree
  out/validation.json         ICC (consistency + absolute, 95% CI),
                              confusion matrices, classification triples,
                              excluded-case counts, tool version
  out/validation.csv          delimited ICC table
  out/classification.csv      delimited classification table
  out/figures/*.png           agreement scatters + confusion heatmaps

exit codes: 0 = all ok, 2 = batch completed with failed cases,
1 = hard error (unreadable inputs/outputs)."""


if __name__ == "__main__":
    sys.exit(main())
