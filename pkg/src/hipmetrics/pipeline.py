"""Batch orchestration: analyze cases in parallel, then validate.

Per-case work is pure and touches only that case's output directory, so a
worker pool of any size produces byte-identical report trees; the aggregate
files are written once after a deterministic case-id-ordered merge.
Timestamps go only to ``run.log``.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import figures, report
from .backend import BackendRequest, run_backend
from .errors import BackendFailure, IoError
from .manifest import CaseRecord, load_manifest
from .raster import load_label_mask
from .stats import (
    ABNORMAL,
    IccKind,
    NORMAL,
    RatingTable,
    confusion,
    icc_single,
    precision_recall_f1,
    screening_binarize,
)
from .ultrasound import UsCaseResult, UsConfig, UsMeasurements, analyze_us
from .xray import Side, XrayCaseResult, analyze_xray

log = logging.getLogger("hipmetrics")

EXIT_OK = 0
EXIT_HARD_ERROR = 1
EXIT_PARTIAL = 2


@dataclass(frozen=True)
class RunConfig:
    """Run-wide knobs; field ranges are enforced at CLI parse time."""

    workers: int = 1
    curvature_window: int = 7
    graf_class_enabled: bool = False
    coverage_mode: str = "diameter"
    backend: Optional[str] = None
    timeout_s: float = 120.0
    alpha_level: float = 0.05

    def us_config(self) -> UsConfig:
        return UsConfig(curvature_window=self.curvature_window,
                        coverage_mode=self.coverage_mode,
                        graf_class_enabled=self.graf_class_enabled)


@dataclass
class CaseOutcome:
    case_id: str
    status: int
    summary: str
    report: dict
    overlay: str


def analyze_case(case: CaseRecord, config: RunConfig, out_dir: Path) -> CaseOutcome:
    """Run one case end to end; content failures become status-0 outcomes."""
    mask_path = case.mask_path
    if config.backend is not None:
        request = BackendRequest(
            case_id=case.case_id, modality=case.modality,
            output_dir=str(out_dir / case.case_id),
            image_path=case.image_path, mask_path=case.mask_path,
            label_map=case.label_map)
        try:
            response = run_backend(config.backend, request, config.timeout_s)
            mask_path = response.mask_path
        except BackendFailure as exc:
            return _failed_case(case, f"backend failure ({exc.kind}): {exc}")
    if mask_path is None:
        return _failed_case(case, "no mask source: case has no mask_path "
                                   "and no backend is configured")

    try:
        mask = load_label_mask(mask_path)
    except IoError as exc:
        return _failed_case(case, f"unreadable mask: {exc}")

    if case.modality == "ultrasound":
        result = analyze_us(mask, config.us_config(), case.label_map)
        doc = report.us_report_dict(case.case_id, result)
        overlay = report.us_overlay_svg(result, mask.width, mask.height,
                                        case.image_path)
        status = result.measurements.status
        summary = _us_summary(case.case_id, result.measurements)
    else:
        result = analyze_xray(mask, label_map=case.label_map)
        doc = report.xray_report_dict(case.case_id, result)
        overlay = report.xray_overlay_svg(result, mask.width, mask.height,
                                          case.image_path)
        status = result.measurements.status
        summary = _xray_summary(case.case_id, result)
    log.debug("case %s -> status %d", case.case_id, status)
    return CaseOutcome(case.case_id, status, summary, doc, overlay)


def _failed_case(case: CaseRecord, diagnostic: str) -> CaseOutcome:
    doc = {
        "schema_version": report.REPORT_SCHEMA_VERSION,
        "case_id": case.case_id,
        "modality": case.modality,
        "status": 0,
        "experimental": True,
        "diagnostic": diagnostic,
    }
    overlay = report.us_overlay_svg(
        UsCaseResult(UsMeasurements(status=0, diagnostic=diagnostic)), 320, 80) \
        if case.modality == "ultrasound" else \
        f'<svg xmlns="http://www.w3.org/2000/svg" width="320" height="80">' \
        f'<text x="8" y="40" font-size="12">status 0: {diagnostic}</text></svg>\n'
    return CaseOutcome(case.case_id, 0, f"{case.case_id}  status=0  {diagnostic}",
                       doc, overlay)


def _us_summary(case_id: str, m: UsMeasurements) -> str:
    if m.status != 1:
        return f"{case_id}  status=0  {m.diagnostic}"
    parts = [f"{case_id}  status=1",
             f"alpha={report.round_angle(m.alpha_deg)}deg (experimental)",
             f"coverage={round(100 * m.coverage, 1)}% (experimental)"]
    if m.graf_class is not None:
        parts.append(f"graf={m.graf_class} (experimental)")
    return "  ".join(parts)


def _xray_summary(case_id: str, result: XrayCaseResult) -> str:
    mm = result.measurements
    chunks = [f"{case_id}  status={mm.status}"]
    for side in (Side.LEFT, Side.RIGHT):
        sm = mm.left if side is Side.LEFT else mm.right
        if sm.status == 1:
            chunks.append(
                f"{side.value}: AI={report.round_angle(sm.acetabular_index_deg)}deg "
                f"wiberg={report.round_angle(sm.wiberg_deg)}deg "
                f"IHDI={sm.ihdi_grade} (experimental)")
        else:
            chunks.append(f"{side.value}: status=0")
    return "  ".join(chunks)


def run_analyze(manifest_path, out_dir, config: RunConfig,
                echo=print) -> int:
    """Analyze every manifest case; returns the documented exit code."""
    t_start = time.time()
    records = load_manifest(manifest_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    outcomes: dict[str, CaseOutcome] = {}
    if config.workers <= 1:
        for case in records:
            outcomes[case.case_id] = analyze_case(case, config, out_dir)
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            futures = {case.case_id: pool.submit(analyze_case, case, config, out_dir)
                       for case in records}
            for cid, fut in futures.items():
                outcomes[cid] = fut.result()

    statuses = {}
    log_lines = []
    for cid in sorted(outcomes):
        outcome = outcomes[cid]
        report.write_case_report(out_dir, cid, outcome.report, outcome.overlay)
        statuses[cid] = outcome.status
        echo(outcome.summary)
        log_lines.append(f"{cid} status={outcome.status}")

    n_failed = sum(1 for s in statuses.values() if s != 1)
    exit_code = EXIT_OK if n_failed == 0 else EXIT_PARTIAL
    report.write_batch_summary(out_dir, statuses, exit_code)
    _write_run_log(out_dir, log_lines, t_start)
    echo(f"analyzed {len(statuses)} case(s), {n_failed} failed -> exit {exit_code}")
    return exit_code


def _write_run_log(out_dir: Path, lines: list[str], t_start: float) -> None:
    # the one file allowed to differ between reruns
    stamp = time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(t_start))
    body = [f"started {stamp}", *lines,
            f"elapsed {time.time() - t_start:.2f}s"]
    (out_dir / "run.log").write_text("\n".join(body) + "\n", encoding="utf-8")


US_METRICS = ("alpha_deg", "coverage")
XRAY_METRICS = ("acetabular_index_deg", "wiberg_deg")
GRADE_CLASSES = (1, 2, 3, 4)


def run_validate(manifest_path, predictions_dir, out_dir,
                 config: RunConfig, echo=print) -> int:
    """Compare pipeline reports against expert values from the manifest.

    Emits validation.json, delimited tables (validation.csv,
    classification.csv) and PNG figures; prints an ICC/classification table.
    """
    records = load_manifest(manifest_path)
    predictions_dir = Path(predictions_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    predictions = {}
    for rec in records:
        path = predictions_dir / rec.case_id / "report.json"
        if path.is_file():
            predictions[rec.case_id] = json.loads(path.read_text(encoding="utf-8"))

    metric_pairs, grade_pairs, excluded = _collect_pairs(records, predictions)

    icc_block = {}
    for metric, pairs in sorted(metric_pairs.items()):
        entry = {"n": len(pairs), "excluded": excluded.get(metric, 0)}
        if len(pairs) < 3:
            entry["error"] = "insufficient data (need >= 3 scored cases)"
        else:
            table = RatingTable(np.array(pairs, dtype=float))
            for kind in (IccKind.CONSISTENCY, IccKind.ABSOLUTE_AGREEMENT):
                res = icc_single(table, kind, config.alpha_level)
                entry[kind.value] = {
                    "icc": round(res.icc, 4),
                    "ci_low": round(res.ci_low, 4),
                    "ci_high": round(res.ci_high, 4),
                    "alpha_level": res.alpha_level,
                }
        icc_block[metric] = entry

    classification_block = {}
    for side, pairs in sorted(grade_pairs.items()):
        if not pairs:
            continue
        truth_grades = [t for t, _, _ in pairs]
        scored = [(t, p) for t, p, s in pairs if s == 1 and p is not None]
        cm = confusion([p for _, p in scored], [t for t, _ in scored],
                       GRADE_CLASSES) if scored else None
        truth_bin = screening_binarize([(t, 1) for t in truth_grades])
        pred_bin = screening_binarize(
            [(p if s == 1 else None, s) for _, p, s in pairs])
        cm_bin = confusion(pred_bin, truth_bin, (NORMAL, ABNORMAL))
        binary = precision_recall_f1(cm_bin, "binary_positive", positive=ABNORMAL)
        entry = {
            "n": len(pairs),
            "binary_normal_vs_rest": {
                "precision": round(binary.precision, 4),
                "recall": round(binary.recall, 4),
                "f1": round(binary.f1, 4),
                "zero_division": binary.zero_division,
            },
            "binary_confusion": {
                "classes": [NORMAL, ABNORMAL],
                "counts": cm_bin.counts.tolist(),
            },
        }
        if cm is not None:
            macro = precision_recall_f1(cm, "macro")
            entry["per_class_macro"] = {
                "precision": round(macro.precision, 4),
                "recall": round(macro.recall, 4),
                "f1": round(macro.f1, 4),
                "zero_division": macro.zero_division,
            }
            entry["confusion"] = {
                "classes": list(GRADE_CLASSES),
                "counts": cm.counts.tolist(),
            }
            figures.confusion_heatmap(
                cm.counts, GRADE_CLASSES, f"IHDI confusion ({side})",
                out_dir / "figures" / f"confusion_ihdi_{side}.png")
        classification_block[side] = entry

    for metric, pairs in sorted(metric_pairs.items()):
        if len(pairs) >= 3:
            unit = "fraction" if metric == "coverage" else "deg"
            arr = np.array(pairs, dtype=float)
            figures.agreement_scatter(
                arr[:, 0], arr[:, 1], metric, unit,
                out_dir / "figures" / f"scatter_{metric}.png")

    doc = {
        "schema_version": report.REPORT_SCHEMA_VERSION,
        "tool": "hipmetrics",
        "version": _package_version(),
        "experimental": True,
        "n_manifest_cases": len(records),
        "n_predictions": len(predictions),
        "icc": icc_block,
        "classification": classification_block,
    }
    report.write_json_atomic(out_dir / "validation.json", doc)
    _write_validation_csv(out_dir / "validation.csv", icc_block)
    _write_classification_csv(out_dir / "classification.csv", classification_block)
    _print_tables(icc_block, classification_block, echo)
    return EXIT_OK


def _collect_pairs(records, predictions):
    """(expert, predicted) value pairs per metric plus grade/status triples."""
    metric_pairs: dict[str, list] = {m: [] for m in US_METRICS}
    for m in XRAY_METRICS:
        metric_pairs[f"{m}_left"] = []
        metric_pairs[f"{m}_right"] = []
    grade_pairs: dict[str, list] = {"left": [], "right": []}
    excluded: dict[str, int] = {}

    def exclude(metric):
        excluded[metric] = excluded.get(metric, 0) + 1

    for rec in records:
        if rec.expert is None:
            continue
        pred = predictions.get(rec.case_id)
        if rec.modality == "ultrasound":
            for metric in US_METRICS:
                if metric not in rec.expert:
                    continue
                if pred is None or pred.get("status") != 1:
                    exclude(metric)
                    continue
                value = pred.get("measurements", {}).get(metric)
                if value is None:
                    exclude(metric)
                else:
                    metric_pairs[metric].append((float(rec.expert[metric]),
                                                 float(value)))
            continue
        for side in ("left", "right"):
            expert_side = rec.expert.get(side)
            if expert_side is None:
                continue
            pred_side = (pred or {}).get("sides", {}).get(side, {})
            status = 1 if pred_side.get("status") == 1 else 0
            meas = pred_side.get("measurements", {})
            for metric in XRAY_METRICS:
                key = f"{metric}_{side}"
                if metric not in expert_side:
                    continue
                if status != 1 or meas.get(metric) is None:
                    exclude(key)
                else:
                    metric_pairs[key].append((float(expert_side[metric]),
                                              float(meas[metric])))
            if "ihdi_grade" in expert_side:
                grade_pairs[side].append((int(expert_side["ihdi_grade"]),
                                          meas.get("ihdi_grade"), status))
    metric_pairs = {k: v for k, v in metric_pairs.items()
                    if v or excluded.get(k)}
    return metric_pairs, grade_pairs, excluded


def _write_validation_csv(path, icc_block) -> None:
    rows = ["metric,n,excluded,icc_consistency,ci_low,ci_high,"
            "icc_absolute,ci_low,ci_high"]
    for metric, entry in sorted(icc_block.items()):
        if "error" in entry:
            rows.append(f"{metric},{entry['n']},{entry.get('excluded', 0)},"
                        ",,,,,")
            continue
        c = entry[IccKind.CONSISTENCY.value]
        a = entry[IccKind.ABSOLUTE_AGREEMENT.value]
        rows.append(
            f"{metric},{entry['n']},{entry.get('excluded', 0)},"
            f"{c['icc']},{c['ci_low']},{c['ci_high']},"
            f"{a['icc']},{a['ci_low']},{a['ci_high']}")
    report.write_text_atomic(path, "\n".join(rows) + "\n")


def _write_classification_csv(path, block) -> None:
    rows = ["side,task,precision,recall,f1,zero_division"]
    for side, entry in sorted(block.items()):
        if "error" in entry:
            rows.append(f"{side},,,,,")
            continue
        b = entry["binary_normal_vs_rest"]
        rows.append(f"{side},normal_vs_rest,{b['precision']},{b['recall']},"
                    f"{b['f1']},{b['zero_division']}")
        if "per_class_macro" in entry:
            m = entry["per_class_macro"]
            rows.append(f"{side},per_class_macro,{m['precision']},{m['recall']},"
                        f"{m['f1']},{m['zero_division']}")
    report.write_text_atomic(path, "\n".join(rows) + "\n")


def _print_tables(icc_block, classification_block, echo) -> None:
    echo("")
    echo(f"{'metric':<28}{'n':>5}  {'ICC consistency (95% CI)':<30}"
         f"{'ICC absolute (95% CI)':<30}")
    for metric, entry in sorted(icc_block.items()):
        if "error" in entry:
            echo(f"{metric:<28}{entry['n']:>5}  {entry['error']}")
            continue
        c = entry[IccKind.CONSISTENCY.value]
        a = entry[IccKind.ABSOLUTE_AGREEMENT.value]
        echo(f"{metric:<28}{entry['n']:>5}  "
             f"{c['icc']:.3f} ({c['ci_low']:.3f} to {c['ci_high']:.3f})"
             f"{'':<8}"
             f"{a['icc']:.3f} ({a['ci_low']:.3f} to {a['ci_high']:.3f})")
    for side, entry in sorted(classification_block.items()):
        if "error" in entry:
            echo(f"ihdi {side}: {entry['error']}")
            continue
        b = entry["binary_normal_vs_rest"]
        line = (f"ihdi {side}  normal-vs-rest: "
                f"F1 {b['f1']:.3f}  recall {b['recall']:.3f}  "
                f"precision {b['precision']:.3f}")
        if "per_class_macro" in entry:
            m = entry["per_class_macro"]
            line += (f"   per-class macro: F1 {m['f1']:.3f}  "
                     f"recall {m['recall']:.3f}  precision {m['precision']:.3f}")
        echo(line)
    echo("")


def _package_version() -> str:
    try:
        from importlib.metadata import version
        return version("hipmetrics")
    except Exception:
        return "0.1.0"
