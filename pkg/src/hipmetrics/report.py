"""Report files: per-case JSON + SVG overlay, batch summary, validation JSON.

All writes are atomic (temp file + rename) and byte-deterministic: keys are
sorted, floats are rounded at fixed precision (angles to 0.1 degree,
coverage to 0.1%, coordinates to 0.01 px), and no timestamps appear in any
report. Wall-clock information goes to the separate run log.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Optional

from .errors import IoError
from .ultrasound import UsCaseResult
from .xray import Side, XrayCaseResult

REPORT_SCHEMA_VERSION = 1

_LANDMARK_COLORS = {"inner": "#f2c200", "outer": "#2f6fde", "h_point": "#1faa3c"}


def round_angle(v: Optional[float]) -> Optional[float]:
    return None if v is None else round(float(v), 1)


def round_fraction(v: Optional[float]) -> Optional[float]:
    return None if v is None else round(float(v), 3)


def _xy(p) -> list[float]:
    return [round(p.x, 2), round(p.y, 2)]


def us_report_dict(case_id: str, result: UsCaseResult) -> dict:
    m = result.measurements
    doc = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "case_id": case_id,
        "modality": "ultrasound",
        "status": m.status,
        "experimental": True,
    }
    if m.status != 1:
        doc["diagnostic"] = m.diagnostic
        return doc
    lm = result.landmarks
    doc["measurements"] = {
        "alpha_deg": round_angle(m.alpha_deg),
        "coverage": round_fraction(m.coverage),
    }
    if m.graf_class is not None:
        doc["measurements"]["graf_class"] = m.graf_class
    doc["landmarks"] = {
        "baseline_superior": _xy(lm.baseline_superior),
        "rim": _xy(lm.rim),
        "apex": _xy(lm.apex),
        "head_center": _xy(lm.head_center),
        "head_lateral": _xy(lm.head_lateral),
        "head_radius": round(lm.head_radius, 2),
    }
    return doc


def xray_report_dict(case_id: str, result: XrayCaseResult) -> dict:
    mm = result.measurements
    doc = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "case_id": case_id,
        "modality": "xray",
        "status": mm.status,
        "experimental": True,
        "sides": {},
    }
    for side in (Side.LEFT, Side.RIGHT):
        sm = mm.left if side is Side.LEFT else mm.right
        entry: dict = {"status": sm.status}
        if sm.status != 1:
            entry["diagnostic"] = sm.diagnostic
        else:
            entry["measurements"] = {
                "acetabular_index_deg": round_angle(sm.acetabular_index_deg),
                "wiberg_deg": round_angle(sm.wiberg_deg),
                "ihdi_grade": sm.ihdi_grade,
            }
            lm = result.landmarks.get(side)
            if lm is not None:
                entry["landmarks"] = {
                    "inner": _xy(lm.inner),
                    "outer": _xy(lm.outer),
                    "h_point": _xy(lm.h_point),
                }
        doc["sides"][side.value] = entry
    return doc


def write_json_atomic(path, doc) -> None:
    """Sorted-key JSON written via temp file + rename."""
    write_text_atomic(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_text_atomic(path, text: str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def us_overlay_svg(result: UsCaseResult, width: int, height: int,
                   image_href: Optional[str] = None) -> str:
    """Overlay for an ultrasound case: landmarks, baseline, roof, readout."""
    parts = [_svg_open(width, height, image_href)]
    m = result.measurements
    if m.status == 1 and result.landmarks is not None:
        lm = result.landmarks
        baseline, roof = result.baseline, result.roof
        parts.append(_svg_line_through(baseline, width, height,
                                       stroke="#ffffff", dash=None))
        parts.append(_svg_line_through(roof, width, height,
                                       stroke="#ffd24d", dash="6 4"))
        parts.append(_svg_circle(lm.head_center, lm.head_radius,
                                 stroke="#65c8ff", fill="none"))
        for name, p in (("baseline_superior", lm.baseline_superior),
                        ("rim", lm.rim), ("apex", lm.apex),
                        ("head_center", lm.head_center),
                        ("head_lateral", lm.head_lateral)):
            parts.append(_svg_landmark(p, name, "#ff5050"))
        text = (f"alpha {round_angle(m.alpha_deg)} deg  "
                f"coverage {round(100.0 * m.coverage, 1)}%")
        if m.graf_class is not None:
            text += f"  graf {m.graf_class}"
        text += "  (experimental)"
    else:
        text = f"status 0: {m.diagnostic} (experimental)"
    parts.append(_svg_text(10, height - 12, text))
    parts.append("</svg>\n")
    return "\n".join(parts)


def xray_overlay_svg(result: XrayCaseResult, width: int, height: int,
                     image_href: Optional[str] = None) -> str:
    """Overlay for an X-ray case: triangles, six landmarks, reference lines."""
    parts = [_svg_open(width, height, image_href)]
    mm = result.measurements
    pc = result.construction
    if pc is not None:
        parts.append(_svg_line_through(pc.hilgenreiner, width, height,
                                       stroke="#ffffff", dash=None))
        for line in (pc.perkin_left, pc.perkin_right):
            parts.append(_svg_line_through(line, width, height,
                                           stroke="#b0b0b0", dash="8 5"))
        for line in (pc.diagonal_left, pc.diagonal_right):
            parts.append(_svg_line_through(line, width, height,
                                           stroke="#d98fff", dash="3 5"))
    rows = []
    for side in (Side.LEFT, Side.RIGHT):
        lm = result.landmarks.get(side)
        sm = mm.left if side is Side.LEFT else mm.right
        if lm is not None:
            tri = f"{lm.inner.x:.1f},{lm.inner.y:.1f} " \
                  f"{lm.outer.x:.1f},{lm.outer.y:.1f} " \
                  f"{lm.h_point.x:.1f},{lm.h_point.y:.1f}"
            parts.append(f'<polygon points="{tri}" fill="none" '
                         f'stroke="#888888" stroke-width="1.5"/>')
            for name, p in (("inner", lm.inner), ("outer", lm.outer),
                            ("h_point", lm.h_point)):
                parts.append(_svg_landmark(p, f"{side.value}_{name}",
                                           _LANDMARK_COLORS[name]))
        if sm.status == 1:
            rows.append(f"{side.value}: AI {round_angle(sm.acetabular_index_deg)} deg, "
                        f"wiberg {round_angle(sm.wiberg_deg)} deg, "
                        f"IHDI {sm.ihdi_grade} (experimental)")
        else:
            rows.append(f"{side.value}: status 0 ({sm.diagnostic})")
    for i, row in enumerate(rows):
        parts.append(_svg_text(10, height - 12 - 18 * (len(rows) - 1 - i), row))
    parts.append("</svg>\n")
    return "\n".join(parts)


def _svg_open(width: int, height: int, image_href: Optional[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" '
            f'width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">')
    if image_href:
        head += (f'\n<image href="{image_href}" x="0" y="0" '
                 f'width="{width}" height="{height}"/>')
    else:
        head += f'\n<rect width="{width}" height="{height}" fill="#101418"/>'
    return head


def _svg_line_through(line, width: int, height: int, stroke: str,
                      dash: Optional[str]) -> str:
    # extend well past the frame; the viewBox clips
    span = float(width + height)
    x1 = line.anchor.x - span * line.direction[0]
    y1 = line.anchor.y - span * line.direction[1]
    x2 = line.anchor.x + span * line.direction[0]
    y2 = line.anchor.y + span * line.direction[1]
    dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
    return (f'<line x1="{x1:.1f}" y1="{y1:.1f}" x2="{x2:.1f}" y2="{y2:.1f}" '
            f'stroke="{stroke}" stroke-width="1.5"{dash_attr}/>')


def _svg_circle(center, radius: float, stroke: str, fill: str) -> str:
    return (f'<circle cx="{center.x:.1f}" cy="{center.y:.1f}" r="{radius:.1f}" '
            f'stroke="{stroke}" fill="{fill}" stroke-width="1.5"/>')


def _svg_landmark(p, label: str, color: str) -> str:
    return (f'<g><circle cx="{p.x:.1f}" cy="{p.y:.1f}" r="4" fill="{color}"/>'
            f'<text x="{p.x + 6:.1f}" y="{p.y - 6:.1f}" font-size="11" '
            f'fill="{color}" font-family="monospace">{label}</text></g>')


def _svg_text(x: float, y: float, text: str) -> str:
    return (f'<text x="{x:.1f}" y="{y:.1f}" font-size="13" fill="#e8e8e8" '
            f'font-family="monospace">{_escape(text)}</text>')


def _escape(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;"))


def write_case_report(out_dir, case_id: str, report: dict, overlay: str) -> None:
    case_dir = Path(out_dir) / case_id
    write_json_atomic(case_dir / "report.json", report)
    write_text_atomic(case_dir / "overlay.svg", overlay)


def write_batch_summary(out_dir, statuses: dict, exit_code: int) -> None:
    """Aggregate for an analyze run: case ids in lexicographic order."""
    doc = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "cases": [{"case_id": cid, "status": statuses[cid]}
                  for cid in sorted(statuses)],
        "n_cases": len(statuses),
        "n_failed": sum(1 for s in statuses.values() if s != 1),
        "exit_code": exit_code,
    }
    write_json_atomic(Path(out_dir) / "batch.json", doc)
