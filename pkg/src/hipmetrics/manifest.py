"""Dataset manifest: one JSON document binding cases to masks and expert values.

Schema (UTF-8 JSON)::

    {
      "schema_version": 1,
      "cases": [
        {
          "case_id": "us-0001",
          "modality": "ultrasound",            # or "xray"
          "image_path": "images/us-0001.png",  # optional
          "mask_path": "masks/us-0001.png",    # optional if a backend runs
          "label_map": {"1": "ilium_acetabulum", "2": "femoral_head"},
          "expert": {"alpha_deg": 61.2, "coverage": 0.57}  # optional
        }
      ]
    }

Relative paths resolve against the manifest's directory. X-ray expert values
nest per side: ``{"left": {"acetabular_index_deg": ..., "wiberg_deg": ...,
"ihdi_grade": ...}, "right": {...}}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import DuplicateCaseId, IoError, ParseError

MODALITIES = ("ultrasound", "xray")
MANIFEST_SCHEMA_VERSION = 1

_US_EXPERT_FIELDS = ("alpha_deg", "coverage")
_XRAY_EXPERT_FIELDS = ("acetabular_index_deg", "wiberg_deg", "ihdi_grade")


@dataclass(frozen=True)
class CaseRecord:
    case_id: str
    modality: str
    label_map: dict
    image_path: Optional[str] = None
    mask_path: Optional[str] = None
    expert: Optional[dict] = None

    def label_for(self, structure: str) -> Optional[int]:
        for label, name in self.label_map.items():
            if name == structure:
                return int(label)
        return None


def load_manifest(path) -> list[CaseRecord]:
    """Parse and validate a manifest file."""
    path = Path(path)
    if not path.is_file():
        raise IoError(f"manifest not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot parse manifest {path}: {exc}") from exc
    if not isinstance(doc, dict) or "cases" not in doc:
        raise ParseError("manifest must be an object with a 'cases' array",
                         field="cases")
    cases = doc["cases"]
    if not isinstance(cases, list):
        raise ParseError("'cases' must be an array", field="cases")

    records: list[CaseRecord] = []
    seen: set[str] = set()
    base = path.parent
    for i, raw in enumerate(cases):
        rec = _parse_case(raw, i, base)
        if rec.case_id in seen:
            raise DuplicateCaseId(f"duplicate case_id {rec.case_id!r}",
                                  field=f"cases[{i}].case_id")
        seen.add(rec.case_id)
        records.append(rec)
    return records


def _parse_case(raw, index: int, base: Path) -> CaseRecord:
    loc = f"cases[{index}]"
    if not isinstance(raw, dict):
        raise ParseError(f"{loc} must be an object", field=loc)
    case_id = raw.get("case_id")
    if not isinstance(case_id, str) or not case_id:
        raise ParseError(f"{loc}.case_id must be a non-empty string",
                         field=f"{loc}.case_id")
    modality = raw.get("modality")
    if modality not in MODALITIES:
        raise ParseError(
            f"{loc}.modality must be one of {MODALITIES}, got {modality!r}",
            field=f"{loc}.modality")
    label_map_raw = raw.get("label_map")
    if not isinstance(label_map_raw, dict) or not label_map_raw:
        raise ParseError(f"{loc}.label_map must be a non-empty object",
                         field=f"{loc}.label_map")
    label_map = {}
    for k, v in label_map_raw.items():
        try:
            label = int(k)
        except (TypeError, ValueError):
            raise ParseError(f"{loc}.label_map key {k!r} is not an integer",
                             field=f"{loc}.label_map") from None
        if not 1 <= label <= 255 or not isinstance(v, str):
            raise ParseError(f"{loc}.label_map entry {k!r} invalid",
                             field=f"{loc}.label_map")
        label_map[label] = v

    image_path = _resolve(raw.get("image_path"), base, f"{loc}.image_path")
    mask_path = _resolve(raw.get("mask_path"), base, f"{loc}.mask_path")
    expert = raw.get("expert")
    if expert is not None:
        _validate_expert(expert, modality, loc)
    return CaseRecord(case_id=case_id, modality=modality, label_map=label_map,
                      image_path=image_path, mask_path=mask_path, expert=expert)


def _resolve(value, base: Path, field_name: str) -> Optional[str]:
    if value is None:
        return None
    if not isinstance(value, str) or not value:
        raise ParseError(f"{field_name} must be a non-empty string",
                         field=field_name)
    p = Path(value)
    return str(p if p.is_absolute() else (base / p))


def _validate_expert(expert, modality: str, loc: str) -> None:
    if not isinstance(expert, dict):
        raise ParseError(f"{loc}.expert must be an object", field=f"{loc}.expert")
    if modality == "ultrasound":
        for k in expert:
            if k not in _US_EXPERT_FIELDS:
                raise ParseError(f"{loc}.expert.{k} is not an ultrasound field",
                                 field=f"{loc}.expert.{k}")
            if not isinstance(expert[k], (int, float)):
                raise ParseError(f"{loc}.expert.{k} must be numeric",
                                 field=f"{loc}.expert.{k}")
        return
    for side in expert:
        if side not in ("left", "right"):
            raise ParseError(f"{loc}.expert.{side} is not an x-ray side",
                             field=f"{loc}.expert.{side}")
        values = expert[side]
        if not isinstance(values, dict):
            raise ParseError(f"{loc}.expert.{side} must be an object",
                             field=f"{loc}.expert.{side}")
        for k, v in values.items():
            if k not in _XRAY_EXPERT_FIELDS:
                raise ParseError(f"{loc}.expert.{side}.{k} unknown",
                                 field=f"{loc}.expert.{side}.{k}")
            if not isinstance(v, (int, float)):
                raise ParseError(f"{loc}.expert.{side}.{k} must be numeric",
                                 field=f"{loc}.expert.{side}.{k}")


def save_manifest(records, path) -> None:
    """Serialize records back to manifest JSON (absolute paths preserved)."""
    path = Path(path)
    cases = []
    for rec in records:
        case = {
            "case_id": rec.case_id,
            "modality": rec.modality,
            "label_map": {str(k): v for k, v in sorted(rec.label_map.items())},
        }
        if rec.image_path is not None:
            case["image_path"] = rec.image_path
        if rec.mask_path is not None:
            case["mask_path"] = rec.mask_path
        if rec.expert is not None:
            case["expert"] = rec.expert
        cases.append(case)
    doc = {"schema_version": MANIFEST_SCHEMA_VERSION, "cases": cases}
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
