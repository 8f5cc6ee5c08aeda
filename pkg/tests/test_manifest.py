import json

import pytest

from hipmetrics.errors import DuplicateCaseId, IoError, ParseError
from hipmetrics.manifest import CaseRecord, load_manifest, save_manifest


def write_manifest(tmp_path, doc):
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(doc))
    return path


def two_case_doc():
    return {
        "schema_version": 1,
        "cases": [
            {
                "case_id": "us-0001",
                "modality": "ultrasound",
                "mask_path": "masks/us-0001.png",
                "label_map": {"1": "ilium_acetabulum", "2": "femoral_head"},
                "expert": {"alpha_deg": 61.0, "coverage": 0.55},
            },
            {
                "case_id": "xr-0001",
                "modality": "xray",
                "mask_path": "/abs/xr-0001.png",
                "label_map": {"1": "left_triangle", "2": "right_triangle"},
                "expert": {"left": {"acetabular_index_deg": 24.0,
                                    "wiberg_deg": 21.0, "ihdi_grade": 1}},
            },
        ],
    }


class TestLoadManifest:
    def test_two_cases_parse(self, tmp_path):
        records = load_manifest(write_manifest(tmp_path, two_case_doc()))
        assert [r.case_id for r in records] == ["us-0001", "xr-0001"]
        assert records[0].label_map == {1: "ilium_acetabulum", 2: "femoral_head"}

    def test_relative_paths_resolve_against_manifest_dir(self, tmp_path):
        records = load_manifest(write_manifest(tmp_path, two_case_doc()))
        assert records[0].mask_path == str(tmp_path / "masks/us-0001.png")
        assert records[1].mask_path == "/abs/xr-0001.png"

    def test_duplicate_case_id(self, tmp_path):
        doc = two_case_doc()
        doc["cases"][1]["case_id"] = "us-0001"
        with pytest.raises(DuplicateCaseId) as err:
            load_manifest(write_manifest(tmp_path, doc))
        assert "us-0001" in str(err.value)

    def test_unknown_modality_names_field(self, tmp_path):
        doc = two_case_doc()
        doc["cases"][0]["modality"] = "mri"
        with pytest.raises(ParseError) as err:
            load_manifest(write_manifest(tmp_path, doc))
        assert "modality" in str(err.value)

    def test_bad_label_map(self, tmp_path):
        doc = two_case_doc()
        doc["cases"][0]["label_map"] = {"zero": "x"}
        with pytest.raises(ParseError):
            load_manifest(write_manifest(tmp_path, doc))

    def test_bad_expert_field(self, tmp_path):
        doc = two_case_doc()
        doc["cases"][0]["expert"] = {"beta_deg": 1.0}
        with pytest.raises(ParseError):
            load_manifest(write_manifest(tmp_path, doc))

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoError):
            load_manifest(tmp_path / "nope.json")

    def test_not_json(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text("{bad")
        with pytest.raises(ParseError):
            load_manifest(path)


class TestRoundTrip:
    def test_load_save_load_identity(self, tmp_path):
        records = load_manifest(write_manifest(tmp_path, two_case_doc()))
        out = tmp_path / "copy" / "manifest.json"
        save_manifest(records, out)
        again = load_manifest(out)
        assert again == records

    def test_save_from_records(self, tmp_path):
        rec = CaseRecord(case_id="c1", modality="ultrasound",
                         label_map={1: "ilium_acetabulum", 2: "femoral_head"},
                         mask_path=str(tmp_path / "m.png"))
        path = tmp_path / "m.json"
        save_manifest([rec], path)
        assert load_manifest(path) == [rec]
