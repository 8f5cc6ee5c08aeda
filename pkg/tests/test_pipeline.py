import json

import numpy as np
import pytest

from hipmetrics.backends import PRECOMPUTED_BACKEND
from hipmetrics.cli import main
from hipmetrics.errors import DegenerateVariance
from hipmetrics.pipeline import RunConfig, run_analyze
from hipmetrics.stats import IccKind, RatingTable, icc_single


@pytest.fixture(scope="module")
def xray_batch(tmp_path_factory):
    root = tmp_path_factory.mktemp("xrbatch")
    assert main(["phantom", "--modality", "xray", "--n", "5",
                 "--seed", "40", "--out", str(root / "ph")]) == 0
    return root


class TestXrayEndToEnd:
    def test_all_angle_metrics_reach_icc_098(self, xray_batch, tmp_path):
        manifest = str(xray_batch / "ph" / "manifest.json")
        out = tmp_path / "out"
        assert main(["analyze", "--manifest", manifest,
                     "--out", str(out)]) == 0
        assert main(["validate", "--manifest", manifest,
                     "--predictions", str(out),
                     "--out", str(tmp_path / "val")]) == 0
        doc = json.loads((tmp_path / "val" / "validation.json").read_text())
        for metric in ("acetabular_index_deg_left", "acetabular_index_deg_right",
                       "wiberg_deg_left", "wiberg_deg_right"):
            entry = doc["icc"][metric]
            assert entry["consistency"]["icc"] >= 0.98, metric
            assert entry["absolute_agreement"]["icc"] >= 0.98, metric
        for side in ("left", "right"):
            cls = doc["classification"][side]
            assert cls["binary_normal_vs_rest"]["f1"] == 1.0
            assert (tmp_path / "val" / "figures" /
                    f"confusion_ihdi_{side}.png").is_file()
        assert (tmp_path / "val" / "classification.csv").is_file()


class TestBackendDrivenAnalyze:
    def test_precomputed_backend_in_pipeline(self, xray_batch, tmp_path):
        manifest = str(xray_batch / "ph" / "manifest.json")
        out = tmp_path / "out"
        code = main(["analyze", "--manifest", manifest, "--out", str(out),
                     "--backend", PRECOMPUTED_BACKEND, "--workers", "2"])
        assert code == 0
        report = json.loads((out / "xr-0000" / "report.json").read_text())
        assert report["status"] == 1


class TestMixedManifest:
    def test_both_modalities_in_one_batch(self, tmp_path):
        assert main(["phantom", "--modality", "ultrasound", "--n", "3",
                     "--seed", "60", "--out", str(tmp_path / "us")]) == 0
        assert main(["phantom", "--modality", "xray", "--n", "3",
                     "--seed", "61", "--out", str(tmp_path / "xr")]) == 0
        merged = {
            "schema_version": 1,
            "cases": (json.loads((tmp_path / "us/manifest.json").read_text())["cases"]
                      + json.loads((tmp_path / "xr/manifest.json").read_text())["cases"]),
        }
        manifest = tmp_path / "manifest.json"
        manifest.write_text(json.dumps(merged))
        out = tmp_path / "out"
        assert main(["analyze", "--manifest", str(manifest),
                     "--out", str(out)]) == 0
        assert main(["validate", "--manifest", str(manifest),
                     "--predictions", str(out),
                     "--out", str(tmp_path / "val")]) == 0
        doc = json.loads((tmp_path / "val" / "validation.json").read_text())
        assert "alpha_deg" in doc["icc"]
        assert "acetabular_index_deg_left" in doc["icc"]

    def test_case_without_mask_source_is_partial_failure(self, tmp_path):
        assert main(["phantom", "--modality", "ultrasound", "--n", "2",
                     "--seed", "62", "--out", str(tmp_path / "ph")]) == 0
        doc = json.loads((tmp_path / "ph/manifest.json").read_text())
        del doc["cases"][0]["mask_path"]
        manifest = tmp_path / "m.json"
        manifest.write_text(json.dumps(doc))
        code = run_analyze(manifest, tmp_path / "out", RunConfig(),
                           echo=lambda *_: None)
        assert code == 2
        report = json.loads(
            (tmp_path / "out" / "us-0000" / "report.json").read_text())
        assert report["status"] == 0
        assert "no mask source" in report["diagnostic"]


class TestDegenerateVariance:
    def test_zero_case_variance_with_rater_offset(self):
        # rows identical, columns differ: consistency denominator is zero
        values = np.array([[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]])
        with pytest.raises(DegenerateVariance):
            icc_single(RatingTable(values), IccKind.CONSISTENCY)
        # agreement absorbs the column variance instead
        res = icc_single(RatingTable(values), IccKind.ABSOLUTE_AGREEMENT)
        assert res.icc == 0.0
