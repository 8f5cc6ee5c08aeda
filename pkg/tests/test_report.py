import json

from hipmetrics.phantom import gen_us_phantom, gen_xray_phantom, sample_us_spec, sample_xray_spec
from hipmetrics.report import (
    us_overlay_svg,
    us_report_dict,
    write_batch_summary,
    write_json_atomic,
    xray_overlay_svg,
    xray_report_dict,
)
from hipmetrics.ultrasound import analyze_us
from hipmetrics.xray import analyze_xray


def us_result(seed=1):
    mask, _ = gen_us_phantom(sample_us_spec(seed))
    return mask, analyze_us(mask)


class TestUsReport:
    def test_ok_schema(self):
        mask, result = us_result()
        doc = us_report_dict("us-0001", result)
        assert doc["status"] == 1
        assert doc["experimental"] is True
        assert set(doc["landmarks"]) == {
            "baseline_superior", "rim", "apex", "head_center",
            "head_lateral", "head_radius"}
        assert isinstance(doc["measurements"]["alpha_deg"], float)
        # serialization granularity: 0.1 degree, 0.1%
        assert round(doc["measurements"]["alpha_deg"], 1) == doc["measurements"]["alpha_deg"]
        assert round(doc["measurements"]["coverage"], 3) == doc["measurements"]["coverage"]

    def test_status0_has_no_measurements(self):
        from hipmetrics.ultrasound import UsCaseResult, UsMeasurements
        doc = us_report_dict(
            "c", UsCaseResult(UsMeasurements(status=0, diagnostic="boom")))
        assert doc["status"] == 0
        assert "measurements" not in doc
        assert doc["diagnostic"] == "boom"

    def test_overlay_contains_landmarks_and_text(self):
        mask, result = us_result()
        svg = us_overlay_svg(result, mask.width, mask.height)
        for name in ("baseline_superior", "rim", "apex", "head_center",
                     "head_lateral"):
            assert name in svg
        assert "alpha" in svg and "(experimental)" in svg
        assert svg.startswith("<svg")

    def test_overlay_references_source_image(self):
        mask, result = us_result()
        svg = us_overlay_svg(result, mask.width, mask.height,
                             image_href="images/us.png")
        assert '<image href="images/us.png"' in svg


class TestXrayReport:
    def test_sides_and_colors(self):
        mask, _ = gen_xray_phantom(sample_xray_spec(3))
        result = analyze_xray(mask)
        doc = xray_report_dict("xr-0001", result)
        assert set(doc["sides"]) == {"left", "right"}
        assert doc["sides"]["left"]["measurements"]["ihdi_grade"] in (1, 2, 3, 4)
        svg = xray_overlay_svg(result, mask.width, mask.height)
        # landmark colour scheme: inner yellow, outer blue, h green
        assert "#f2c200" in svg and "#2f6fde" in svg and "#1faa3c" in svg
        assert "IHDI" in svg


class TestDeterminism:
    def test_json_bytes_stable(self, tmp_path):
        mask, result = us_result(seed=5)
        doc = us_report_dict("case", result)
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        write_json_atomic(p1, doc)
        write_json_atomic(p2, doc)
        assert p1.read_bytes() == p2.read_bytes()

    def test_no_timestamps_in_reports(self, tmp_path):
        mask, result = us_result(seed=6)
        doc = us_report_dict("case", result)
        text = json.dumps(doc)
        assert "time" not in text.lower()
        assert "date" not in text.lower()


class TestBatchSummary:
    def test_lexicographic_case_order(self, tmp_path):
        write_batch_summary(tmp_path, {"b": 1, "a": 0, "c": 1}, 2)
        doc = json.loads((tmp_path / "batch.json").read_text())
        assert [c["case_id"] for c in doc["cases"]] == ["a", "b", "c"]
        assert doc["n_failed"] == 1
        assert doc["exit_code"] == 2
