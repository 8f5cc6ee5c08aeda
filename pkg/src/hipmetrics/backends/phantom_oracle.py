#!/usr/bin/env python3
"""Oracle backend: synthesizes a phantom mask for the requested case.

The phantom spec is drawn deterministically from ``params.seed`` (or a hash
of the case id), and the exact ground truth is written next to the mask so
callers can verify the analysis against it.
"""

import sys
import zlib
from pathlib import Path

from hipmetrics.backend import read_request_from_stdin, write_response_to_stdout
from hipmetrics.phantom import (
    gen_us_phantom,
    gen_xray_phantom,
    sample_us_spec,
    sample_xray_spec,
    write_truth_json,
)
from hipmetrics.raster import save_label_mask

VERSION = "phantom-oracle/0.1.0"


def main() -> int:
    request = read_request_from_stdin()
    case_id = request.get("case_id", "case")
    modality = request.get("modality")
    out_dir = Path(request.get("output_dir", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = request.get("params", {}).get("seed")
    if seed is None:
        seed = zlib.crc32(case_id.encode("utf-8"))

    if modality == "ultrasound":
        mask, truth = gen_us_phantom(sample_us_spec(int(seed)))
    elif modality == "xray":
        mask, truth = gen_xray_phantom(sample_xray_spec(int(seed)))
    else:
        sys.stderr.write(f"unknown modality {modality!r}\n")
        return 3

    mask_path = out_dir / f"{case_id}_mask.png"
    save_label_mask(mask, mask_path)
    write_truth_json(truth, out_dir / f"{case_id}_truth.json")
    confidence = {name: 1.0 for name in request.get("label_map", {}).values()}
    write_response_to_stdout(str(mask_path), confidence, VERSION)
    return 0


if __name__ == "__main__":
    sys.exit(main())
