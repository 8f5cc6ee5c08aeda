#!/usr/bin/env python3
"""Identity backend: returns the precomputed mask named in the request.

Lets datasets that already ship segmentation masks flow through the same
backend protocol as live models.
"""

import sys

from hipmetrics.backend import read_request_from_stdin, write_response_to_stdout

VERSION = "precomputed/0.1.0"


def main() -> int:
    request = read_request_from_stdin()
    mask_path = request.get("mask_path")
    if not mask_path:
        sys.stderr.write("precomputed backend needs request.mask_path\n")
        return 3
    confidence = {name: 1.0 for name in request.get("label_map", {}).values()}
    write_response_to_stdout(mask_path, confidence, VERSION)
    return 0


if __name__ == "__main__":
    sys.exit(main())
