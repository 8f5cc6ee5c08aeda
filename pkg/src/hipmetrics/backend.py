"""Child-process protocol for external segmentation backends.

A backend is an executable. Per case the runner spawns it, writes exactly
one JSON request document to its standard input, and reads exactly one JSON
response document from its standard output. Nonzero exit, malformed output,
or a timeout is a BackendFailure, which the pipeline records as status 0
for that case without aborting the batch.

Request::

    {"schema_version": 1, "case_id": "...", "modality": "ultrasound",
     "image_path": "... or null", "output_dir": "...",
     "mask_path": "... or null",          # hint for precomputed masks
     "label_map": {"1": "ilium_acetabulum", ...},
     "params": {}}

Response::

    {"schema_version": 1, "mask_path": "...",
     "confidence": {"ilium_acetabulum": 0.98, ...},
     "backend_version": "precomputed/0.1"}
"""

from __future__ import annotations

import json
import subprocess
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import BackendFailure

PROTOCOL_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class BackendRequest:
    case_id: str
    modality: str
    output_dir: str
    image_path: Optional[str] = None
    mask_path: Optional[str] = None
    label_map: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({
            "schema_version": PROTOCOL_SCHEMA_VERSION,
            "case_id": self.case_id,
            "modality": self.modality,
            "image_path": self.image_path,
            "output_dir": self.output_dir,
            "mask_path": self.mask_path,
            "label_map": {str(k): v for k, v in self.label_map.items()},
            "params": self.params,
        }, sort_keys=True)


@dataclass(frozen=True)
class BackendResponse:
    mask_path: str
    confidence: dict
    backend_version: str


def run_backend(exe, request: BackendRequest,
                timeout_s: float = 120.0) -> BackendResponse:
    """Spawn a backend process for one case and validate its response.

    ``exe`` is the backend executable; a ``.py`` path is run through the
    current interpreter. Raises BackendFailure with kind "exit", "parse" or
    "timeout".
    """
    exe = str(exe)
    cmd = [sys.executable, exe] if exe.endswith(".py") else [exe]
    try:
        proc = subprocess.run(
            cmd, input=request.to_json().encode("utf-8"),
            stdout=subprocess.PIPE, stderr=subprocess.PIPE,
            timeout=timeout_s)
    except subprocess.TimeoutExpired as exc:
        raise BackendFailure("timeout",
                             f"{exe} exceeded {timeout_s}s") from exc
    except OSError as exc:
        raise BackendFailure("exit", f"cannot spawn {exe}: {exc}") from exc
    if proc.returncode != 0:
        stderr = proc.stderr.decode("utf-8", "replace").strip()[-400:]
        raise BackendFailure("exit",
                             f"{exe} exited {proc.returncode}: {stderr}")
    return parse_backend_response(proc.stdout.decode("utf-8", "replace"),
                                  request)


def parse_backend_response(text: str, request: BackendRequest) -> BackendResponse:
    """Validate one response document against the request's label map."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BackendFailure("parse", f"response is not JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise BackendFailure("parse", "response must be a JSON object")
    mask_path = doc.get("mask_path")
    if not isinstance(mask_path, str) or not mask_path:
        raise BackendFailure("parse", "response lacks mask_path")
    if not Path(mask_path).is_file():
        raise BackendFailure("parse", f"response mask missing: {mask_path}")
    confidence = doc.get("confidence", {})
    if not isinstance(confidence, dict):
        raise BackendFailure("parse", "confidence must be an object")
    structures = set(request.label_map.values())
    for name, value in confidence.items():
        if structures and name not in structures:
            raise BackendFailure("parse",
                                 f"confidence for unknown structure {name!r}")
        if not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
            raise BackendFailure("parse",
                                 f"confidence for {name!r} outside [0, 1]")
    version = doc.get("backend_version")
    if not isinstance(version, str) or not version:
        raise BackendFailure("parse", "response lacks backend_version")
    return BackendResponse(mask_path=mask_path, confidence=dict(confidence),
                           backend_version=version)


def read_request_from_stdin() -> dict:
    """Helper for backend executables: read the single request document."""
    return json.loads(sys.stdin.read())


def write_response_to_stdout(mask_path: str, confidence: dict,
                             backend_version: str) -> None:
    """Helper for backend executables: emit the single response document."""
    sys.stdout.write(json.dumps({
        "schema_version": PROTOCOL_SCHEMA_VERSION,
        "mask_path": str(mask_path),
        "confidence": confidence,
        "backend_version": backend_version,
    }, sort_keys=True))
    sys.stdout.flush()
