"""Backend executables shipped with the package.

``precomputed.py`` echoes the manifest's mask path; ``phantom_oracle.py``
generates a synthetic phantom for the case. Both speak the stdin/stdout
JSON protocol from :mod:`hipmetrics.backend` and can be addressed directly
by file path, e.g. ``--backend $(python -c 'import hipmetrics.backends as b,
os; print(os.path.join(os.path.dirname(b.__file__), "precomputed.py"))')``.
"""

from pathlib import Path

PRECOMPUTED_BACKEND = str(Path(__file__).parent / "precomputed.py")
PHANTOM_ORACLE_BACKEND = str(Path(__file__).parent / "phantom_oracle.py")
