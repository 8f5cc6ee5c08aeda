"""Rule-based hip dysplasia measurements from segmentation masks.

Ultrasound: alpha angle and femoral head coverage from ilium/acetabulum and
femoral-head masks. X-ray: acetabular index, Wiberg angle and IHDI grade
from per-side triangle masks. Includes synthetic phantom oracles, an
external-segmenter process protocol, and ICC/classification validation
statistics. All measurement outputs are experimental.
"""

__version__ = "0.1.0"

from .geometry import (  # noqa: F401
    Circle2,
    Contour,
    Line2,
    Point2,
    angle_between_deg,
    corner_of_max_curvature,
    fit_circle,
    fit_line_tls,
    signed_distance,
)
from .raster import (  # noqa: F401
    BitMask,
    LabelMask,
    largest_component,
    load_label_mask,
    save_label_mask,
    select_label,
    trace_contour,
)
from .stats import (  # noqa: F401
    ConfusionMatrix,
    IccKind,
    IccResult,
    RatingTable,
    confusion,
    f_cdf,
    f_quantile,
    icc_single,
    precision_recall_f1,
    screening_binarize,
)
from .ultrasound import UsConfig, UsLandmarks, UsMeasurements, analyze_us  # noqa: F401
from .xray import Side, SideLandmarks, XrayMeasurements, analyze_xray  # noqa: F401
