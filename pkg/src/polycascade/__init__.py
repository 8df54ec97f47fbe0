"""Box -> Bezier -> polygon cascade kernels for curved text detection."""

from .geometry import (
    DEFAULT_S,
    BezierCurve,
    BezierDelta,
    Box,
    DegenerateGeometryError,
    TextPolygon,
    bernstein_basis,
    bezier_from_box,
    box_to_poly,
    buffer_polyline,
    polygon_width,
    sample_polyline,
)
from .refine import (
    BoxDelta,
    CascadeConfig,
    NotRepresentableError,
    apply_box_delta,
    apply_poly_delta,
    from_center_diff,
    inverse_poly_delta,
    run_cascade,
    to_center_diff,
)

__version__ = "0.1.0"
