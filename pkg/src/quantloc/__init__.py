"""Quantizer design by weighted multicenter optimization, with Lyapunov
certificates and simulation for quantized linear feedback."""

from .centers import (
    CenterResult,
    Circle,
    SeparationError,
    WeightScheme,
    eval_cell_cost,
    linear_map_center,
    min_enclosing_circle,
    radially_weighted_center,
    spherical_center,
    two_vertex_candidate,
    weighted_center,
)
from .control import (
    CertificateReport,
    CertificationError,
    CertParams,
    LinearPlant,
    LyapunovCert,
    MonotoneFn,
    certify,
    certify_nonlinear,
    destabilization_measure,
    lyapunov_solve,
    reduce_pbk_problem,
)
from .geometry import (
    DomainSpec,
    GeometryError,
    Partition,
    Polygon,
    convex_hull,
    polygonalize_domain,
    voronoi_cells,
)
from .lloyd import (
    LloydReport,
    QuantizerDesign,
    cost,
    design_from_points,
    init_points,
    lloyd_run,
    lloyd_step,
    sukharev_bounds,
)
from .quantizer import (
    ProductQuantizer,
    RadialQuantizer,
    SaturationError,
    SphericalQuantizer,
    binary_ball_quantizer,
    build_product,
    log_radial,
    quantize,
    quantize_many,
    scale_design,
)
from .render import render_svg
from .sim import (
    Trajectory,
    ZoomSchedule,
    sample_in_level_set,
    simulate_batch,
    simulate_dynamic,
    simulate_static,
    verify_certificate,
)

__version__ = "0.1.0"
