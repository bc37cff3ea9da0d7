"""Horizon-first vanishing point and horizon line detection."""

from .detector import (
    DetectionResult,
    HorizonCandidate,
    MwisResult,
    VPGraph,
    detect,
    init_vps,
    m_step,
    mwis_ring,
    refine_vps,
    sample_candidates,
    score_candidate,
)
from .evaluation import (
    BenchmarkReport,
    ErrorRecord,
    auc,
    cumulative_histogram,
    horizon_error,
    run_benchmark,
)
from .geometry import (
    CameraFrame,
    DegenerateGeometryError,
    angle,
    canonical,
    consistency,
    consistency_matrix,
    join,
    lift_point,
    line_from_image,
    line_to_image,
    meet,
    point_to_image,
)
from .params import AlgorithmParams
from .prior import (
    CategoricalPrior,
    HorizonParam,
    HorizonPrior,
    UnsupportedModeError,
    fit_gaussian,
    horizon_image_line,
    horizon_param_from_line,
    load_prior,
    map_estimate,
    no_context_prior,
    squash,
    unsquash,
    write_prior,
)
from .segments import (
    LineSegment,
    SegmentFileError,
    SegmentSet,
    detect_segments,
    filter_for_horizon,
    load_segments,
    read_pgm,
    save_segments,
    select_vertical_candidates,
    write_pgm,
)
from .synth import (
    SyntheticScene,
    export_scene,
    horizon_from_camera,
    make_scene,
    write_scene_prior,
)
from .zenith import ZenithResult, detect_zenith, initial_zenith_direction

__version__ = "0.1.0"
