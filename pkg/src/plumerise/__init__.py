"""Plume rise measurement from single-camera plume masks.

Core surface: camera geometry (geometry), the comparison parameterization
(briggs), mask analysis (pnm, mask_analysis), detection loss math
(rpn_loss), segmentation metrics (metrics), synthetic scenarios (synth),
and the batch pipeline (records, pipeline, cli).
"""

from .briggs import (
    AmbientConditions,
    NegativeBuoyancy,
    StackSpec,
    buoyancy_flux,
    density_ratio,
    momentum_flux,
    rise_at_distance,
    rise_iterative,
)
from .geometry import (
    CameraModel,
    DegenerateGeometry,
    GroundSolution,
    ImagePoint,
    NegativeRiseWarning,
    RiseResult,
    WindAngle,
    WindRecord,
    ground_sample_distance,
    ground_to_image,
    ground_width,
    locate_point_R,
    pixel_size,
    plume_rise,
    to_center_coords,
    to_raster_coords,
    wind_plane_angle,
)
from .mask_analysis import (
    AsymptoteFit,
    CenterlineProfile,
    EmptyPlume,
    FitDiverged,
    NotLeveled,
    PointR,
    VerticalPlume,
    attached_component,
    centerline,
    fit_asymptote,
    select_R,
)
from .metrics import ConfusionMatrix, DimensionMismatch, Scores, confusion, f1_from, scores
from .pnm import MalformedHeader, PlumeMask, TruncatedPayload, UnsupportedMaxval, encode_pnm, parse_pnm
from .records import (
    MeasurementRecord,
    NonMonotonicTimestamps,
    NoWindData,
    ParseError,
    WindTable,
    load_wind_csv,
    wind_at,
)
from .rpn_loss import (
    Box,
    PlumeDirection,
    SsePoint,
    box_parameterize,
    classify_direction,
    combined_reg_loss,
    rpn_reg_loss,
    smooth_l1,
    sse_loss,
    sse_point,
)
from .synth import OutOfFrame, SynthScenario, generate

__version__ = "0.1.0"
