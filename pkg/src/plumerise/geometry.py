"""Wind-constrained single-camera geometry.

Converts pixel locations of a plume feature into real-world distances and
heights using the camera optics, the known camera-to-stack distance, and the
wind direction measured at a nearby station. A single camera cannot
triangulate an evolving plume, so the wind direction is used to constrain the
depth of the plume line away from the stack.

COORDINATE CONVENTIONS
======================
Raster frame (masks, stack pixel):
  - origin at the top-left pixel, columns grow rightward, rows grow DOWNWARD

Image frame (all geometry in this module):
  - origin at the image center (pixel-center convention: column (W-1)/2,
    row (H-1)/2), x grows rightward, z grows UPWARD
  - conversion between the two frames happens exactly once, via
    to_center_coords / to_raster_coords

Ground frame (top view, camera at the origin):
  - X along the image plane (rightward in the image), positive with x
  - Y perpendicular to the image plane, positive from the stack TOWARD the
    camera (a point with Y > 0 is nearer than the stack plane)
  - the smokestack base sits on the optical axis at depth D

Angles:
  - phi: wind direction in degrees from north (wind FROM that azimuth)
  - theta_raw: phi minus the site's image-plane azimuth constant, kept signed
    for record output
  - theta_norm: theta_raw folded into [0, 90] degrees, the angle between the
    wind line and the image plane; this is what the trigonometry consumes
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from datetime import datetime


class DegenerateGeometry(ValueError):
    """Raised when the wind-constrained solution is undefined for the input."""


class NegativeRiseWarning(UserWarning):
    """Plume point resolved below the stack exit (negative total rise)."""


# Relative tolerance for the focal/fov/pixel-size consistency check.
_CONSISTENCY_RTOL = 1e-3


@dataclass(frozen=True)
class CameraModel:
    """Camera optics plus fixed site geometry.

    The field of view drives all ground-distance math. The focal length and
    sensor pixel size are optional: any one of the three may be left out and
    recovered from the other two; when all three are supplied they must agree
    to within 0.1%.
    """

    width_px: int
    height_px: int
    stack_distance_m: float
    plane_azimuth_deg: float
    stack_px: tuple[float, float]  # (column, row), raster frame
    fov_deg: float | None = None
    focal_length_mm: float | None = None
    pixel_size_um: float | None = None

    def __post_init__(self):
        if self.width_px < 0 or self.height_px < 0:
            raise ValueError("image dimensions must be nonnegative")
        if self.width_px == 0 and self.height_px == 0:
            raise ValueError("image must have a nonzero diagonal")
        if self.stack_distance_m < 0:
            raise ValueError("stack distance must be nonnegative")
        if self.focal_length_mm is not None and self.focal_length_mm <= 0:
            raise ValueError("focal length must be positive")
        if self.pixel_size_um is not None and self.pixel_size_um <= 0:
            raise ValueError("pixel size must be positive")
        if self.fov_deg is None:
            if self.focal_length_mm is None or self.pixel_size_um is None:
                raise ValueError(
                    "fov_deg missing: need focal_length_mm and pixel_size_um to derive it"
                )
            half = math.atan(
                self.pixel_size_um * 1e-3 * self.diagonal_px / (2.0 * self.focal_length_mm)
            )
            object.__setattr__(self, "fov_deg", math.degrees(2.0 * half))
        if not 0.0 < self.fov_deg < 180.0:
            raise ValueError("fov_deg must lie in (0, 180)")
        if self.focal_length_mm is not None and self.pixel_size_um is not None:
            derived = self._pixel_size_from_optics()
            if abs(derived - self.pixel_size_um) > _CONSISTENCY_RTOL * self.pixel_size_um:
                raise ValueError(
                    f"focal length, fov and pixel size disagree: "
                    f"derived {derived:.4f} um/px vs supplied {self.pixel_size_um:.4f} um/px"
                )
        azimuth = self.plane_azimuth_deg % 360.0
        object.__setattr__(self, "plane_azimuth_deg", azimuth)
        col, row = self.stack_px
        if self.width_px > 0 and self.height_px > 0:
            if not (0 <= col < self.width_px and 0 <= row < self.height_px):
                raise ValueError("stack pixel lies outside the raster")

    @property
    def diagonal_px(self) -> float:
        return math.hypot(self.width_px, self.height_px)

    def _pixel_size_from_optics(self) -> float:
        return (
            2.0
            * self.focal_length_mm
            * math.tan(math.radians(self.fov_deg / 2.0))
            / self.diagonal_px
            * 1e3
        )


@dataclass(frozen=True)
class WindRecord:
    """One wind-direction observation: UTC instant and degrees from north."""

    timestamp: datetime
    phi_deg: float

    def __post_init__(self):
        object.__setattr__(self, "phi_deg", self.phi_deg % 360.0)


@dataclass(frozen=True)
class ImagePoint:
    """Signed offsets from the image center: x rightward, z upward (pixels)."""

    x_px: float
    z_px: float


@dataclass(frozen=True)
class WindAngle:
    """Wind direction expressed relative to the camera's image plane.

    theta_raw_deg keeps the plain signed difference phi - plane_azimuth for
    record output. theta_norm_deg is that angle folded into [0, 90], the
    magnitude the depth trigonometry needs. The two side tags record which
    way the plume travels by convention: lateral_side from the component
    along the image x axis, depth_side from the perpendicular component
    (the camera is taken to sit on the "toward" side).
    """

    theta_raw_deg: float
    theta_norm_deg: float
    lateral_side: str  # "left" | "right" | "perpendicular"
    depth_side: str  # "toward_camera" | "away_from_camera" | "in_plane"


@dataclass(frozen=True)
class GroundSolution:
    """Ground-frame location of an image point, resolved with the wind angle."""

    x_m: float  # in-plane ground offset of the pixel column
    gamma_deg: float  # bearing of the pixel ray from the optical axis
    x_r_m: float  # lateral ground position of the point
    y_r_m: float  # depth offset toward the camera
    g_r_m_per_px: float  # ground sample distance at the point's depth
    z_r_m: float | None = None  # filled in by plume_rise


@dataclass(frozen=True)
class RiseResult:
    """Plume rise derived from a ground solution and the point's pixel height."""

    delta_z_m: float
    x_max_m: float
    z_st_m: float
    solution: GroundSolution
    negative_rise: bool = False


def to_center_coords(cam: CameraModel, col: float, row: float) -> ImagePoint:
    """Raster (col, row) to center-origin, up-positive image coordinates."""
    return ImagePoint(
        x_px=col - (cam.width_px - 1) / 2.0,
        z_px=(cam.height_px - 1) / 2.0 - row,
    )


def to_raster_coords(cam: CameraModel, p: ImagePoint) -> tuple[float, float]:
    """Inverse of to_center_coords."""
    return (
        p.x_px + (cam.width_px - 1) / 2.0,
        (cam.height_px - 1) / 2.0 - p.z_px,
    )


def pixel_size(cam: CameraModel) -> float:
    """Sensor pixel pitch in micrometres per pixel.

    Computed from the focal length and the field of view spread over the
    sensor diagonal; returns the explicitly supplied pitch when the optics
    are incomplete.
    """
    if cam.focal_length_mm is None:
        if cam.pixel_size_um is not None:
            return cam.pixel_size_um
        raise ValueError("pixel size needs focal_length_mm (or an explicit pixel_size_um)")
    return cam._pixel_size_from_optics()


def ground_sample_distance(cam: CameraModel) -> float:
    """Metres of ground per pixel at the smokestack's depth."""
    return (
        2.0
        * cam.stack_distance_m
        * math.tan(math.radians(cam.fov_deg / 2.0))
        / cam.diagonal_px
    )


def ground_width(cam: CameraModel) -> float:
    """Ground distance covered by the full image width at the stack's depth."""
    return ground_sample_distance(cam) * cam.width_px


def _fold_deg(angle: float) -> float:
    """Fold an angle in degrees into (-180, 180]."""
    folded = (angle + 180.0) % 360.0 - 180.0
    if folded <= -180.0:
        folded += 360.0
    return folded


def wind_plane_angle(phi_deg: float, plane_azimuth_deg: float) -> WindAngle:
    """Express a wind direction relative to the camera's image plane.

    Args:
        phi_deg: wind direction in degrees from north, [0, 360).
        plane_azimuth_deg: the site's image-plane azimuth constant.

    Returns:
        WindAngle with the raw signed angle, the folded magnitude in [0, 90],
        and the discrete side tags.
    """
    phi = phi_deg % 360.0
    theta_raw = phi - plane_azimuth_deg
    folded = _fold_deg(theta_raw)
    theta_norm = abs(folded)
    if theta_norm > 90.0:
        theta_norm = 180.0 - theta_norm

    # Travel direction of the plume relative to the image x axis. Wind blows
    # FROM phi, so the plume moves toward phi + 180.
    travel = math.radians(folded + 180.0)
    along = math.cos(travel)
    across = math.sin(travel)
    eps = 1e-12
    if along > eps:
        lateral = "right"
    elif along < -eps:
        lateral = "left"
    else:
        lateral = "perpendicular"
    if across > eps:
        depth = "toward_camera"
    elif across < -eps:
        depth = "away_from_camera"
    else:
        depth = "in_plane"
    return WindAngle(
        theta_raw_deg=theta_raw,
        theta_norm_deg=theta_norm,
        lateral_side=lateral,
        depth_side=depth,
    )


def locate_point_R(cam: CameraModel, p: ImagePoint, theta_norm_deg: float) -> GroundSolution:
    """Resolve an image point to ground coordinates using the wind angle.

    The pixel column fixes the viewing ray; the wind line through the stack
    base (on the optical axis) fixes the depth along that ray. Solved for
    the mirrored half-plane by symmetry when the point lies left of center.

    Raises:
        DegenerateGeometry: theta >= 90 degrees, or an off-plane wind with
            the point exactly on the optical axis.
    """
    if not 0.0 <= theta_norm_deg < 90.0:
        raise DegenerateGeometry(f"theta_norm_deg={theta_norm_deg} outside [0, 90)")
    if abs(p.x_px) > cam.width_px / 2.0 or abs(p.z_px) > cam.height_px / 2.0:
        raise ValueError("image point lies outside the raster")

    g = ground_sample_distance(cam)
    t = ground_width(cam)
    d = cam.stack_distance_m
    tan_theta = math.tan(math.radians(theta_norm_deg))

    sign = 1.0 if p.x_px >= 0 else -1.0
    x_abs = abs(p.x_px)
    if x_abs == 0.0:
        if tan_theta > 0.0:
            raise DegenerateGeometry("point on the optical axis with off-plane wind")
        # Wind in the image plane and the point on axis: depth equals the
        # stack's, so the local scale is the stack-plane scale.
        return GroundSolution(x_m=0.0, gamma_deg=0.0, x_r_m=0.0, y_r_m=0.0, g_r_m_per_px=g)

    x_ground = t * x_abs / cam.width_px
    tan_gamma = x_ground / d
    gamma = math.degrees(math.atan(tan_gamma))
    # X_R = D / (tan(theta) + 1/tan(gamma)), written to stay exact when
    # tan(theta) == 0 (then X_R == X identically).
    x_r = d * x_ground / (x_ground * tan_theta + d)
    y_r = x_r * tan_theta
    g_r = x_r / x_abs
    return GroundSolution(
        x_m=sign * x_ground,
        gamma_deg=sign * gamma,
        x_r_m=sign * x_r,
        y_r_m=y_r,
        g_r_m_per_px=g_r,
    )


def plume_rise(cam: CameraModel, sol: GroundSolution, z_r_px: float) -> RiseResult:
    """Plume rise and rise distance for a resolved point.

    The point's height above the image-center plane is scaled by the local
    ground sample distance; the stack exit height comes from the stack pixel
    at the stack-plane scale. Total rise is the stack's depth below center
    plus the point's height. Warns (NegativeRiseWarning) when the point
    resolves below the stack exit.
    """
    g = ground_sample_distance(cam)
    z_r = sol.g_r_m_per_px * z_r_px
    stack = to_center_coords(cam, *cam.stack_px)
    z_st = g * stack.z_px
    delta_z = abs(z_st) + z_r
    x_max = math.hypot(sol.x_r_m, sol.y_r_m)
    negative = z_r < -abs(z_st)
    if negative:
        warnings.warn(
            f"plume point {z_r:.1f} m resolves below the stack exit", NegativeRiseWarning
        )
    return RiseResult(
        delta_z_m=delta_z,
        x_max_m=x_max,
        z_st_m=z_st,
        solution=replace(sol, z_r_m=z_r),
        negative_rise=negative,
    )


def ground_to_image(cam: CameraModel, x_r_m: float, y_r_m: float, z_r_m: float) -> ImagePoint:
    """Project a ground point back to center-origin image coordinates.

    Exact inverse of locate_point_R + plume_rise for points in front of the
    camera: the lateral/depth pair fixes the column, and the height divided
    by the local ground sample distance fixes the row offset.
    """
    d = cam.stack_distance_m
    if y_r_m >= d:
        raise DegenerateGeometry("point at or behind the camera")
    g = ground_sample_distance(cam)
    depth_scale = (d - y_r_m) / d
    g_point = g * depth_scale
    x_px = x_r_m / g_point
    z_px = z_r_m / g_point
    return ImagePoint(x_px=x_px, z_px=z_px)
