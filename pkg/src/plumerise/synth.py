"""Synthetic plume scenarios with known ground truth.

Builds a plume mask by marching a momentum-plus-buoyancy rise trajectory
along the wind direction, projecting each trajectory point through the
inverse camera mapping, and rasterizing a band whose half-width grows with
downwind distance. The returned truth record holds the analytic rise and
its image-space location, so the full measurement pipeline can be checked
against a known answer.

The trajectory starts at the stack's ground position on the optical axis
and travels toward the camera side of the image plane, matching the
convention the measurement geometry uses for folded wind angles. The final
rise is taken where the trajectory's image-space slope first drops below
the centerline module's leveling threshold, or at the frame-exit distance,
whichever comes first.

Scenario callers should keep the stack column at the image center and the
stack row below it; the single-camera geometry assumes both.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Callable, Optional

import numpy as np

from . import briggs
from .geometry import CameraModel, ground_sample_distance, to_center_coords, wind_plane_angle
from .mask_analysis import DEFAULT_SLOPE_TOL
from .pnm import PlumeMask
from .records import MeasurementRecord

MAX_THETA_DEG = 85.0
# Dense enough that consecutive samples land on adjacent image columns even
# for oblique winds, which keeps the rasterized band gap-free.
TRAJECTORY_SAMPLES = 24000

DEFAULT_TIMESTAMP = datetime(2019, 11, 8, 18, 0, 13, tzinfo=timezone.utc)


class OutOfFrame(ValueError):
    """The plume leaves the raster before any usable extent is drawn."""


@dataclass(frozen=True)
class SynthScenario:
    """Everything needed to render one synthetic plume deterministically."""

    cam: CameraModel
    stack: briggs.StackSpec
    amb: briggs.AmbientConditions
    phi_deg: float
    halfwidth_m: Optional[Callable[[np.ndarray], np.ndarray]] = None
    jitter_px: float = 0.0
    seed: int = 0
    image_id: str = "S1"
    timestamp: datetime = DEFAULT_TIMESTAMP
    slope_tol: float = DEFAULT_SLOPE_TOL

    def halfwidth(self, s: np.ndarray) -> np.ndarray:
        if self.halfwidth_m is not None:
            return np.asarray(self.halfwidth_m(s), dtype=float)
        return self.amb.entrainment * np.asarray(s, dtype=float)


def _trajectory_rise(f_m: float, f_b: float, u: float, beta: float, s: np.ndarray) -> np.ndarray:
    """Vectorized rise curve; must match briggs.rise_at_distance pointwise."""
    beta2 = beta * beta
    term_m = 3.0 * f_m * s / (beta2 * u * u)
    term_b = 3.0 * f_b * s * s / (2.0 * beta2 * u**3)
    return np.cbrt(term_m + term_b)


def generate(scn: SynthScenario) -> tuple[PlumeMask, MeasurementRecord]:
    """Render a scenario into a mask plus its analytic truth record.

    Raises:
        ValueError: wind angle too close to perpendicular (theta >= 85 deg).
        OutOfFrame: the leveled portion projects outside the raster.
    """
    cam = scn.cam
    wind = wind_plane_angle(scn.phi_deg, cam.plane_azimuth_deg)
    if wind.theta_norm_deg >= MAX_THETA_DEG:
        raise ValueError(
            f"theta_norm {wind.theta_norm_deg:.1f} deg too oblique (max {MAX_THETA_DEG})"
        )

    width, height = cam.width_px, cam.height_px
    f_m = briggs.momentum_flux(scn.stack, scn.amb)
    f_b = briggs.buoyancy_flux(scn.stack, scn.amb)
    empty_truth = MeasurementRecord(
        image_id=scn.image_id,
        timestamp=scn.timestamp,
        phi_deg=scn.phi_deg % 360.0,
        theta_deg=wind.theta_raw_deg,
        delta_z_m=0.0,
        x_max_m=0.0,
        run_id="truth",
    )
    if f_m == 0.0 and f_b == 0.0:
        pixels = np.zeros((height, width), dtype=bool)
        mask = PlumeMask(width, height, pixels, source_id=scn.image_id,
                         timestamp=scn.timestamp)
        return mask, empty_truth

    g = ground_sample_distance(cam)
    d = cam.stack_distance_m
    stack_center = to_center_coords(cam, *cam.stack_px)
    z_exit_m = g * stack_center.z_px

    lateral = -1.0 if wind.lateral_side == "left" else 1.0
    theta = np.radians(wind.theta_norm_deg)
    cos_t, sin_t = np.cos(theta), np.sin(theta)

    # Dense trajectory, clustered near the stack where the rise is steepest.
    s_max = 1.5 * d
    s = s_max * np.linspace(0.0, 1.0, TRAJECTORY_SAMPLES) ** 1.5
    rise = _trajectory_rise(f_m, f_b, scn.amb.mean_wind_mps, scn.amb.entrainment, s)
    x_m = lateral * s * cos_t
    y_m = s * sin_t
    z_m = z_exit_m + rise

    g_pt = g * (d - y_m) / d
    x_px = x_m / g_pt
    z_px = z_m / g_pt
    col = x_px + (width - 1) / 2.0
    row = (height - 1) / 2.0 - z_px

    in_frame = (col >= -0.5) & (col <= width - 0.5) & (row >= -0.5) & (row <= height - 0.5)
    if not in_frame[0]:
        raise OutOfFrame("stack exit projects outside the raster")
    exits = np.nonzero(~in_frame)[0]
    last = int(exits[0]) if exits.size else len(s)  # first out-of-frame sample
    if last < 2:
        raise OutOfFrame("plume leaves the raster immediately")

    # Final rise: where the image-space slope levels off, else the frame exit.
    slope = np.full(last, np.inf)
    dx = np.abs(np.diff(x_px[:last]))
    dz = np.diff(z_px[:last])
    nonzero = dx > 0
    slope[1:][nonzero] = np.abs(dz[nonzero] / dx[nonzero])
    level = np.nonzero(slope < scn.slope_tol)[0]
    r_idx = int(level[0]) if level.size else last - 1

    truth = MeasurementRecord(
        image_id=scn.image_id,
        timestamp=scn.timestamp,
        phi_deg=scn.phi_deg % 360.0,
        theta_deg=wind.theta_raw_deg,
        x_r_px=float(x_px[r_idx]),
        z_r_px=float(z_px[r_idx]),
        x_r_m=float(x_m[r_idx]),
        z_r_m=float(z_m[r_idx]),
        g_r_m_per_px=float(g_pt[r_idx]),
        delta_z_m=float(abs(z_exit_m) + z_m[r_idx]),
        x_max_m=float(np.hypot(x_m[r_idx], y_m[r_idx])),
        run_id="truth",
    )

    # Rasterize the band out to the frame exit.
    half = scn.halfwidth(s[:last])
    row_top = (height - 1) / 2.0 - (z_m[:last] + half) / g_pt[:last]
    row_bot = (height - 1) / 2.0 - (z_m[:last] - half) / g_pt[:last]
    cols = np.clip(np.rint(col[:last]).astype(int), 0, width - 1)
    centers_row = row[:last]

    tops = np.full(width, np.inf)
    bots = np.full(width, -np.inf)
    ctr_lo = np.full(width, np.inf)
    ctr_hi = np.full(width, -np.inf)
    # Union each consecutive segment into both of its columns so steep
    # stretches stay 8-connected regardless of sampling.
    seg_top = np.minimum(row_top[:-1], row_top[1:])
    seg_bot = np.maximum(row_bot[:-1], row_bot[1:])
    seg_ctr_lo = np.minimum(centers_row[:-1], centers_row[1:])
    seg_ctr_hi = np.maximum(centers_row[:-1], centers_row[1:])
    for idx in (cols[:-1], cols[1:]):
        np.minimum.at(tops, idx, seg_top)
        np.maximum.at(bots, idx, seg_bot)
        np.minimum.at(ctr_lo, idx, seg_ctr_lo)
        np.maximum.at(ctr_hi, idx, seg_ctr_hi)

    occupied = np.nonzero(np.isfinite(tops))[0]
    if scn.jitter_px > 0:
        rng = np.random.default_rng(scn.seed)
        tops[occupied] += rng.uniform(-scn.jitter_px, scn.jitter_px, occupied.size)
        bots[occupied] += rng.uniform(-scn.jitter_px, scn.jitter_px, occupied.size)
        # Never jitter past the centerline, which keeps the band connected.
        tops[occupied] = np.minimum(tops[occupied], ctr_lo[occupied])
        bots[occupied] = np.maximum(bots[occupied], ctr_hi[occupied])

    pixels = np.zeros((height, width), dtype=bool)
    for c in occupied:
        top = max(0, int(np.rint(tops[c])))
        bot = min(height - 1, int(np.rint(bots[c])))
        if top <= bot:
            pixels[top : bot + 1, c] = True
    stack_col = min(width - 1, max(0, int(round(cam.stack_px[0]))))
    stack_row = min(height - 1, max(0, int(round(cam.stack_px[1]))))
    pixels[stack_row, stack_col] = True

    mask = PlumeMask(width, height, pixels, source_id=scn.image_id, timestamp=scn.timestamp)
    return mask, truth


def scenario_from_dict(data: dict) -> SynthScenario:
    """Build a scenario from the JSON layout the synth CLI consumes."""
    cam_d = data["camera"]
    cam = CameraModel(
        width_px=int(cam_d["width_px"]),
        height_px=int(cam_d["height_px"]),
        fov_deg=cam_d.get("fov_deg"),
        focal_length_mm=cam_d.get("focal_mm"),
        pixel_size_um=cam_d.get("pixel_size_um"),
        stack_distance_m=float(cam_d["stack_distance_m"]),
        plane_azimuth_deg=float(cam_d["plane_azimuth_deg"]),
        stack_px=(float(cam_d["stack_col_px"]), float(cam_d["stack_row_px"])),
    )
    st_d = data["stack"]
    stack = briggs.StackSpec(
        id=str(st_d.get("id", "stack")),
        lat_deg=float(st_d.get("lat", 0.0)),
        lon_deg=float(st_d.get("lon", 0.0)),
        height_m=float(st_d["h_s"]),
        diameter_m=float(st_d["d_s"]),
        exit_velocity_mps=float(st_d["w_s"]),
        exit_temp_K=float(st_d["T_s"]),
    )
    amb_d = data["ambient"]
    amb = briggs.AmbientConditions(
        air_temp_K=float(amb_d["air_temp_K"]),
        mean_wind_mps=float(amb_d["mean_wind_mps"]),
        density_ratio=amb_d.get("density_ratio"),
        entrainment=float(amb_d.get("entrainment", briggs.DEFAULT_ENTRAINMENT)),
    )
    slope = data.get("halfwidth_slope")
    halfwidth = (lambda s, k=float(slope): k * s) if slope is not None else None
    ts = data.get("timestamp")
    timestamp = (
        datetime.fromisoformat(ts.replace("Z", "+00:00")) if ts else DEFAULT_TIMESTAMP
    )
    return SynthScenario(
        cam=cam,
        stack=stack,
        amb=amb,
        phi_deg=float(data["phi_deg"]),
        halfwidth_m=halfwidth,
        jitter_px=float(data.get("jitter_px", 0.0)),
        seed=int(data.get("seed", 0)),
        image_id=str(data.get("image_id", "S1")),
        timestamp=timestamp,
        slope_tol=float(data.get("slope_tol", DEFAULT_SLOPE_TOL)),
    )
