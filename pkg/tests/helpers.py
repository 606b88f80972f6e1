"""Shared builders for the test suite."""

import math
from datetime import datetime, timezone

import numpy as np

from plumerise.briggs import AmbientConditions, StackSpec
from plumerise.geometry import CameraModel, WindRecord
from plumerise.pnm import PlumeMask
from plumerise.records import WindTable
from plumerise.synth import SynthScenario

TS = datetime(2019, 11, 8, 18, 0, 13, tzinfo=timezone.utc)

# Field of view back-derived from the site's published ground sample
# distance: tan(fov/2) = 0.520625 for the 2592x1944 sensor at 5180 m.
SITE_TAN_HALF = 0.520625
SITE_FOV_DEG = 2.0 * math.degrees(math.atan(SITE_TAN_HALF))


def site_cam(stack_col=1296.0, stack_row=1050.0, **overrides) -> CameraModel:
    kwargs = dict(
        width_px=2592,
        height_px=1944,
        stack_distance_m=5180.0,
        plane_azimuth_deg=252.0,
        stack_px=(stack_col, stack_row),
        fov_deg=SITE_FOV_DEG,
    )
    kwargs.update(overrides)
    return CameraModel(**kwargs)


def mask_from_art(art: str, **kwargs) -> PlumeMask:
    """Build a mask from rows of '.' (background) and '#' (plume)."""
    rows = [line.strip() for line in art.strip().splitlines()]
    width = len(rows[0])
    pixels = np.array([[ch == "#" for ch in line] for line in rows], dtype=bool)
    return PlumeMask(width_px=width, height_px=len(rows), pixels=pixels, **kwargs)


def strong_stack() -> StackSpec:
    return StackSpec(
        id="main",
        lat_deg=57.041,
        lon_deg=-111.616,
        height_m=183.0,
        diameter_m=7.9,
        exit_velocity_mps=12.0,
        exit_temp_K=427.9,
    )


def mid_stack() -> StackSpec:
    return StackSpec(
        id="mid",
        lat_deg=57.048,
        lon_deg=-111.613,
        height_m=183.0,
        diameter_m=6.6,
        exit_velocity_mps=10.1,
        exit_temp_K=350.7,
    )


def ambient(u: float = 5.0) -> AmbientConditions:
    return AmbientConditions(air_temp_K=288.0, mean_wind_mps=u)


def phi_for_theta(theta_deg: float, side: int = 1, plane_azimuth: float = 252.0) -> float:
    """Wind direction whose folded plane angle equals theta_deg.

    side +1 makes the plume travel toward image-right, -1 toward image-left.
    """
    return (plane_azimuth + 180.0 + side * theta_deg) % 360.0


def scenario(
    theta_deg: float,
    side: int = 1,
    stack: StackSpec | None = None,
    amb: AmbientConditions | None = None,
    jitter_px: float = 0.0,
    seed: int = 0,
    image_id: str = "S1",
    halfwidth_slope: float = 0.08,
    cam: CameraModel | None = None,
) -> SynthScenario:
    cam = cam if cam is not None else site_cam()
    return SynthScenario(
        cam=cam,
        stack=stack if stack is not None else strong_stack(),
        amb=amb if amb is not None else ambient(),
        phi_deg=phi_for_theta(theta_deg, side, cam.plane_azimuth_deg),
        halfwidth_m=lambda s: halfwidth_slope * s,
        jitter_px=jitter_px,
        seed=seed,
        image_id=image_id,
        timestamp=TS,
    )


def wind_table_for(phi_deg: float) -> WindTable:
    return WindTable(records=(WindRecord(timestamp=TS, phi_deg=phi_deg),))
