"""Camera/site configuration file loader.

Plain `key = value` lines with dotted key names, '#' comments and blank
lines allowed:

    camera.width_px = 2592
    camera.height_px = 1944
    camera.fov_deg = 55.0
    camera.focal_mm = 8.0            # optional
    site.stack_distance_m = 5180
    site.plane_azimuth_deg = 252
    site.stack_col_px = 1296
    site.stack_row_px = 1554
"""

from __future__ import annotations

from .geometry import CameraModel

REQUIRED_KEYS = (
    "camera.width_px",
    "camera.height_px",
    "camera.fov_deg",
    "site.stack_distance_m",
    "site.plane_azimuth_deg",
    "site.stack_col_px",
    "site.stack_row_px",
)
OPTIONAL_KEYS = ("camera.focal_mm", "camera.pixel_size_um")


class ConfigError(ValueError):
    """Bad key, missing key, or unparseable value in a site config."""


def parse_config_text(text: str) -> dict[str, float]:
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in REQUIRED_KEYS and key not in OPTIONAL_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = float(val.strip())
        except ValueError:
            raise ConfigError(f"line {lineno}: bad number {val.strip()!r}") from None
    missing = [k for k in REQUIRED_KEYS if k not in values]
    if missing:
        raise ConfigError(f"missing keys: {', '.join(missing)}")
    return values


def camera_from_config(text: str) -> CameraModel:
    """Build a CameraModel from site-config text."""
    values = parse_config_text(text)
    try:
        return CameraModel(
            width_px=int(values["camera.width_px"]),
            height_px=int(values["camera.height_px"]),
            fov_deg=values["camera.fov_deg"],
            focal_length_mm=values.get("camera.focal_mm"),
            pixel_size_um=values.get("camera.pixel_size_um"),
            stack_distance_m=values["site.stack_distance_m"],
            plane_azimuth_deg=values["site.plane_azimuth_deg"],
            stack_px=(values["site.stack_col_px"], values["site.stack_row_px"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_camera(path) -> CameraModel:
    with open(path, "r", encoding="utf-8") as fh:
        return camera_from_config(fh.read())
