"""Plume-mask analysis: component isolation, centerline, leveling point.

Given a binary plume mask and the stack pixel, this module keeps only the
plume attached to that stack, reduces it to a per-column profile (mean,
lowest and highest plume row per column), fits a saturating curve

    z(x) = a - b * exp(-c * x)

to the profile (x = downwind pixel distance from the stack column, z in
up-positive pixels), and picks the point where the fitted slope first drops
under a threshold: the location of maximum plume rise nearest the stack.

Raster rows grow downward; all outputs of select_R are converted to
center-origin, up-positive image coordinates so downstream geometry never
sees raster rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .pnm import PlumeMask
from .rpn_loss import Box, PlumeDirection, classify_direction

DEFAULT_SLOPE_TOL = 0.02  # px of rise per px downwind
MIN_FIT_COLUMNS = 8

_EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


class EmptyPlume(ValueError):
    """No plume pixels to analyze."""


class FitDiverged(RuntimeError):
    """The asymptote fit did not converge; no leveling point available."""


class NotLeveled(RuntimeError):
    """The plume is still rising steeply at the last profiled column."""


class VerticalPlume(RuntimeError):
    """Vertical plume: no downwind axis, so no leveling point is defined."""


@dataclass(frozen=True)
class CenterlineProfile:
    """Per-column plume summary, ordered by distance from the stack.

    Each entry is (position, center, low_edge, high_edge) in raster
    coordinates. For the usual left/right plumes the position is a column
    and the remaining values are rows (low_edge = smallest row = visual
    top). Vertical plumes are profiled along rows instead, with column
    statistics per row, and carry axis == "rows".
    """

    columns: tuple[tuple[int, float, int, int], ...]
    stack_col: int
    stack_row: int
    direction: PlumeDirection
    width_px: int
    height_px: int
    axis: str = "columns"


@dataclass(frozen=True)
class AsymptoteFit:
    """Parameters of z(x) = a - b exp(-c x) fitted to a profile."""

    a: float
    b: float
    c: float
    rmse_px: float
    converged: bool
    c_unconstrained: bool = False


@dataclass(frozen=True)
class PointR:
    """Leveling point in center-origin, up-positive image coordinates."""

    x_r_px: float
    z_r_px: float
    truncated: bool = False


def attached_component(mask: PlumeMask, stack_px: tuple[int, int]) -> PlumeMask:
    """Keep only the 8-connected plume component belonging to the stack.

    The component containing the stack pixel wins; if the stack pixel is
    background, the component with the smallest pixel distance to it wins.
    An empty mask is returned unchanged.
    """
    col, row = int(stack_px[0]), int(stack_px[1])
    if not (0 <= col < mask.width_px and 0 <= row < mask.height_px):
        raise ValueError("stack pixel outside the raster")
    if mask.is_empty():
        return mask
    labels, count = ndimage.label(mask.pixels, structure=_EIGHT_CONNECTED)
    keep = labels[row, col]
    if keep == 0:
        rows, cols = np.nonzero(mask.pixels)
        d2 = (rows - row) ** 2 + (cols - col) ** 2
        keep = labels[rows[np.argmin(d2)], cols[np.argmin(d2)]]
    return PlumeMask(
        width_px=mask.width_px,
        height_px=mask.height_px,
        pixels=labels == keep,
        source_id=mask.source_id,
        timestamp=mask.timestamp,
    )


def _per_index_stats(major: np.ndarray, minor: np.ndarray, length: int):
    """Mean/min/max of `minor` grouped by `major` (array index values)."""
    counts = np.bincount(major, minlength=length)
    sums = np.bincount(major, weights=minor, minlength=length)
    lo = np.full(length, np.iinfo(np.int64).max, dtype=np.int64)
    hi = np.full(length, -1, dtype=np.int64)
    np.minimum.at(lo, major, minor)
    np.maximum.at(hi, major, minor)
    occupied = counts > 0
    means = np.zeros(length)
    means[occupied] = sums[occupied] / counts[occupied]
    return occupied, means, lo, hi


def centerline(
    mask: PlumeMask, stack_px: tuple[int, int], mode: str = "column_mean"
) -> CenterlineProfile:
    """Reduce a single attached plume component to its centerline profile.

    Args:
        mask: single-component plume mask.
        stack_px: (column, row) of the stack exit.
        mode: "column_mean" (default) keeps the raw per-column means;
            "quadratic" smooths the centers with a quadratic fit.

    Raises:
        EmptyPlume: mask has no plume pixels.
    """
    if mode not in ("column_mean", "quadratic"):
        raise ValueError(f"unknown centerline mode {mode!r}")
    if mask.is_empty():
        raise EmptyPlume("mask has no plume pixels")
    stack_col, stack_row = int(stack_px[0]), int(stack_px[1])
    rows, cols = np.nonzero(mask.pixels)

    # Pixel-edge box: pixel centers sit at integer coordinates, so the span
    # of columns [c0, c1] is the box [c0 - 0.5, c1 + 0.5).
    bbox = Box(
        x=float(cols.min()) - 0.5,
        y=float(rows.min()) - 0.5,
        w=float(cols.max() - cols.min() + 1),
        h=float(rows.max() - rows.min() + 1),
    )
    direction = classify_direction(bbox, (stack_col, stack_row))

    if direction is PlumeDirection.VERTICAL:
        # No downwind axis: profile along rows, climbing away from the stack.
        occupied, means, lo, hi = _per_index_stats(rows, cols, mask.height_px)
        positions = np.nonzero(occupied)[0]
        positions = positions[positions <= stack_row]
        order = np.argsort(stack_row - positions, kind="stable")
        axis = "rows"
    else:
        occupied, means, lo, hi = _per_index_stats(cols, rows, mask.width_px)
        positions = np.nonzero(occupied)[0]
        if direction is PlumeDirection.RIGHT:
            positions = positions[positions >= stack_col]
        else:
            positions = positions[positions <= stack_col]
        order = np.argsort(np.abs(positions - stack_col), kind="stable")
        axis = "columns"

    positions = positions[order]
    centers = means[positions]
    if mode == "quadratic" and len(positions) >= 3:
        coeffs = np.polyfit(positions.astype(float), centers, deg=2)
        centers = np.polyval(coeffs, positions.astype(float))
    entries = tuple(
        (int(p), float(c), int(lo[p]), int(hi[p]))
        for p, c in zip(positions, centers)
    )
    return CenterlineProfile(
        columns=entries,
        stack_col=stack_col,
        stack_row=stack_row,
        direction=direction,
        width_px=mask.width_px,
        height_px=mask.height_px,
        axis=axis,
    )


def profile_to_csv(profile: CenterlineProfile) -> str:
    """Debug dump: one `col,center,upper,lower` row per profiled column."""
    lines = ["col,center,upper,lower"]
    for pos, center, lo, hi in profile.columns:
        lines.append(f"{pos},{center:.3f},{lo},{hi}")
    return "\n".join(lines) + "\n"


def _downwind_xz(profile: CenterlineProfile) -> tuple[np.ndarray, np.ndarray]:
    pos = np.array([entry[0] for entry in profile.columns], dtype=float)
    centers = np.array([entry[1] for entry in profile.columns], dtype=float)
    x = np.abs(pos - profile.stack_col)
    z = -centers  # rows grow downward; negate for an up-positive height
    return x, z


def _solve_linear_ab(x: np.ndarray, z: np.ndarray, c: float) -> tuple[float, float, float]:
    decay = np.exp(-c * x)
    design = np.stack([np.ones_like(x), -decay], axis=1)
    coef, *_ = np.linalg.lstsq(design, z, rcond=None)
    resid = design @ coef - z
    return float(coef[0]), float(coef[1]), float(resid @ resid)


def fit_asymptote(profile: CenterlineProfile) -> AsymptoteFit:
    """Least-squares fit of z(x) = a - b exp(-c x) to the centerline.

    A coarse sweep over the decay rate (with the offset and amplitude
    solved linearly at each candidate) seeds a damped Gauss-Newton
    refinement of the decay rate. Divergence is reported through the
    converged flag rather than raised.

    Raises:
        VerticalPlume: the profile has no downwind axis.
        ValueError: fewer than MIN_FIT_COLUMNS columns.
    """
    if profile.axis == "rows":
        raise VerticalPlume("vertical plume profile has no downwind axis to fit")
    if len(profile.columns) < MIN_FIT_COLUMNS:
        raise ValueError(f"need at least {MIN_FIT_COLUMNS} profiled columns")
    x, z = _downwind_xz(profile)
    n = len(x)

    if np.ptp(z) == 0.0:
        # Flat profile: any decay rate explains it equally well.
        return AsymptoteFit(
            a=float(z[0]), b=0.0, c=1e-2, rmse_px=0.0, converged=True, c_unconstrained=True
        )

    span = float(x.max() - x.min())
    if span <= 0:
        return AsymptoteFit(a=float(z.mean()), b=0.0, c=1e-2, rmse_px=float(z.std()),
                            converged=False)
    c_grid = np.logspace(math.log10(0.05 / span), math.log10(100.0 / span), 60)
    best = None
    for c in c_grid:
        a, b, sse = _solve_linear_ab(x, z, c)
        if best is None or sse < best[3]:
            best = (a, b, float(c), sse)
    a, b, c, sse = best

    converged = True
    for _ in range(80):
        decay = np.exp(-c * x)
        resid = a - b * decay - z
        jac_c = b * x * decay
        denom = float(jac_c @ jac_c)
        if denom == 0.0 or not math.isfinite(denom):
            break
        step = -float(jac_c @ resid) / denom
        improved = False
        for _ in range(25):  # damping: halve until the residual shrinks
            c_try = c + step
            if c_try > 0:
                a_try, b_try, sse_try = _solve_linear_ab(x, z, c_try)
                if math.isfinite(sse_try) and sse_try <= sse:
                    gain = sse - sse_try
                    a, b, c, sse = a_try, b_try, c_try, sse_try
                    improved = True
                    break
            step *= 0.5
        if not improved:
            break
        if gain <= 1e-14 * max(sse, 1e-30):
            break
    if not (math.isfinite(a) and math.isfinite(b) and math.isfinite(c) and c > 0):
        converged = False

    rmse = math.sqrt(sse / n)
    unconstrained = abs(b) < 1e-9 * max(1.0, abs(a))
    return AsymptoteFit(
        a=a, b=b, c=c, rmse_px=rmse, converged=converged, c_unconstrained=unconstrained
    )


def select_R(
    fit: AsymptoteFit,
    profile: CenterlineProfile,
    slope_tol: float = DEFAULT_SLOPE_TOL,
) -> PointR:
    """Pick the point where the fitted centerline levels off.

    The fitted slope is |b| c exp(-c x); the smallest x where it drops to
    slope_tol has the closed form log(|b| c / tol) / c. When the profile
    ends first, the last profiled column is returned with the truncated
    flag. The result is converted to center-origin image coordinates.

    Raises:
        VerticalPlume, FitDiverged, NotLeveled.
    """
    if profile.axis == "rows":
        raise VerticalPlume("no leveling point for a vertical plume")
    if not fit.converged:
        raise FitDiverged("asymptote fit did not converge")
    if slope_tol <= 0:
        raise ValueError("slope_tol must be positive")

    x_last = abs(profile.columns[-1][0] - profile.stack_col)
    slope0 = abs(fit.b) * fit.c
    if fit.c_unconstrained or slope0 <= slope_tol:
        x_sel, truncated = 0.0, False
    else:
        slope_last = slope0 * math.exp(-fit.c * x_last)
        if slope_last > 10.0 * slope_tol:
            raise NotLeveled(
                f"slope {slope_last:.4f} px/px at the last column exceeds "
                f"10x the tolerance {slope_tol}"
            )
        x_level = math.log(slope0 / slope_tol) / fit.c
        if x_level > x_last:
            x_sel, truncated = float(x_last), True
        else:
            x_sel, truncated = x_level, False

    if truncated:
        # The curve never levels inside the frame: report the last observed
        # column itself rather than an extrapolation-biased fit value.
        row = profile.columns[-1][1]
    else:
        row = -(fit.a - fit.b * math.exp(-fit.c * x_sel))
    if profile.direction is PlumeDirection.RIGHT:
        col = profile.stack_col + x_sel
    else:
        col = profile.stack_col - x_sel
    return PointR(
        x_r_px=col - (profile.width_px - 1) / 2.0,
        z_r_px=(profile.height_px - 1) / 2.0 - row,
        truncated=truncated,
    )
