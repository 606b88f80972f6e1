"""Anchor-relative box regression and stack-end losses.

Standalone loss math for region-proposal training: the usual four-component
box parameterization plus a stack-end regularizer that pulls proposals
toward the smokestack exit. The stack-end point on a box depends on which
way the plume leans: the bottom-middle for an upright plume, the bottom-left
corner when it streams right, the bottom-right corner when it streams left.

Everything here is a pure function of plain dataclasses; reduction across
proposals is left to the caller.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum
from importlib import resources


class PlumeDirection(Enum):
    VERTICAL = "vertical"
    RIGHT = "right"
    LEFT = "left"


# Fraction of the box width within which the stack column counts as centered.
VERTICAL_CENTER_FRACTION = 0.15


@dataclass(frozen=True)
class Box:
    """Axis-aligned box, top-left corner (x, y) with positive width/height."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError("box width and height must be positive")


@dataclass(frozen=True)
class SsePoint:
    """Anchor-normalized coordinates of a box's stack-end point."""

    u_x: float
    u_y: float


def box_parameterize(box: Box, anchor: Box) -> tuple[float, float, float, float]:
    """Anchor-relative box parameterization (t_x, t_y, t_w, t_h)."""
    return (
        (box.x - anchor.x) / anchor.w,
        (box.y - anchor.y) / anchor.h,
        math.log(box.w / anchor.w),
        math.log(box.h / anchor.h),
    )


def classify_direction(gt_box: Box, stack_px: tuple[float, float]) -> PlumeDirection:
    """Decide which way the plume leans from its box and the stack column.

    Vertical when the box is horizontally centered on the stack to within
    15% of its width; otherwise right when the box mass extends rightward of
    the stack, left when it extends leftward.
    """
    stack_col = stack_px[0]
    center = gt_box.x + gt_box.w / 2.0
    if abs(center - stack_col) <= VERTICAL_CENTER_FRACTION * gt_box.w:
        return PlumeDirection.VERTICAL
    return PlumeDirection.RIGHT if center > stack_col else PlumeDirection.LEFT


def sse_point(box: Box, anchor: Box, direction: PlumeDirection) -> SsePoint:
    """Stack-end point of a box, normalized against the anchor.

    The stack end sits at (x + w/2, y + h) for a vertical plume, (x, y + h)
    for a rightward plume, and (x + w, y + h) for a leftward plume; the same
    construction on the anchor provides the reference.
    """
    u_y = (box.y + box.h - anchor.y - anchor.h) / anchor.h
    if direction is PlumeDirection.VERTICAL:
        u_x = (2.0 * box.x + box.w - 2.0 * anchor.x - anchor.w) / (2.0 * anchor.w)
    elif direction is PlumeDirection.RIGHT:
        u_x = (box.x - anchor.x) / anchor.w
    else:
        u_x = (box.x + box.w - anchor.x - anchor.w) / anchor.w
    return SsePoint(u_x=u_x, u_y=u_y)


def smooth_l1(d: float) -> tuple[float, float]:
    """Smooth-L1 robust loss: (value, derivative) at d.

    Quadratic inside |d| < 1, linear outside; the derivative is d or sign(d).
    """
    if abs(d) < 1.0:
        return 0.5 * d * d, d
    return abs(d) - 0.5, math.copysign(1.0, d)


def sse_loss(pred: Box, gt: Box, anchor: Box, direction: PlumeDirection) -> float:
    """Stack-end regression loss between a predicted and ground-truth box."""
    u = sse_point(pred, anchor, direction)
    u_gt = sse_point(gt, anchor, direction)
    return smooth_l1(u.u_x - u_gt.u_x)[0] + smooth_l1(u.u_y - u_gt.u_y)[0]


def rpn_reg_loss(pred: Box, gt: Box, anchor: Box) -> float:
    """Box regression loss: smooth-L1 over the four t-vector components."""
    t = box_parameterize(pred, anchor)
    t_gt = box_parameterize(gt, anchor)
    return sum(smooth_l1(a - b)[0] for a, b in zip(t, t_gt))


def combined_reg_loss(
    pred: Box,
    gt: Box,
    anchor: Box,
    direction: PlumeDirection,
    lambda_sse: float = 1.0,
) -> float:
    """Box loss plus the weighted stack-end loss."""
    if lambda_sse < 0:
        raise ValueError("lambda_sse must be nonnegative")
    return rpn_reg_loss(pred, gt, anchor) + lambda_sse * sse_loss(pred, gt, anchor, direction)


@dataclass(frozen=True)
class LossFixture:
    """One conformance row: boxes, direction, and the expected loss values."""

    case: str
    pred: Box
    gt: Box
    anchor: Box
    direction: PlumeDirection
    rpn_loss: float
    sse_loss: float


def packaged_fixtures_text() -> str:
    """Contents of the fixture table shipped with the package."""
    return resources.files(__package__).joinpath("data/loss_fixtures.csv").read_text()


def load_loss_fixtures(text: str) -> list[LossFixture]:
    """Parse a conformance fixture CSV (see data/loss_fixtures.csv)."""
    reader = csv.DictReader(io.StringIO(text))
    fixtures = []
    for row in reader:
        def box(prefix: str) -> Box:
            return Box(
                x=float(row[f"{prefix}_x"]),
                y=float(row[f"{prefix}_y"]),
                w=float(row[f"{prefix}_w"]),
                h=float(row[f"{prefix}_h"]),
            )

        fixtures.append(
            LossFixture(
                case=row["case"],
                pred=box("pred"),
                gt=box("gt"),
                anchor=box("anchor"),
                direction=PlumeDirection(row["direction"]),
                rpn_loss=float(row["rpn_loss"]),
                sse_loss=float(row["sse_loss"]),
            )
        )
    return fixtures


def check_fixture(fx: LossFixture, atol: float = 1e-9) -> tuple[bool, float, float]:
    """Recompute a fixture row; returns (ok, got_rpn, got_sse)."""
    got_rpn = rpn_reg_loss(fx.pred, fx.gt, fx.anchor)
    got_sse = sse_loss(fx.pred, fx.gt, fx.anchor, fx.direction)
    ok = abs(got_rpn - fx.rpn_loss) <= atol and abs(got_sse - fx.sse_loss) <= atol
    return ok, got_rpn, got_sse
