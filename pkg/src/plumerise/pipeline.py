"""Batch orchestration: masks in, measurement records and metric reports out.

The measurement pipeline for one image is

    parse -> attached component -> centerline -> asymptote fit ->
    leveling point -> wind angle -> ground solution -> plume rise

Per-image failures are isolated into failure records (error string set,
measurement fields empty) so an unattended batch always produces one record
per input. Batches run on a thread pool; the record log is the single
serialization point and is appended in completion order.
"""

from __future__ import annotations

import threading
import uuid
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

from . import mask_analysis, metrics, records
from .config import load_camera
from .geometry import CameraModel, DegenerateGeometry, ImagePoint, locate_point_R, plume_rise, wind_plane_angle
from .mask_analysis import EmptyPlume, FitDiverged, NotLeveled, VerticalPlume
from .pnm import MalformedHeader, PlumeMask, TruncatedPayload, UnsupportedMaxval, parse_pnm
from .records import MeasurementRecord, NoWindData, WindTable, load_wind_csv, wind_at

MASK_SUFFIXES = (".pgm", ".pnm", ".pbm")


def _new_run_id() -> str:
    return uuid.uuid4().hex[:12]


def _failure(mask: PlumeMask, exc: Exception, run_id: str) -> MeasurementRecord:
    flags = set()
    if isinstance(exc, VerticalPlume):
        flags.add("vertical_plume")
    if isinstance(exc, FitDiverged):
        flags.add("fit_diverged")
    return MeasurementRecord(
        image_id=mask.source_id,
        timestamp=mask.timestamp,
        flags=frozenset(flags),
        error=f"{type(exc).__name__}: {exc}",
        run_id=run_id,
    )


def measure_mask(
    mask: PlumeMask,
    cam: CameraModel,
    wind: WindTable,
    slope_tol: float = mask_analysis.DEFAULT_SLOPE_TOL,
    run_id: str = "",
) -> MeasurementRecord:
    """Run the full pipeline on a parsed mask; never raises on plume issues."""
    try:
        if mask.timestamp is None:
            raise ValueError("mask carries no timestamp")
        wind_rec = wind_at(wind, mask.timestamp)
        angle = wind_plane_angle(wind_rec.phi_deg, cam.plane_azimuth_deg)

        stack = (int(round(cam.stack_px[0])), int(round(cam.stack_px[1])))
        component = mask_analysis.attached_component(mask, stack)
        profile = mask_analysis.centerline(component, stack)
        fit = mask_analysis.fit_asymptote(profile)
        point = mask_analysis.select_R(fit, profile, slope_tol)

        sol = locate_point_R(cam, ImagePoint(point.x_r_px, point.z_r_px), angle.theta_norm_deg)
        rise = plume_rise(cam, sol, point.z_r_px)

        flags = set()
        if point.truncated:
            flags.add("truncated")
        if rise.negative_rise:
            flags.add("negative_rise")
        return MeasurementRecord(
            image_id=mask.source_id,
            timestamp=mask.timestamp,
            phi_deg=wind_rec.phi_deg,
            theta_deg=angle.theta_raw_deg,
            x_r_px=point.x_r_px,
            z_r_px=point.z_r_px,
            x_r_m=sol.x_r_m,
            z_r_m=rise.solution.z_r_m,
            g_r_m_per_px=sol.g_r_m_per_px,
            delta_z_m=rise.delta_z_m,
            x_max_m=rise.x_max_m,
            flags=frozenset(flags),
            error=None,
            run_id=run_id,
        )
    except (
        EmptyPlume,
        VerticalPlume,
        FitDiverged,
        NotLeveled,
        NoWindData,
        DegenerateGeometry,
        ValueError,
    ) as exc:
        return _failure(mask, exc, run_id)


def load_mask(path: Path) -> PlumeMask:
    """Parse a mask file, taking id and timestamp from the filename."""
    path = Path(path)
    image_id, ts = records.parse_mask_filename(path.name)
    return parse_pnm(path.read_bytes(), source_id=image_id, timestamp=ts)


def measure(mask_path, config_path, wind_path, run_id: str = "") -> MeasurementRecord:
    """Single-image convenience wrapper over measure_mask."""
    cam = load_camera(config_path)
    wind = load_wind_csv(Path(wind_path).read_text(encoding="utf-8"))
    return measure_mask(load_mask(Path(mask_path)), cam, wind, run_id=run_id)


def measure_batch(
    mask_paths: Sequence[Path],
    cam: CameraModel,
    wind: WindTable,
    out_path: Optional[Path] = None,
    max_workers: int = 4,
    run_id: Optional[str] = None,
) -> list[MeasurementRecord]:
    """Measure many masks concurrently, appending records as they finish.

    Unreadable or unparseable files become failure records too, so the
    output always has exactly one record per input path.
    """
    run_id = run_id if run_id is not None else _new_run_id()

    def one(path: Path) -> MeasurementRecord:
        path = Path(path)
        try:
            mask = load_mask(path)
        except (OSError, ValueError, MalformedHeader, TruncatedPayload, UnsupportedMaxval) as exc:
            return MeasurementRecord(
                image_id=path.name,
                timestamp=None,
                error=f"{type(exc).__name__}: {exc}",
                run_id=run_id,
            )
        return measure_mask(mask, cam, wind, run_id=run_id)

    results: list[MeasurementRecord] = []
    lock = threading.Lock()
    sink = open(out_path, "a", encoding="utf-8") if out_path is not None else None
    try:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            futures = [pool.submit(one, p) for p in mask_paths]
            for fut in as_completed(futures):
                rec = fut.result()
                with lock:
                    results.append(rec)
                    if sink is not None:
                        sink.write(records.record_to_json(rec) + "\n")
                        sink.flush()
    finally:
        if sink is not None:
            sink.close()
    return results


@dataclass(frozen=True)
class EvalRow:
    image_id: str
    cm: metrics.ConfusionMatrix
    scores: metrics.Scores


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[EvalRow, ...]
    missing_gt: tuple[str, ...]  # prediction files without a ground truth
    missing_pred: tuple[str, ...]  # ground-truth files without a prediction
    macro: metrics.Scores
    micro: metrics.Scores

    @property
    def complete(self) -> bool:
        return not self.missing_gt and not self.missing_pred

    def to_csv(self) -> str:
        def fmt(v) -> str:
            return "" if v is None else f"{v:.6f}"

        lines = ["image_id,tp,fp,fn,tn,accuracy,recall,precision,f1"]
        for row in self.rows:
            cm, s = row.cm, row.scores
            lines.append(
                f"{row.image_id},{cm.tp},{cm.fp},{cm.fn},{cm.tn},"
                f"{fmt(s.accuracy)},{fmt(s.recall)},{fmt(s.precision)},{fmt(s.f1)}"
            )
        pooled = metrics.ConfusionMatrix(0, 0, 0, 0)
        for row in self.rows:
            pooled = pooled + row.cm
        lines.append(
            f"micro,{pooled.tp},{pooled.fp},{pooled.fn},{pooled.tn},"
            f"{fmt(self.micro.accuracy)},{fmt(self.micro.recall)},"
            f"{fmt(self.micro.precision)},{fmt(self.micro.f1)}"
        )
        lines.append(
            f"macro,,,,,"
            f"{fmt(self.macro.accuracy)},{fmt(self.macro.recall)},"
            f"{fmt(self.macro.precision)},{fmt(self.macro.f1)}"
        )
        return "\n".join(lines) + "\n"


def _mask_files(directory: Path) -> dict[str, Path]:
    return {
        p.name: p
        for p in sorted(Path(directory).iterdir())
        if p.suffix.lower() in MASK_SUFFIXES
    }


def evaluate(pred_dir, gt_dir) -> EvalReport:
    """Compare prediction masks against ground truth by matching filenames."""
    preds = _mask_files(Path(pred_dir))
    gts = _mask_files(Path(gt_dir))
    shared = sorted(set(preds) & set(gts))
    rows = []
    for name in shared:
        pred = parse_pnm(preds[name].read_bytes(), source_id=name)
        gt = parse_pnm(gts[name].read_bytes(), source_id=name)
        cm = metrics.confusion(pred, gt)
        rows.append(EvalRow(image_id=name, cm=cm, scores=metrics.scores(cm)))
    cms = [row.cm for row in rows]
    return EvalReport(
        rows=tuple(rows),
        missing_gt=tuple(sorted(set(preds) - set(gts))),
        missing_pred=tuple(sorted(set(gts) - set(preds))),
        macro=metrics.macro_scores(cms),
        micro=metrics.micro_scores(cms),
    )
