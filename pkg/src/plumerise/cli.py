"""Command-line entry points.

Subcommands:
    measure     batch-measure plume rise from a directory of masks
    briggs      evaluate the parameterized rise for a rostered stack
    eval        score predicted masks against ground truth
    synth       render synthetic scenarios with truth records
    loss-check  verify a loss conformance fixture table

Exit codes: 0 full success, 1 configuration/usage errors, 2 partial
failures (some images failed, fixtures mismatched, counterparts missing).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import briggs, pipeline, rpn_loss, synth
from .config import ConfigError, load_camera
from .pnm import encode_pnm
from .records import ParseError, format_mask_filename, load_wind_csv, record_to_json

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_CONFIG


def cmd_measure(args) -> int:
    try:
        cam = load_camera(args.config)
        wind = load_wind_csv(Path(args.wind).read_text(encoding="utf-8"))
    except (OSError, ConfigError, ParseError, ValueError) as exc:
        return _fail(str(exc))
    masks_dir = Path(args.masks)
    if not masks_dir.is_dir():
        return _fail(f"mask directory {masks_dir} not found")
    paths = sorted(
        p for p in masks_dir.iterdir() if p.suffix.lower() in pipeline.MASK_SUFFIXES
    )
    if not paths:
        return _fail(f"no mask files in {masks_dir}")
    recs = pipeline.measure_batch(
        paths, cam, wind, out_path=Path(args.out), max_workers=args.workers
    )
    failures = 0
    for rec in sorted(recs, key=lambda r: r.image_id):
        if rec.ok:
            print(
                f"{rec.image_id}: delta_z={rec.delta_z_m:.1f} m "
                f"x_max={rec.x_max_m:.0f} m theta={rec.theta_deg:.1f} deg"
                + (f" [{','.join(sorted(rec.flags))}]" if rec.flags else "")
            )
        else:
            failures += 1
            print(f"{rec.image_id}: FAILED {rec.error}")
    print(f"{len(recs) - failures}/{len(recs)} measured, log: {args.out}")
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_briggs(args) -> int:
    try:
        roster = briggs.load_stack_roster(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        return _fail(str(exc))
    if args.stack not in roster:
        return _fail(f"stack {args.stack!r} not in roster ({', '.join(sorted(roster))})")
    stack = roster[args.stack]
    try:
        amb = briggs.AmbientConditions(
            air_temp_K=args.air_temp_k,
            mean_wind_mps=args.wind_speed,
            density_ratio=args.density_ratio,
            entrainment=args.entrainment,
        )
        f_m = briggs.momentum_flux(stack, amb)
        f_b = briggs.buoyancy_flux(stack, amb, velocity_squared=args.velocity_squared)
        delta_z = briggs.rise_at_distance(f_m, f_b, args.wind_speed, args.x, args.entrainment)
    except ValueError as exc:
        return _fail(str(exc))
    print(f"stack {stack.id}: F_m={f_m:.1f} m^4/s^2 F_b={f_b:.1f} m^4/s^3")
    print(f"delta_z({args.x:.0f} m) = {delta_z:.1f} m at u={args.wind_speed} m/s")
    return EXIT_OK


def cmd_eval(args) -> int:
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    if not pred_dir.is_dir() or not gt_dir.is_dir():
        return _fail("both --pred and --gt must be directories")
    report = pipeline.evaluate(pred_dir, gt_dir)
    sys.stdout.write(report.to_csv())
    for name in report.missing_gt:
        print(f"missing ground truth for {name}", file=sys.stderr)
    for name in report.missing_pred:
        print(f"missing prediction for {name}", file=sys.stderr)
    return EXIT_OK if report.complete else EXIT_PARTIAL


def cmd_synth(args) -> int:
    try:
        data = json.loads(Path(args.scenario).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        return _fail(f"scenario file: {exc}")
    entries = data["scenarios"] if isinstance(data, dict) and "scenarios" in data else [data]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    failures = 0
    with open(out_dir / "truth.jsonl", "a", encoding="utf-8") as truth_log:
        for entry in entries:
            try:
                scn = synth.scenario_from_dict(entry)
                mask, truth = synth.generate(scn)
            except (KeyError, ValueError) as exc:
                failures += 1
                print(f"scenario {entry.get('image_id', '?')}: {exc}", file=sys.stderr)
                continue
            name = format_mask_filename(scn.image_id, scn.timestamp)
            (out_dir / name).write_bytes(encode_pnm(mask))
            truth_log.write(record_to_json(truth) + "\n")
            print(f"{name}: delta_z={truth.delta_z_m:.1f} m")
    if failures == len(entries):
        return EXIT_CONFIG
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_loss_check(args) -> int:
    try:
        text = (
            Path(args.fixtures).read_text(encoding="utf-8")
            if args.fixtures
            else rpn_loss.packaged_fixtures_text()
        )
        fixtures = rpn_loss.load_loss_fixtures(text)
    except (OSError, KeyError, ValueError) as exc:
        return _fail(f"fixture file: {exc}")
    bad = 0
    for fx in fixtures:
        ok, got_rpn, got_sse = rpn_loss.check_fixture(fx, atol=args.atol)
        status = "ok" if ok else "MISMATCH"
        print(
            f"{fx.case}: {status} rpn={got_rpn:.12g} (want {fx.rpn_loss:.12g}) "
            f"sse={got_sse:.12g} (want {fx.sse_loss:.12g})"
        )
        bad += 0 if ok else 1
    print(f"{len(fixtures) - bad}/{len(fixtures)} fixtures reproduced")
    return EXIT_PARTIAL if bad else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plumerise", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("measure", help="measure plume rise for a directory of masks")
    p.add_argument("--config", required=True, help="camera/site config file")
    p.add_argument("--wind", required=True, help="wind CSV (timestamp,wd_deg)")
    p.add_argument("--masks", required=True, help="directory of netpbm masks")
    p.add_argument("--out", required=True, help="record log to append to (JSON lines)")
    p.add_argument("--workers", type=int, default=4)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("briggs", help="parameterized rise for a rostered stack")
    p.add_argument("--config", required=True, help="stack roster CSV (id,lat,lon,h_s,d_s,w_s,T_s)")
    p.add_argument("--stack", required=True, help="stack id from the roster")
    p.add_argument("--wind-speed", type=float, required=True, help="mean wind, m/s")
    p.add_argument("--x", type=float, required=True, help="downwind distance, m")
    p.add_argument("--air-temp-k", type=float, default=288.15)
    p.add_argument("--density-ratio", type=float, default=None)
    p.add_argument("--entrainment", type=float, default=briggs.DEFAULT_ENTRAINMENT)
    p.add_argument("--velocity-squared", action="store_true",
                   help="use the squared-velocity buoyancy flux variant")
    p.set_defaults(func=cmd_briggs)

    p = sub.add_parser("eval", help="score predicted masks against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="render synthetic scenarios")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("loss-check", help="verify a loss conformance fixture table")
    p.add_argument("--fixtures", default=None, help="fixture CSV (default: packaged table)")
    p.add_argument("--atol", type=float, default=1e-9)
    p.set_defaults(func=cmd_loss_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
