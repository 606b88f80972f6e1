import json
from pathlib import Path

import numpy as np
import pytest

from plumerise.cli import main
from plumerise.metrics import confusion, scores
from plumerise.pipeline import evaluate, load_mask, measure, measure_batch, measure_mask
from plumerise.pnm import PlumeMask, encode_pnm, parse_pnm
from plumerise.records import (
    load_wind_csv,
    record_from_json,
)
from plumerise.synth import generate
from helpers import TS, mask_from_art, scenario, site_cam, wind_table_for

SITE_FOV = 55.005224557019146  # 2*atan(0.520625)

CONFIG_TEXT = f"""
camera.width_px = 2592
camera.height_px = 1944
camera.fov_deg = {SITE_FOV}
site.stack_distance_m = 5180
site.plane_azimuth_deg = 252
site.stack_col_px = 1296
site.stack_row_px = 1050
"""

WIND_TEXT = "timestamp,wd_deg\n2019-11-08T18:00:13Z,{phi}\n"


def write_setup(tmp_path: Path, scn, mask=None):
    """Write config, wind csv and one mask; returns their paths."""
    config = tmp_path / "site.cfg"
    config.write_text(CONFIG_TEXT)
    wind = tmp_path / "wind.csv"
    wind.write_text(WIND_TEXT.format(phi=scn.phi_deg))
    masks = tmp_path / "masks"
    masks.mkdir(exist_ok=True)
    if mask is None:
        mask, _ = generate(scn)
    mask_path = masks / f"{scn.image_id}_20191108T180013Z.pgm"
    mask_path.write_bytes(encode_pnm(mask))
    return config, wind, masks, mask_path


class TestMeasure:
    def test_single_mask_against_truth(self, tmp_path):
        scn = scenario(15.0, image_id="I1")
        mask, truth = generate(scn)
        config, wind, masks, mask_path = write_setup(tmp_path, scn, mask)
        rec = measure(mask_path, config, wind)
        assert rec.ok
        assert rec.image_id == "I1"
        assert rec.timestamp == TS
        assert rec.delta_z_m == pytest.approx(truth.delta_z_m, rel=0.02)
        assert rec.theta_deg == pytest.approx(truth.theta_deg)

    def test_empty_mask_failure_record(self):
        empty = PlumeMask(
            width_px=64, height_px=64, pixels=np.zeros((64, 64), bool),
            source_id="E1", timestamp=TS,
        )
        rec = measure_mask(empty, site_cam(stack_col=32, stack_row=40),
                           wind_table_for(252.0))
        assert not rec.ok
        assert "EmptyPlume" in rec.error
        assert rec.delta_z_m is None

    def test_vertical_plume_flagged(self):
        art = ["." * 21 for _ in range(30)]
        for r in range(5, 26):
            art[r] = "." * 9 + "###" + "." * 9
        mask = mask_from_art("\n".join(art), source_id="V1", timestamp=TS)
        cam = site_cam(stack_col=10, stack_row=25, width_px=21, height_px=30)
        rec = measure_mask(mask, cam, wind_table_for(252.0))
        assert not rec.ok
        assert "vertical_plume" in rec.flags
        assert "VerticalPlume" in rec.error

    def test_no_wind_data_isolated(self):
        from datetime import timedelta

        from plumerise.geometry import WindRecord
        from plumerise.records import WindTable

        scn = scenario(0.0)
        mask, _ = generate(scn)
        far = WindTable(records=(WindRecord(timestamp=TS + timedelta(hours=9),
                                            phi_deg=252.0),))
        rec = measure_mask(mask, scn.cam, far)
        assert not rec.ok
        assert "NoWindData" in rec.error


class TestBatch:
    def test_one_record_per_input(self, tmp_path):
        scn = scenario(15.0, image_id="G1")
        config, wind, masks, _ = write_setup(tmp_path, scn)
        # an empty (failing) mask and a corrupt file
        empty = PlumeMask(2592, 1944, np.zeros((1944, 2592), bool))
        (masks / "E1_20191108T180013Z.pgm").write_bytes(encode_pnm(empty))
        (masks / "X1_20191108T180013Z.pgm").write_bytes(b"P5 trash")
        out = tmp_path / "records.jsonl"
        cam = site_cam()
        table = load_wind_csv(wind.read_text())
        paths = sorted(masks.iterdir())
        recs = measure_batch(paths, cam, table, out_path=out, run_id="run-a")
        assert len(recs) == 3
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 3
        by_id = {record_from_json(l).image_id: record_from_json(l) for l in lines}
        assert by_id["G1"].ok
        assert "EmptyPlume" in by_id["E1"].error
        assert not by_id["X1_20191108T180013Z.pgm"].ok

    def test_rerun_identical_apart_from_run_id(self, tmp_path):
        from plumerise.records import record_to_json

        scn = scenario(30.0, image_id="R1")
        config, wind, masks, _ = write_setup(tmp_path, scn)
        cam = site_cam()
        table = load_wind_csv(wind.read_text())
        paths = sorted(masks.iterdir())
        first = measure_batch(paths, cam, table, run_id="a")
        second = measure_batch(paths, cam, table, run_id="b")

        def strip(recs):
            cleaned = []
            for r in recs:
                payload = json.loads(record_to_json(r))
                payload.pop("run_id")
                cleaned.append(json.dumps(payload, sort_keys=True))
            return sorted(cleaned)

        assert strip(first) == strip(second)


class TestEvaluate:
    def test_identical_directories(self, tmp_path):
        rng = np.random.default_rng(60)
        pred_dir = tmp_path / "pred"
        gt_dir = tmp_path / "gt"
        pred_dir.mkdir(), gt_dir.mkdir()
        for i in range(3):
            mask = PlumeMask(9, 7, rng.random((7, 9)) < 0.4)
            data = encode_pnm(mask)
            (pred_dir / f"m{i}.pgm").write_bytes(data)
            (gt_dir / f"m{i}.pgm").write_bytes(data)
        report = evaluate(pred_dir, gt_dir)
        assert report.complete
        for row in report.rows:
            assert row.scores.recall == 1.0
            assert row.scores.precision == 1.0
        assert report.micro.f1 == 1.0
        assert report.macro.f1 == 1.0

    def test_disjoint_masks(self, tmp_path):
        pred_dir = tmp_path / "pred"
        gt_dir = tmp_path / "gt"
        pred_dir.mkdir(), gt_dir.mkdir()
        left = np.zeros((4, 8), bool)
        left[:, :4] = True
        (pred_dir / "m.pgm").write_bytes(encode_pnm(PlumeMask(8, 4, left)))
        (gt_dir / "m.pgm").write_bytes(encode_pnm(PlumeMask(8, 4, ~left)))
        report = evaluate(pred_dir, gt_dir)
        assert report.rows[0].scores.recall == 0.0

    def test_random_pairs_match_reference(self, tmp_path):
        rng = np.random.default_rng(61)
        pred_dir = tmp_path / "pred"
        gt_dir = tmp_path / "gt"
        pred_dir.mkdir(), gt_dir.mkdir()
        expected = {}
        for i in range(5):
            p = rng.random((16, 16)) < 0.3
            g = rng.random((16, 16)) < 0.3
            name = f"r{i}.pgm"
            (pred_dir / name).write_bytes(encode_pnm(PlumeMask(16, 16, p)))
            (gt_dir / name).write_bytes(encode_pnm(PlumeMask(16, 16, g)))
            expected[name] = scores(confusion(PlumeMask(16, 16, p), PlumeMask(16, 16, g)))
        report = evaluate(pred_dir, gt_dir)
        for row in report.rows:
            assert row.scores == expected[row.image_id]

    def test_missing_counterparts_listed(self, tmp_path):
        pred_dir = tmp_path / "pred"
        gt_dir = tmp_path / "gt"
        pred_dir.mkdir(), gt_dir.mkdir()
        m = PlumeMask(2, 2, np.ones((2, 2), bool))
        (pred_dir / "only_pred.pgm").write_bytes(encode_pnm(m))
        (gt_dir / "only_gt.pgm").write_bytes(encode_pnm(m))
        report = evaluate(pred_dir, gt_dir)
        assert report.missing_gt == ("only_pred.pgm",)
        assert report.missing_pred == ("only_gt.pgm",)
        assert not report.complete

    def test_csv_shape(self, tmp_path):
        pred_dir = tmp_path / "pred"
        gt_dir = tmp_path / "gt"
        pred_dir.mkdir(), gt_dir.mkdir()
        m = PlumeMask(2, 2, np.ones((2, 2), bool))
        (pred_dir / "a.pgm").write_bytes(encode_pnm(m))
        (gt_dir / "a.pgm").write_bytes(encode_pnm(m))
        text = evaluate(pred_dir, gt_dir).to_csv()
        lines = text.strip().splitlines()
        assert lines[0] == "image_id,tp,fp,fn,tn,accuracy,recall,precision,f1"
        assert lines[1].startswith("a.pgm,4,0,0,0,")
        assert lines[-2].startswith("micro,")
        assert lines[-1].startswith("macro,")


class TestCli:
    def test_measure_success(self, tmp_path, capsys):
        scn = scenario(15.0, image_id="C1")
        config, wind, masks, _ = write_setup(tmp_path, scn)
        out = tmp_path / "log.jsonl"
        code = main([
            "measure", "--config", str(config), "--wind", str(wind),
            "--masks", str(masks), "--out", str(out),
        ])
        assert code == 0
        assert "C1" in capsys.readouterr().out
        assert out.exists()

    def test_measure_partial_failure(self, tmp_path):
        scn = scenario(15.0, image_id="C2")
        config, wind, masks, _ = write_setup(tmp_path, scn)
        empty = PlumeMask(2592, 1944, np.zeros((1944, 2592), bool))
        (masks / "E9_20191108T180013Z.pgm").write_bytes(encode_pnm(empty))
        out = tmp_path / "log.jsonl"
        code = main([
            "measure", "--config", str(config), "--wind", str(wind),
            "--masks", str(masks), "--out", str(out),
        ])
        assert code == 2

    def test_measure_bad_config(self, tmp_path):
        (tmp_path / "bad.cfg").write_text("camera.width_px = not-a-number\n")
        code = main([
            "measure", "--config", str(tmp_path / "bad.cfg"),
            "--wind", str(tmp_path / "missing.csv"),
            "--masks", str(tmp_path), "--out", str(tmp_path / "o"),
        ])
        assert code == 1

    def test_briggs_command(self, tmp_path, capsys):
        roster = tmp_path / "stacks.csv"
        roster.write_text(
            "id,lat,lon,h_s,d_s,w_s,T_s\nSyn. 12908,57.041,-111.616,183.0,7.9,12.0,427.9\n"
        )
        code = main([
            "briggs", "--config", str(roster), "--stack", "Syn. 12908",
            "--wind-speed", "5", "--x", "1000", "--air-temp-k", "288",
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "F_m=" in out and "delta_z" in out

    def test_briggs_unknown_stack(self, tmp_path):
        roster = tmp_path / "stacks.csv"
        roster.write_text("id,lat,lon,h_s,d_s,w_s,T_s\na,0,0,10,2,5,300\n")
        code = main([
            "briggs", "--config", str(roster), "--stack", "nope",
            "--wind-speed", "5", "--x", "1000",
        ])
        assert code == 1

    def test_loss_check_packaged(self, capsys):
        assert main(["loss-check"]) == 0
        assert "fixtures reproduced" in capsys.readouterr().out

    def test_loss_check_detects_mismatch(self, tmp_path):
        bad = tmp_path / "fx.csv"
        bad.write_text(
            "case,pred_x,pred_y,pred_w,pred_h,gt_x,gt_y,gt_w,gt_h,"
            "anchor_x,anchor_y,anchor_w,anchor_h,direction,rpn_loss,sse_loss\n"
            "wrong,10,20,4,6,10,20,4,6,9,19,4,6,vertical,1.0,1.0\n"
        )
        assert main(["loss-check", "--fixtures", str(bad)]) == 2

    def test_synth_then_eval_round(self, tmp_path, capsys):
        scenario_file = tmp_path / "scn.json"
        scenario_file.write_text(json.dumps({
            "image_id": "S9",
            "timestamp": "2019-11-08T18:00:13Z",
            "phi_deg": 252.0 + 180.0 + 15.0,
            "halfwidth_slope": 0.08,
            "camera": {
                "width_px": 2592, "height_px": 1944, "fov_deg": SITE_FOV,
                "stack_distance_m": 5180, "plane_azimuth_deg": 252,
                "stack_col_px": 1296, "stack_row_px": 1050,
            },
            "stack": {"h_s": 183.0, "d_s": 7.9, "w_s": 12.0, "T_s": 427.9},
            "ambient": {"air_temp_K": 288.0, "mean_wind_mps": 5.0},
        }))
        out_dir = tmp_path / "rendered"
        assert main(["synth", "--scenario", str(scenario_file), "--out", str(out_dir)]) == 0
        produced = list(out_dir.glob("*.pgm"))
        assert len(produced) == 1
        truth = [record_from_json(l) for l in
                 (out_dir / "truth.jsonl").read_text().splitlines()]
        assert truth[0].image_id == "S9"

        # identical dirs evaluate clean through the CLI
        code = main(["eval", "--pred", str(out_dir), "--gt", str(out_dir)])
        assert code == 0
        assert "micro," in capsys.readouterr().out

    def test_eval_missing_counterpart_exit_code(self, tmp_path):
        pred_dir = tmp_path / "p"
        gt_dir = tmp_path / "g"
        pred_dir.mkdir(), gt_dir.mkdir()
        m = PlumeMask(2, 2, np.ones((2, 2), bool))
        (pred_dir / "a.pgm").write_bytes(encode_pnm(m))
        assert main(["eval", "--pred", str(pred_dir), "--gt", str(gt_dir)]) == 2


class TestLoadMask:
    def test_filename_metadata(self, tmp_path):
        mask = PlumeMask(3, 2, np.zeros((2, 3), bool))
        path = tmp_path / "I7_20200101T000000Z.pgm"
        path.write_bytes(encode_pnm(mask))
        loaded = load_mask(path)
        assert loaded.source_id == "I7"
        assert loaded.timestamp is not None
