import csv
import json
import math
import os
import socket
import struct
import subprocess
import time
import urllib.request
import zlib

import pytest

BRIDGE = os.environ.get("BRIDGE_EXE", "bridge")

DEFAULT_BRIDGE = {
    "beam_count": 20,
    "beam_lengths_mm": [50.0] * 20,
    "beam_diameter_mm": 1.9,
    "mean_angle_deg": 45.0,
}


def run(*args, stdin=None):
    return subprocess.run([BRIDGE, *map(str, args)], input=stdin, capture_output=True, text=True, timeout=300)


def rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def png_bytes(width, height, ink):
    """8-bit grayscale PNG; ink(x, y) -> True for black."""
    raw = bytearray()
    for y in range(height):
        raw.append(0)
        raw.extend(0 if ink(x, y) else 255 for x in range(width))

    def chunk(tag, data):
        body = tag + data
        return struct.pack(">I", len(data)) + body + struct.pack(">I", zlib.crc32(body))

    header = struct.pack(">IIBBBBB", width, height, 8, 0, 0, 0, 0)
    return b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", header) + chunk(b"IDAT", zlib.compress(bytes(raw))) + chunk(b"IEND", b"")


def truss_png(nodes, members, width, height, half_width=2.0):
    def near(x, y):
        for a, b in members:
            (x0, y0), (x1, y1) = nodes[a], nodes[b]
            dx, dy = x1 - x0, y1 - y0
            t = max(0.0, min(1.0, ((x - x0) * dx + (y - y0) * dy) / (dx * dx + dy * dy)))
            if math.hypot(x - (x0 + t * dx), y - (y0 + t * dy)) <= half_width:
                return True
        return False

    return png_bytes(width, height, near)


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("synthesize", "--out", d / "src.csv", "--seed", 42, "--count", 15).returncode == 0
    assert run("augment", "--in", d / "src.csv", "--out", d / "aug.csv", "--count", 100, "--seed", 42).returncode == 0
    r = run("train", "--data", d / "aug.csv", "--arch", "pikan", "--out", d / "model.json", "--history", d / "hist.csv")
    assert r.returncode == 0, r.stderr
    return d


def test_augment_grows_15_rows_to_100(work):
    assert len(rows(work / "src.csv")) == 15
    assert len(rows(work / "aug.csv")) == 100


def test_augment_below_source_count_is_a_usage_error(work, tmp_path):
    r = run("augment", "--in", work / "src.csv", "--out", tmp_path / "x.csv", "--count", 10)
    assert r.returncode == 2
    assert r.stdout == ""


def test_augment_same_seed_same_bytes(work, tmp_path):
    for name in ("a.csv", "b.csv"):
        assert run("augment", "--in", work / "src.csv", "--out", tmp_path / name, "--seed", 7).returncode == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_train_writes_model_and_history(work):
    model = json.loads((work / "model.json").read_text())
    assert model["format"] == "pinnbridge-model"
    assert model["arch"] == "pikan"
    history = (work / "hist.csv").read_text().splitlines()
    assert history[0].startswith("epoch,")
    assert len(history) == 80 + 1


def test_train_pinn_defaults_are_batch_32_and_200_epochs(work, tmp_path):
    r = run("train", "--data", work / "aug.csv", "--arch", "pinn", "--out", tmp_path / "m.json",
            "--history", tmp_path / "h.csv", "--no-early-stopping")
    assert r.returncode == 0, r.stderr
    assert len((tmp_path / "h.csv").read_text().splitlines()) == 200 + 1
    out = json.loads(r.stdout)
    assert out["metrics"]["epochs_run"] == 200


def test_train_same_seed_same_bytes(work, tmp_path):
    for name in ("a", "b"):
        r = run("train", "--data", work / "aug.csv", "--arch", "pikan", "--epochs", 5, "--out", tmp_path / f"{name}.json",
                "--history", tmp_path / f"{name}.csv")
        assert r.returncode == 0, r.stderr
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_evaluate_writes_five_reports(work, tmp_path):
    r = run("evaluate", "--model", work / "model.json", "--data", work / "aug.csv", "--report", tmp_path / "rep",
            "--subset", "test")
    assert r.returncode == 0, r.stderr
    assert sorted(os.listdir(tmp_path / "rep")) == sorted([
        "metrics.json", "range_breakdown.csv", "error_distribution.csv", "sensitivity.csv", "physics_contribution.csv"])
    metrics = json.loads((tmp_path / "rep" / "metrics.json").read_text())
    assert metrics["r2"] >= 0.90


def test_evaluate_missing_model_is_a_usage_error(work, tmp_path):
    r = run("evaluate", "--model", tmp_path / "absent.json", "--data", work / "aug.csv", "--report", tmp_path / "rep")
    assert r.returncode == 2
    assert "not found" in r.stderr


def test_evaluate_schema_mismatch_exits_1(work, tmp_path):
    model = json.loads((work / "model.json").read_text())
    model["schema"]["hash"] = "0" * len(model["schema"]["hash"])
    (tmp_path / "bad.json").write_text(json.dumps(model))
    r = run("evaluate", "--model", tmp_path / "bad.json", "--data", work / "aug.csv", "--report", tmp_path / "rep")
    assert r.returncode == 1
    assert "schema" in r.stderr


def test_predict_reads_stdin(work):
    r = run("predict", "--model", work / "model.json", stdin=json.dumps(DEFAULT_BRIDGE))
    assert r.returncode == 0, r.stderr
    out = json.loads(r.stdout)
    assert math.isfinite(out["weight_g"])
    assert out["error_band_g"] >= 0


def test_predict_invalid_geometry_exits_1(work):
    r = run("predict", "--model", work / "model.json", stdin=json.dumps(dict(DEFAULT_BRIDGE, beam_count=0)))
    assert r.returncode == 1
    err = json.loads(r.stdout)
    assert err["error"] == "InvalidGeometry"
    assert "beam_count" in err["message"]


def test_extract_triangle_render(tmp_path):
    # 0.5 mm per pixel: base 180 mm, sides 150 mm.
    nodes = [(60, 300), (420, 300), (240, 60)]
    (tmp_path / "t.png").write_bytes(truss_png(nodes, [(0, 1), (1, 2), (0, 2)], 480, 360))
    r = run("extract", "--image", tmp_path / "t.png", "--scale", 0.5)
    assert r.returncode == 0, r.stderr
    out = json.loads(r.stdout)
    assert out["beam_count"] == 3
    assert sorted(out["beam_lengths_mm"]) == pytest.approx([150, 150, 180], rel=0.05)


def test_extract_blank_image_exits_1(tmp_path):
    (tmp_path / "blank.png").write_bytes(png_bytes(200, 200, lambda x, y: False))
    r = run("extract", "--image", tmp_path / "blank.png", "--scale", 0.5)
    assert r.returncode == 1
    assert "NoStructure" in r.stderr


def test_report_from_history(work, tmp_path):
    r = run("report", "--history", work / "hist.csv", "--out", tmp_path / "fig")
    assert r.returncode == 0, r.stderr
    assert len(rows(tmp_path / "fig" / "loss_history.csv")) == 80
    assert (tmp_path / "fig" / "physics_contribution.csv").exists()


def test_serve_lists_models(work):
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    proc = subprocess.Popen([BRIDGE, "serve", "--model", str(work / "model.json"), "--bind", f"127.0.0.1:{port}"],
                            stdout=subprocess.PIPE, stderr=subprocess.PIPE)
    try:
        deadline = time.time() + 20
        while True:
            try:
                with urllib.request.urlopen(f"http://127.0.0.1:{port}/api/models", timeout=2) as resp:
                    assert resp.status == 200
                    body = json.loads(resp.read())
                    break
            except OSError:
                if time.time() > deadline or proc.poll() is not None:
                    raise
                time.sleep(0.1)
        assert body["models"][0]["arch"] == "pikan"
    finally:
        proc.terminate()
        proc.wait(timeout=10)
