import csv
import io
import math

import pytest

import pinnbridge as pb

DEFAULT_BRIDGE = {
    "beam_count": 20,
    "beam_lengths_mm": [50.0] * 20,
    "beam_diameter_mm": 1.9,
    "mean_angle_deg": 45.0,
}


def test_feature_vector_matches_schema():
    assert pb.feature_vector(DEFAULT_BRIDGE) == [20, 1000, 50, 1.9, 45, 1.4, 3.8, 30]
    assert len(pb.feature_names()) == 8


def test_invalid_geometry_raises():
    bad = dict(DEFAULT_BRIDGE, beam_count=0)
    with pytest.raises(pb.PinnbridgeError, match="beam_count"):
        pb.feature_vector(bad)


def test_weight_from_geometry_hand_value():
    area = math.pi * 1.9**2 / 4
    assert pb.weight_from_geometry(DEFAULT_BRIDGE) == pytest.approx(1.4e-3 * area * 1000, rel=1e-12)


def test_consistency_residuals_vanish_at_geometric_weight():
    w = pb.weight_from_geometry(DEFAULT_BRIDGE)
    r = pb.physics_residuals(DEFAULT_BRIDGE, w, "pikan")
    assert r["terms"]["hooke"] == 0.0
    assert r["terms"]["shear_stress_strain"] == 0.0
    assert r["terms"]["weight"] == 0.0


def test_metrics_hand_case():
    m = pb.compute_metrics([1, 2, 3, 4], [1, 2, 3, 5])
    assert m["mse"] == pytest.approx(0.25)
    assert m["r2"] == pytest.approx(0.8)


def test_augment_counts_and_determinism():
    src = pb.synthesize_csv(7, 15)
    a = pb.augment_csv(src, 40, 3)
    b = pb.augment_csv(src, 40, 3)
    assert a == b
    rows = list(csv.DictReader(io.StringIO(a)))
    assert len(rows) == 40


def test_train_predict_roundtrip(tmp_path):
    data = pb.augment_csv(pb.synthesize_csv(42, 15), 60, 42)
    model, metrics, history = pb.train(data, "pikan", seed=1, epochs=5)
    assert model.arch == "pikan"
    assert math.isfinite(metrics["r2"])
    assert history.splitlines()[0].startswith("epoch,")
    assert len(history.splitlines()) == 6
    w = pb.predict(model, DEFAULT_BRIDGE)
    assert math.isfinite(w)
    path = tmp_path / "m.json"
    model.save(str(path))
    again = pb.load_model(str(path))
    assert pb.predict(again, DEFAULT_BRIDGE) == w


def test_segment_angle_examples():
    assert pb.segment_angle(1.0, 0.0) == pytest.approx(45.0)
    assert pb.segment_angle(math.sqrt(3), 0.0) == pytest.approx(60.0)
    assert pb.segment_angle(None, 0.0) == pytest.approx(90.0)


def test_extract_rendered_triangle():
    png = pb.render_truss([(0, 0), (180, 0), (90, 120)], [(0, 1), (1, 2), (0, 2)])
    out = pb.extract(png, 0.5)
    assert out["beam_count"] == 3
    assert sorted(out["beam_lengths_mm"]) == pytest.approx([150, 150, 180], rel=0.05)


def test_extract_blank_image_has_no_structure():
    png = pb.render_truss([(0, 0)], [], 0.5)
    with pytest.raises(pb.PinnbridgeError, match="NoStructure"):
        pb.extract(png, 0.5)
