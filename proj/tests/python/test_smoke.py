"""Smoke tests for the Python bindings: op correctness on small cases plus
one tiny end-to-end pipeline run."""

import numpy as np
import pytest

import lesionnet as ln


def test_conv2d_all_ones_counts_neighbourhood():
    x = np.ones((1, 3, 3))
    k = np.ones((1, 1, 3, 3))
    b = np.zeros(1)
    out = ln.conv2d(x, k, b)
    assert out.shape == (1, 3, 3)
    assert out[0, 0, 0] == 4.0  # corner sees a 2x2 neighbourhood
    assert out[0, 0, 1] == 6.0
    assert out[0, 1, 1] == 9.0


def test_basic_ops():
    assert np.array_equal(ln.relu(np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 2.0])
    pooled = ln.maxpool2(np.arange(16.0).reshape(1, 4, 4))
    assert np.array_equal(pooled, [[[5.0, 7.0], [13.0, 15.0]]])
    assert np.allclose(ln.global_avg_pool(np.arange(8.0).reshape(2, 2, 2)), [1.5, 5.5])
    assert np.allclose(ln.dense(np.array([1.0, 2.0]), np.array([[3.0, 4.0]]), np.array([0.5])), [11.5])
    probs = ln.softmax(np.array([0.0, 0.0, np.log(2.0)]))
    assert np.allclose(probs, [0.25, 0.25, 0.5])
    assert ln.cross_entropy(np.array([0.25, 0.25, 0.5]), 2) == pytest.approx(np.log(2.0))


def test_metrics():
    assert ln.roc_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    assert ln.roc_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
    assert ln.roc_auc([0.5, 0.5], [0, 1]) == 0.5
    assert ln.accuracy([0.6, 0.4], [1, 0]) == 1.0


def test_dihedral_matches_numpy():
    base = np.arange(16.0).reshape(4, 4)
    img = np.stack([base, base + 100.0, base + 200.0])
    for g in range(8):
        rotated = np.rot90(base, -(g % 4))
        expected = np.fliplr(rotated) if g >= 4 else rotated
        out = ln.apply_dihedral(g, img)
        assert np.array_equal(out[0], expected), ln.dihedral_name(g)
        assert np.array_equal(out[2], expected + 200.0)

    for g2 in range(8):
        for g1 in range(8):
            composed = ln.dihedral_compose(g2, g1)
            assert np.array_equal(
                ln.apply_dihedral(composed, img), ln.apply_dihedral(g2, ln.apply_dihedral(g1, img))
            )
    for g in range(8):
        assert ln.dihedral_compose(ln.dihedral_inverse(g), g) == 0
    assert ln.dihedral_names[0] == "id"


def test_resize_and_crop():
    img = np.arange(3.0 * 4 * 4).reshape(3, 4, 4) / 47.0  # normalized images live in [0, 1]
    assert np.array_equal(ln.resize_bilinear(img, 4, 4), img)  # identity at the same size
    assert np.array_equal(ln.center_crop(img, 2), img[:, 1:3, 1:3])


def test_synth_image_deterministic():
    a = ln.synth_image("melanoma", seed=4)
    b = ln.synth_image("melanoma", seed=4)
    assert a.shape == (256, 256, 3) and a.dtype == np.uint8
    assert np.array_equal(a, b)
    assert not np.array_equal(a, ln.synth_image("nevus", seed=4))


TINY_CONFIG = """
seed = 3
coarse_size = 16
fine_resize = 32
crop_size = 16
hidden_units = 8
blocks = 4,8,16
batch_size = 6
stage1_updates = 2
stage1_lr = 0.01
stage2_updates = 2
stage2_lr = 0.005
unfreeze_blocks = 1
"""


def test_pipeline_end_to_end(tmp_path):
    data = tmp_path / "data"
    ln.synth_dataset(data, 2, 1, 5)
    config = tmp_path / "run.cfg"
    config.write_text(TINY_CONFIG)

    weights = tmp_path / "model.bin"
    result = ln.train(config, data / "train.csv", weights)
    assert result["entries"] == 6
    assert result["updates"] == 4
    assert np.isfinite(result["final_loss"])
    assert weights.exists() and (tmp_path / "model.bin.log.csv").exists()

    preds = tmp_path / "preds.csv"
    assert ln.predict(weights, data / "test.csv", preds, tta=True) == 3

    report = ln.evaluate(preds, data / "test.csv")
    for task in ("melanoma", "seborrheic_keratosis", "average"):
        assert 0.0 <= report[task]["accuracy"] <= 1.0
        assert 0.0 <= report[task]["auc"] <= 1.0

    merged = tmp_path / "ensemble.csv"
    assert ln.ensemble([preds, preds], merged) == 3

    image_path = next((data / "images").glob("test_*.ppm"))
    probs = ln.predict_image(weights, image_path, tta=False)
    assert probs.shape == (3,)
    assert probs.sum() == pytest.approx(1.0)
    assert (probs > 0).all()


def test_default_config_round_trips_keys():
    text = ln.default_config()
    assert "blocks = 8,16,32,64" in text
    assert "stage1_updates = 150" in text
    assert "tta = true" in text


def test_errors_surface_as_exceptions(tmp_path):
    with pytest.raises(RuntimeError, match="dihedral"):
        ln.apply_dihedral(9, np.zeros((1, 2, 2)))
    with pytest.raises(RuntimeError, match="cannot open"):
        ln.evaluate(tmp_path / "missing.csv", tmp_path / "missing2.csv")
