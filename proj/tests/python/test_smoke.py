import math
import os
from pathlib import Path

import numpy as np
import pytest

import copyscope as cs

DATA = Path(os.environ.get("COPYSCOPE_DATA_DIR", Path(__file__).resolve().parents[2] / "data"))


def random_image(rng, h=24, w=24):
    return cs.Image(rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8))


def test_image_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    arr = rng.integers(0, 256, size=(10, 12, 3), dtype=np.uint8)
    img = cs.Image(arr)
    assert (img.width, img.height, img.channels) == (12, 10, 3)
    cs.save_png(img, tmp_path / "a.png")
    back = cs.load_image(tmp_path / "a.png")
    assert np.array_equal(back.to_numpy(), arr)
    assert cs.to_grayscale(img).channels == 1
    assert cs.resize(img, 5, 4).to_numpy().shape == (4, 5, 3)


def test_metrics():
    rng = np.random.default_rng(1)
    a = random_image(rng)
    b = random_image(rng)
    assert cs.cosine_similarity(a, a) == pytest.approx(1.0, abs=1e-12)
    assert cs.ssim(a, a, resolution=None) == pytest.approx(1.0, abs=1e-12)
    assert cs.rgb_ssim(a, a) == pytest.approx(1.0, abs=1e-12)
    assert cs.hist_similarity(a, a) == 1.0
    assert cs.dhash_similarity(a, a) == 1.0
    for f in (cs.cosine_similarity, cs.hist_similarity, cs.ssim, cs.rgb_ssim):
        assert f(a, b) == pytest.approx(f(b, a), abs=1e-12)
    assert cs.dhash(cs.Image(np.full((8, 9), 7, dtype=np.uint8))) == 0


def test_black_image_cosine_raises():
    with pytest.raises(cs.CopyscopeError, match="undefined"):
        cs.cosine_similarity(cs.Image(np.zeros((8, 8), np.uint8)), cs.Image(np.ones((8, 8), np.uint8)))


def test_fid_closed_forms():
    assert cs.fid(np.zeros(1), np.eye(1), np.full(1, 2.0), np.eye(1)) == pytest.approx(4.0, abs=1e-9)
    v = cs.fid(np.zeros(2), np.diag([1.0, 4.0]), np.ones(2), np.diag([4.0, 1.0]))
    assert v == pytest.approx(4.0, abs=1e-9)
    root = cs.matrix_sqrt_psd(np.diag([4.0, 9.0]))
    assert np.allclose(root, np.diag([2.0, 3.0]))
    mean, cov = cs.fit_gaussian(np.array([[0.0, 0.0], [2.0, 2.0]]))
    assert np.allclose(mean, [1.0, 1.0])
    assert np.allclose(cov, [[2.0, 2.0], [2.0, 2.0]])


def test_feature_file(tmp_path):
    rng = np.random.default_rng(2)
    x = rng.normal(size=(20, 4)).astype(np.float32).astype(np.float64)
    cs.write_feature_file(tmp_path / "f.csf1", x, [f"img{i}" for i in range(20)])
    matrix, labels, tag = cs.read_feature_file(tmp_path / "f.csf1")
    assert np.array_equal(matrix, x)
    assert labels[3] == "img3"
    assert tag == "external:unknown"
    assert cs.fid_features(matrix, matrix) == pytest.approx(0.0, abs=1e-6)


def test_appendix_attribution():
    table = cs.load_value_table(DATA / "appendix_fid.csv", "LowerIsBetter", "SDv1-5")
    assert table.complete()
    assert table.utility([]) == 0.0
    assert table.utility(table.players) == pytest.approx(125.49, abs=1e-9)
    shap = cs.shapley_exact(table)
    assert sum(shap["values"].values()) == pytest.approx(125.49, abs=1e-6)
    assert math.isclose(sum(shap["normalized"].values()), 1.0)
    assert cs.check_axioms(table)["efficiency"]
    assert len(cs.loo(table)["ranking"]) == 5
    assert cs.ablate(table)["entries"][0]["player"] == "Davinci"


def test_glove_game_and_sampling():
    values = {(): 0.0, ("L",): 0.0, ("R1",): 0.0, ("R2",): 0.0, ("R1", "R2"): 0.0,
              ("L", "R1"): 1.0, ("L", "R2"): 1.0, ("L", "R1", "R2"): 1.0}
    table = cs.ValueTable(["L", "R1", "R2"], {k: v for k, v in values.items()}, "HigherIsBetter")
    exact = cs.shapley_exact(table, norm="none")["values"]
    assert exact["L"] == pytest.approx(2 / 3, abs=1e-12)
    assert exact["R1"] == pytest.approx(1 / 6, abs=1e-12)
    one = cs.shapley_sampled(table, 20000, seed=5, threads=1)
    four = cs.shapley_sampled(table, 20000, seed=5, threads=4)
    assert one["values"] == four["values"]
    assert abs(one["values"]["L"] - 2 / 3) < 0.02


def test_incomplete_table_raises():
    with pytest.raises(cs.CopyscopeError, match="completeness"):
        cs.shapley_exact(cs.ValueTable(["a", "b"], {"": 0.0, "a": 1.0}, "HigherIsBetter"))
