import math
import os
import subprocess

import numpy as np
import pytest

import hmgdyn


def texture(size, seed):
    rng = np.random.default_rng(seed)
    coarse = rng.uniform(0.1, 0.9, size=(size // 4 + 1, size // 4 + 1))
    return np.kron(coarse, np.ones((4, 4)))[:size, :size].astype(np.float32)


def test_geometry_round_trip():
    d = np.array([1.5, -2.0, 3.0, 0.5, -1.0, 2.5, 0.0, -3.0])
    h = hmgdyn.displacement_to_homography(d, 64, 64)
    assert h.shape == (3, 3)
    back = hmgdyn.homography_to_displacement(h, 64, 64)
    assert np.allclose(back, d, atol=1e-9)
    hi = hmgdyn.invert(h)
    x, y = hmgdyn.apply(hi, *hmgdyn.apply(h, 10.0, 20.0))
    assert abs(x - 10.0) < 1e-9 and abs(y - 20.0) < 1e-9


def test_corner_error_translation():
    t = np.eye(3)
    t[0, 2], t[1, 2] = 3.0, 4.0
    assert abs(hmgdyn.mean_corner_error(t, np.eye(3), 64, 64) - 5.0) < 1e-9


def test_warp_identity_and_pyramid():
    img = texture(64, 1)
    assert np.array_equal(hmgdyn.warp(img, np.eye(3)), img)
    levels = hmgdyn.build_pyramid(img, 3)
    assert [lv.shape for lv in levels] == [(64, 64), (32, 32), (16, 16)]
    assert hmgdyn.anaglyph(img, img).shape == (64, 64, 3)


def test_png_round_trip(tmp_path):
    img = texture(32, 2)
    path = tmp_path / "a.png"
    hmgdyn.write_png(path, img)
    back = hmgdyn.read_gray_png(path)
    assert np.max(np.abs(back - img)) <= 0.5 / 255 + 1e-6


def test_losses():
    pred = [np.full((8, 8), 0.5, np.float32)]
    gt = [np.zeros((8, 8), np.float32)]
    assert abs(hmgdyn.mask_loss(pred, gt) - math.log(2.0)) < 1e-9
    assert hmgdyn.total_loss([1.0, 2.0], [0.5, 0.5], 1.0, 2.0) == pytest.approx(5.0)


def test_clip_and_pair():
    frames, masks = hmgdyn.synth_dynamic_clip(3, frame_size=96, length=10, octaves=4)
    assert len(frames) == 10
    pair = hmgdyn.generate_pair(frames[0], frames[2], masks[0], masks[2], 5, patch_size=64, perturb_range=8.0)
    h = hmgdyn.displacement_to_homography(pair["gt_displacement"], 64, 64)
    aligned = hmgdyn.warp(pair["patch_b"], h)
    valid = hmgdyn.warp(np.ones((64, 64), np.float32), h) > 0.999
    assert np.mean(np.abs(aligned - pair["patch_a"])[valid]) < 0.02


def test_config_error_is_raised():
    with pytest.raises(hmgdyn.Error):
        hmgdyn.synth_dynamic_clip(1, length=5)


def test_dataset_and_evaluate(tmp_path):
    hmgdyn.synth_dataset(tmp_path / "ds", num_samples=6, seed=4)
    samples = hmgdyn.read_dataset(tmp_path / "ds")
    assert len(samples) == 6
    oracle = hmgdyn.evaluate(samples, "oracle")
    ident = hmgdyn.evaluate(samples, "identity")
    assert oracle["mean_ec"] < 1e-6
    assert ident["mean_ec"] > 1.0
    assert all(a <= b for a, b in zip(ident["cdf"], ident["cdf"][1:]))


@pytest.mark.skipif(not os.environ.get("HMGDYN_CLI"), reason="CLI path not provided")
def test_model_from_cli_checkpoint(tmp_path):
    cli = os.environ["HMGDYN_CLI"]
    ds = tmp_path / "ds"
    subprocess.run([cli, "synth", "--num-samples", "8", "--out", str(ds)], check=True, capture_output=True)
    subprocess.run([cli, "train", "--dataset", str(ds), "--model", "mhn_m", "--out", str(tmp_path / "run"),
                    "--set", "train.batch_size=2", "--set", "train.phases=1:1:0,1:1:10,1:1:0"],
                   check=True, capture_output=True)
    model = hmgdyn.Model.load(tmp_path / "run" / "checkpoint.bin")
    assert model.mask_enabled and model.iteration == 3 and model.input_size == 64
    samples = hmgdyn.read_dataset(ds)
    out = model.estimate(samples[0]["patch_b"], samples[0]["patch_a"])
    assert out["homography"].shape == (3, 3)
    assert len(out["scales"]) == model.n_scales
    assert out["scales"][-1]["mask1"].shape == (64, 64)
    report = hmgdyn.evaluate(samples, "model", model)
    assert math.isfinite(report["mean_ec"])
