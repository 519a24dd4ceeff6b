# Copyright 2026 The ged Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Smoke tests for the Python extension."""

import numpy as np
import pytest

import ged


def tiny_config():
    c = ged.UNetConfig()
    c.base_channels = 8
    c.stage_multipliers = [1, 2]
    c.attention_stages = [1]
    c.text_tokens = 4
    c.text_width = 16
    return c


def test_synthetic_image_and_granularities():
    image, annotations = ged.render_synthetic_image(seed=3, size=64)
    assert image.shape == (64, 64, 3) and image.dtype == np.float64
    assert 0.0 <= image.min() and image.max() <= 1.0
    assert len(annotations) >= 2
    assert set(np.unique(annotations[0])) <= {0, 1}
    g = ged.compute_granularities(annotations)
    if g is not None:
        assert min(g) == 0.0 and max(g) == 1.0


def test_codec_shapes():
    image, annotations = ged.render_synthetic_image(seed=1, size=64)
    assert ged.encode_image(image).shape == (4, 8, 8)
    assert ged.encode_edge(annotations[0]).shape == (4, 8, 8)
    with pytest.raises(ValueError):
        ged.encode_image(np.zeros((10, 12, 3)))


def test_caption_embedding_is_deterministic():
    a = ged.embed_caption("a boat", tokens=4, width=16)
    assert a.shape == (4, 16)
    np.testing.assert_array_equal(a, ged.embed_caption("a boat", tokens=4, width=16))


def test_model_predict_and_sweep(tmp_path):
    model = ged.Model(tiny_config())
    image, _ = ged.render_synthetic_image(seed=2, size=64)
    p = model.predict(image, g=0.3)
    assert p.prob_map.shape == (64, 64)
    assert p.granularity == 0.3
    assert ((p.prob_map >= 0) & (p.prob_map <= 1)).all()
    sweep = model.sweep(image, m=5)
    assert [s.granularity for s in sweep] == ged.sweep_grid(5)

    path = tmp_path / "m.ckpt"
    model.save(path)
    again = ged.Model.load(path)
    assert again.parameter_count == model.parameter_count
    assert again.predict(image, g=0.3).prob_map.shape == (64, 64)
    with pytest.raises(OSError):
        ged.Model.load(tmp_path / "missing.ckpt")


def test_matching_and_evaluation():
    _, annotations = ged.render_synthetic_image(seed=4, size=64)
    gt = annotations[0]
    n, pm, gm = ged.correspond_pixels(gt, gt, 1.0)
    assert n == gt.sum() and (pm == gt).all() and (gm == gt).all()

    cfg = ged.MatchConfig()
    cfg.apply_nms = False
    r = ged.evaluate([[gt.astype(float)]], [[gt]], cfg)
    assert r.ods == pytest.approx(1.0) and r.ois == pytest.approx(1.0)
    assert len(r.curve) == 99

    noisy = np.clip(gt * 0.8 + 0.3 * np.random.default_rng(0).random(gt.shape), 0, 1)
    multi = ged.evaluate([[noisy, gt.astype(float)]], [[gt]], cfg)
    single = ged.evaluate([[noisy]], [[gt]], cfg)
    assert multi.ods >= single.ods
    assert multi.ois >= multi.ods

    thinned = ged.nms_thin(np.zeros((16, 16)))
    assert thinned.shape == (16, 16) and not thinned.any()
    with pytest.raises(ValueError):
        ged.evaluate([[noisy]], [[gt, gt[:10]]], cfg)
    with pytest.raises(ValueError):
        ged.prediction_filename("x", 2.0)
