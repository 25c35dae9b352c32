import numpy as np
import pytest

import aost


def test_version_string():
    assert aost.__version__.startswith("aost ")


def test_schema_lists_dimensions():
    dims = dict(aost.schema())
    assert dims["weather"] == 7
    assert dims["background"] == 9


def test_render_shape_and_determinism():
    config = [c // 2 for _, c in aost.schema()]
    a = aost.render(config, identity=3, seed=11, width=32, height=64)
    b = aost.render(config, identity=3, seed=11, width=32, height=64)
    assert a.shape == (64, 32, 3)
    assert a.dtype == np.uint8
    assert np.array_equal(a, b)


def test_total_distance_defaults():
    assert aost.total_distance(2.0, 1.0) == 2.8
    with pytest.raises(ValueError):
        aost.total_distance(1.0, 1.0, alpha=-1.0)


def test_image_distance_zero_on_identical_images():
    config = [0 for _ in aost.schema()]
    img = aost.render(config, width=32, height=64)
    d = aost.image_distance(img, img)
    assert d["d_style"] == 0.0
    assert d["d_content"] == 0.0
    other = aost.render(config, seed=5, width=32, height=64)
    assert aost.image_distance(img, other)["d_total"] > 0.0


def test_image_distance_rejects_bad_shapes():
    with pytest.raises(ValueError):
        aost.image_distance(np.zeros((64, 32), np.uint8), np.zeros((64, 32), np.uint8))


def test_fid_one_dimensional():
    assert aost.fid([0.0], [[1.0]], [1.0], [[1.0]]) == pytest.approx(1.0, abs=1e-8)


def test_main_reports_version(capsys):
    assert aost.main(["--version"]) == 0
