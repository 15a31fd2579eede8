"""Backend equivalence and tie-rule checks for the geometric kernels."""

import numpy as np
import pytest

from mutualkp import kernels
from mutualkp.kernels import pure


def _compiled():
    try:
        from mutualkp.kernels import _core
    except ImportError:
        pytest.skip("compiled kernel backend not built")
    return _core


def test_backend_reports_name():
    assert kernels.backend() in ("compiled", "python")


@pytest.mark.parametrize("seed", range(5))
def test_fps_backends_agree(seed):
    core = _compiled()
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1, 1, (200, 3))
    a = pure.fps_indices(pts, 40, 3)
    b = core.fps_indices(pts, 40, 3)
    np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("radius", [0.3, 2.0, -1.0])
def test_knn_backends_agree(radius):
    core = _compiled()
    rng = np.random.default_rng(11)
    ref = rng.uniform(-1, 1, (150, 3))
    query = rng.uniform(-1, 1, (60, 3))
    r2 = radius * radius if radius > 0 else -1.0
    a = pure.knn_in_radius(query, ref, 8, r2)
    b = core.knn_in_radius(query, ref, 8, r2)
    np.testing.assert_array_equal(a, b)


def test_nn_backends_agree():
    core = _compiled()
    rng = np.random.default_rng(5)
    a = rng.uniform(-1, 1, (300, 3))
    b = rng.uniform(-1, 1, (120, 3))
    np.testing.assert_array_equal(pure.nn_indices(a, b), core.nn_indices(a, b))


def test_segment_nn_backends_agree():
    core = _compiled()
    rng = np.random.default_rng(6)
    rec = rng.uniform(-1, 1, (50, 3))
    tgt = rng.uniform(-1, 1, (70, 3))
    ptr = np.array([0, 10, 25, 30, 50], dtype=np.int64)
    np.testing.assert_array_equal(
        pure.segment_nn_indices(tgt, rec, ptr), core.segment_nn_indices(tgt, rec, ptr)
    )


def test_nn_tie_breaks_to_lowest_index():
    ref = np.array([[1.0, 0, 0], [-1.0, 0, 0], [1.0, 0, 0]])
    idx = kernels.nn_indices(np.array([[0.0, 0, 0]]), ref)
    assert idx[0] == 0  # both distance-1 candidates; lowest index wins over index 2


def test_knn_pads_with_nearest_when_radius_starves():
    pts = np.array([[0.0, 0, 0], [0.05, 0, 0], [3.0, 0, 0]])
    out = kernels.ball_query(pts, np.array([[0.0, 0, 0]]), radius=0.1, k=4)
    assert out.tolist() == [[0, 1, 0, 0]]  # two in radius, padded with the nearest


def test_knn_center_with_no_inradius_point_falls_back_to_nearest():
    pts = np.array([[5.0, 0, 0], [6.0, 0, 0]])
    out = kernels.ball_query(pts, np.array([[0.0, 0, 0]]), radius=0.1, k=3)
    assert out.tolist() == [[0, 0, 0]]


def test_fps_validates_inputs():
    pts = np.zeros((4, 3))
    with pytest.raises(ValueError):
        kernels.fps_indices(pts, 5, 0)
    with pytest.raises(ValueError):
        kernels.fps_indices(pts, 2, 9)


def test_segment_ptr_validated():
    rec = np.zeros((4, 3))
    with pytest.raises(ValueError):
        kernels.segment_nn_indices(np.zeros((2, 3)), rec, np.array([0, 2]))
