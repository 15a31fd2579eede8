"""Encoder contracts: score normalization, keypoint extraction, invariances."""

import numpy as np
import pytest
import torch
from scipy.spatial import ConvexHull

from helpers import fd_gradient, rand_cloud, relative_error
from mutualkp.cloud import PointCloud
from mutualkp.encoder import (GlobalFeature, KeypointEncoder, ScoreMatrix, encode,
                              keypoints_from_scores, pointwise_saliency,
                              predict_keypoints)

SMALL = dict(sa1_points=32, sa1_neighbors=16, sa2_points=16, sa2_neighbors=8,
             sa1_radius=0.25, sa2_radius=0.5)


def _encoder(k=4, **kw):
    torch.manual_seed(0)
    return KeypointEncoder(k, **{**SMALL, **kw})


def test_k10_shapes_and_activation_count():
    enc = _encoder(k=10)
    cloud = rand_cloud(np.random.default_rng(0), 300)
    scores, gf = encode(cloud, enc)
    assert scores.weights.shape == (10, 300)
    assert gf.activations.shape == (45,)
    assert gf.k == 10 and gf.num_segments == 45


def test_encode_deterministic():
    enc = _encoder()
    cloud = rand_cloud(np.random.default_rng(1), 120)
    s1, g1 = encode(cloud, enc)
    s2, g2 = encode(cloud, enc)
    assert torch.equal(s1.weights, s2.weights)
    assert torch.equal(g1.activations, g2.activations)
    assert torch.equal(g1.offset_feature, g2.offset_feature)


def test_permutation_invariance_of_keypoints():
    enc = _encoder()
    cloud = rand_cloud(np.random.default_rng(2), 100)
    rng = np.random.default_rng(3)
    perm = rng.permutation(100)
    shuffled = PointCloud(cloud.points[perm], category=cloud.category, id=cloud.id)

    kp_a = predict_keypoints(encode(cloud, enc)[0], cloud)
    kp_b = predict_keypoints(encode(shuffled, enc)[0], shuffled)
    np.testing.assert_allclose(kp_a.keypoints, kp_b.keypoints, atol=1e-5)


def test_score_columns_permute_with_points():
    enc = _encoder()
    cloud = rand_cloud(np.random.default_rng(4), 64)
    perm = np.random.default_rng(5).permutation(64)
    shuffled = PointCloud(cloud.points[perm], category=cloud.category, id=cloud.id)
    s_orig = encode(cloud, enc)[0].weights.detach().numpy()
    s_perm = encode(shuffled, enc)[0].weights.detach().numpy()
    np.testing.assert_array_equal(s_perm, s_orig[:, perm])


def test_score_rows_are_distributions():
    enc = _encoder(k=5)
    cloud = rand_cloud(np.random.default_rng(6), 90)
    scores, _ = encode(cloud, enc)
    w = scores.weights.detach().numpy()
    np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-9)
    assert w.min() >= 0


def test_encode_requires_enough_points():
    enc = _encoder(k=4)
    cloud = rand_cloud(np.random.default_rng(7), 3)
    with pytest.raises(ValueError):
        encode(cloud, enc)


def test_uniform_row_gives_centroid():
    cloud = rand_cloud(np.random.default_rng(8), 10)
    w = torch.full((2, 10), 0.1, dtype=torch.float64)
    kp = predict_keypoints(ScoreMatrix(w), cloud)
    np.testing.assert_allclose(kp.keypoints[0], cloud.points.mean(axis=0), atol=1e-12)


def test_one_hot_row_gives_point():
    cloud = rand_cloud(np.random.default_rng(9), 7)
    w = torch.zeros((2, 7), dtype=torch.float64)
    w[0, 3] = 1.0
    w[1, 5] = 1.0
    kp = predict_keypoints(ScoreMatrix(w), cloud)
    np.testing.assert_array_equal(kp.keypoints[0], cloud.points[3])
    np.testing.assert_array_equal(kp.keypoints[1], cloud.points[5])


def test_keypoints_match_matrix_product_oracle():
    rng = np.random.default_rng(10)
    w = rng.uniform(0.1, 1.0, (3, 5))
    w /= w.sum(axis=1, keepdims=True)
    pts = rng.uniform(-0.5, 0.5, (5, 3))
    expected = np.array([[sum(w[k, n] * pts[n, d] for n in range(5)) for d in range(3)]
                         for k in range(3)])
    kp = keypoints_from_scores(torch.from_numpy(w), torch.from_numpy(pts))
    np.testing.assert_allclose(kp.numpy(), expected, atol=1e-12)


def test_predict_keypoints_dimension_mismatch():
    cloud = rand_cloud(np.random.default_rng(11), 6)
    w = torch.full((2, 5), 0.2, dtype=torch.float64)
    with pytest.raises(ValueError):
        predict_keypoints(ScoreMatrix(w), cloud)


def test_saliency_uniform_and_one_hot():
    w = torch.full((4, 8), 1.0 / 8, dtype=torch.float64)
    np.testing.assert_allclose(pointwise_saliency(ScoreMatrix(w)), 4.0 / 8)

    w = torch.zeros((3, 6), dtype=torch.float64)
    w[0, 0] = w[1, 2] = w[2, 4] = 1.0
    sal = pointwise_saliency(ScoreMatrix(w))
    np.testing.assert_array_equal(sal, [1, 0, 1, 0, 1, 0])


def test_saliency_sums_to_k():
    enc = _encoder(k=10)
    cloud = rand_cloud(np.random.default_rng(12), 256)
    scores, _ = encode(cloud, enc)
    assert abs(pointwise_saliency(scores).sum() - 10.0) <= 1e-4


def test_keypoints_inside_convex_hull():
    enc = _encoder(k=6)
    cloud = rand_cloud(np.random.default_rng(13), 80)
    kp = predict_keypoints(encode(cloud, enc)[0], cloud)
    hull = ConvexHull(cloud.points)
    # hull equations: normal . x + offset <= 0 inside
    slack = kp.keypoints @ hull.equations[:, :3].T + hull.equations[:, 3][None, :]
    assert slack.max() <= 1e-5


def test_predict_keypoints_gradient_matches_finite_differences():
    rng = np.random.default_rng(14)
    w = torch.tensor(rng.uniform(0.1, 1.0, (3, 5)), requires_grad=True)
    pts = torch.tensor(rng.uniform(-0.5, 0.5, (5, 3)))
    probe = torch.tensor(rng.normal(size=(3, 3)))

    loss = (keypoints_from_scores(w, pts) * probe).sum()
    loss.backward()
    analytic = w.grad.detach().numpy().ravel()
    fd = fd_gradient(lambda x: float((keypoints_from_scores(x, pts) * probe).sum()), w)
    assert relative_error(analytic, fd) <= 1e-3


def test_global_feature_validation():
    with pytest.raises(ValueError):
        GlobalFeature(torch.full((5,), 0.5, dtype=torch.float64),
                      torch.zeros(8, dtype=torch.float64), k=4)  # needs 6 activations
    with pytest.raises(ValueError):
        GlobalFeature(torch.ones(6, dtype=torch.float64),
                      torch.zeros(8, dtype=torch.float64), k=4)  # 1.0 not in open interval
