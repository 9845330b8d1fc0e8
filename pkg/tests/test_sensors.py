import json
import sys
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dispguard.attacks import make_facula
from dispguard.detection import disparity_error, pixel_inconsistent
from dispguard.errors import ContractError
from dispguard.geometry import CameraModel, make_rig
from dispguard.scene import Obstacle, Scene, SceneParams, generate_scene, render_truth_disparity
from dispguard.sensors import (DisparityMap, EstimatorNoiseModel, LidarConfig, PointCloud,
                               estimate_stereo_disparity, fatten_edges, lidar_to_disparity,
                               sample_lidar)

FIXTURES = Path(__file__).parent / "fixtures"


def _truth(values, pair=(0, 1), baseline=0.54):
    values = np.asarray(values, dtype=np.float32)
    return DisparityMap(values, np.ones(values.shape, bool), pair, baseline)


# -- LiDAR --------------------------------------------------------------------

def test_background_returns_at_background_depth():
    lidar = LidarConfig(channels=16, range_jitter=0.02)
    scene = Scene((), ground_plane=1e6, background_depth=40.0)
    cloud = sample_lidar(scene, lidar, seed=1)
    assert len(cloud) == 16 * len(lidar.azimuths())
    dev = np.abs(cloud.xyz[:, 2] - 40.0)
    assert np.mean(dev <= 3 * 0.02) > 0.99
    assert np.all(dev <= 6 * 0.02)


def test_doubling_azimuth_step_halves_points():
    scene = Scene((), ground_plane=1e6)
    one = LidarConfig(channels=1, elevation_range=(0.0, 0.0), azimuth_step=0.2)
    two = LidarConfig(channels=1, elevation_range=(0.0, 0.0), azimuth_step=0.4)
    n1, n2 = len(sample_lidar(scene, one, 0)), len(sample_lidar(scene, two, 0))
    assert abs(n2 - n1 / 2) <= 1


def test_one_return_per_intersecting_beam():
    lidar = LidarConfig(channels=64, azimuth_range=(-50.0, 49.9), azimuth_step=0.1,
                        max_range=1000.0)
    assert len(lidar.azimuths()) == 1000
    scene = generate_scene(SceneParams(), 5)
    assert len(sample_lidar(scene, lidar, 0)) == 64 * 1000


def test_obstacle_returns_in_lidar_frame():
    lidar = LidarConfig(channels=8, elevation_range=(-1, 1), azimuth_range=(-1, 1),
                        range_jitter=0.0)
    scene = Scene((Obstacle((0.0, 0.0, 10.0), 4, 4),), ground_plane=1e6)
    cloud = sample_lidar(scene, lidar, 0, pose=(0.0, 0.0, -2.0))
    assert np.allclose(cloud.xyz[:, 2], 12.0, atol=1e-4)
    assert np.allclose(cloud.points[:, 3], 0.6)


def test_empty_cloud_projects_to_nothing(small_cam):
    dm = lidar_to_disparity(PointCloud(np.zeros((0, 4), np.float32)), small_cam, 0.5)
    assert not dm.valid.any()


def test_single_point_projection_hand_value():
    cam = CameraModel(1, 700.0, 0.0, image_width=64, image_height=48)
    dm = lidar_to_disparity(PointCloud(np.array([[0, 0, 10, 1]], np.float32)), cam, 0.5)
    assert dm.valid.sum() == 1
    assert dm.valid[24, 32]
    assert dm.values[24, 32] == pytest.approx(35.0)


def test_nearest_point_wins(small_cam):
    pts = np.array([[0, 0, 10, 1], [0, 0, 5, 1], [0, 0, 7, 1]], np.float32)
    dm = lidar_to_disparity(PointCloud(pts), small_cam, 0.5)
    assert dm.valid.sum() == 1
    assert dm.values[24, 32] == pytest.approx(700 * 0.5 / 5)


def test_lidar_map_agrees_with_truth():
    rig = make_rig([0.0, 0.54], lidar_pose=(-0.54, -0.08, -0.27))
    scene = generate_scene(SceneParams(), 2)
    cloud = sample_lidar(scene, LidarConfig(range_jitter=0.0), 0, rig.lidar_pose)
    ref = rig.camera(2)
    dm = lidar_to_disparity(cloud, ref, 0.54, lidar_pose=rig.lidar_pose)
    truth = render_truth_disparity(scene, ref, rig.camera(1))
    assert 0.02 < dm.valid_fraction < 0.08
    # the LiDAR sits behind the camera, so a few returns at edges are occluded
    assert disparity_error(dm, truth).value < 0.02


# -- stereo emulator -------------------------------------------------------------

def test_noiseless_estimate_is_exact(rng):
    truth = _truth(rng.uniform(0, 100, (30, 40)))
    noise = EstimatorNoiseModel(gaussian_sigma=0, outlier_fraction=0)
    est = estimate_stereo_disparity(truth, noise, seed=4)
    assert np.array_equal(est.values, truth.values)


def test_estimate_depends_only_on_seed(rng):
    truth = _truth(rng.uniform(0, 100, (30, 40)))
    a = estimate_stereo_disparity(truth, EstimatorNoiseModel(), seed=9)
    b = estimate_stereo_disparity(truth, EstimatorNoiseModel(), seed=9)
    assert np.array_equal(a.values, b.values)


def test_estimate_stays_in_range(rng):
    truth = _truth(rng.uniform(0, 192, (30, 40)))
    est = estimate_stereo_disparity(truth, EstimatorNoiseModel(outlier_fraction=0.5), seed=1)
    assert est.values.min() >= 0 and est.values.max() <= 192


def test_facula_only_hits_its_pair(rng):
    truth = _truth(np.full((20, 30), 40.0), pair=(0, 1))
    facula = make_facula(30, 20, 100.0, center=(15, 10))
    quiet = EstimatorNoiseModel(gaussian_sigma=0, outlier_fraction=0)
    assert np.array_equal(estimate_stereo_disparity(truth, quiet, {2: facula}).values, truth.values)
    assert not np.array_equal(estimate_stereo_disparity(truth, quiet, {1: facula}).values,
                              truth.values)


def _uniform_consistency_oracle(d, d_max=192.0, steps=200_001):
    xs = np.linspace(0.0, d_max, steps)
    return float(np.mean([not pixel_inconsistent(x, d) for x in xs[::50]]))


@pytest.mark.parametrize("d", [5.0, 40.0, 120.0])
def test_full_facula_inconsistency_matches_uniform_oracle(d):
    truth = _truth(np.full((200, 250), d))
    facula = make_facula(250, 200, 1000.0, center=(125, 100))
    assert facula.covered.all()
    quiet = EstimatorNoiseModel(gaussian_sigma=0, outlier_fraction=0)
    est = estimate_stereo_disparity(truth, quiet, {1: facula}, seed=3)
    measured = disparity_error(est, truth).value
    expected = 1.0 - _uniform_consistency_oracle(d)
    # 50k Bernoulli draws: 4 sigma is well under 1 percentage point
    assert measured == pytest.approx(expected, abs=0.01)


def test_nested_faculae_give_nested_corruption():
    truth = _truth(np.full((40, 60), 30.0))
    small = make_facula(60, 40, 8.0, center=(30, 20))
    large = make_facula(60, 40, 16.0, center=(30, 20))
    noise = EstimatorNoiseModel()
    clean = estimate_stereo_disparity(truth, noise, {}, seed=5).values
    a = estimate_stereo_disparity(truth, noise, {1: small}, seed=5).values
    b = estimate_stereo_disparity(truth, noise, {1: large}, seed=5).values
    assert np.array_equal(a[~small.covered], clean[~small.covered])
    assert np.array_equal(b[small.covered], a[small.covered])


def test_partial_truth_rejected():
    truth = DisparityMap.empty(4, 4)
    with pytest.raises(ContractError):
        estimate_stereo_disparity(truth, EstimatorNoiseModel())


def test_noise_baseline_regression():
    sys.path.insert(0, str(Path(__file__).parents[1] / "scripts"))
    from calibrate_noise_baseline import measure
    pinned = json.loads((FIXTURES / "noise_baseline.json").read_text())
    rates = measure(EstimatorNoiseModel(), scenes=8)
    assert np.mean(rates) == pytest.approx(pinned["mean_rate"], abs=5 * pinned["std_rate"] + 1e-4)


def test_noise_baseline_hand_estimate():
    # outliers hit 2% of pixel pairs and ~70% of them exceed 3 px; the
    # Gaussian difference (sigma 0.7*sqrt(2)) adds ~0.25% beyond 3 px
    pinned = json.loads((FIXTURES / "noise_baseline.json").read_text())
    gauss_tail = math.erfc(3 / (0.7 * 2 ** 0.5) / 2 ** 0.5)
    outliers = 2 * 0.01 * 0.7
    assert pinned["mean_rate"] == pytest.approx(gauss_tail + outliers, rel=0.2)


# -- edge fattening -------------------------------------------------------------

@given(st.integers(0, 3), st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**31))
def test_fatten_edges_matches_scipy(k, h, w, seed):
    scipy_ndimage = pytest.importorskip("scipy.ndimage")
    values = np.random.default_rng(seed).uniform(0, 100, (h, w)).astype(np.float32)
    expected = scipy_ndimage.maximum_filter(values, size=2 * k + 1, mode="nearest")
    assert np.array_equal(fatten_edges(values, k), expected)
