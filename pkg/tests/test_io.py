import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from dispguard.errors import ParseError
from dispguard.harness.io import (load_disparity_map, load_point_cloud, save_disparity_map,
                                  save_point_cloud)
from dispguard.scene import SceneParams, generate_scene
from dispguard.sensors import DisparityMap, LidarConfig, PointCloud, sample_lidar

finite32 = st.floats(-1e6, 1e6, width=32, allow_nan=False)


def test_empty_cloud_file(tmp_path):
    path = tmp_path / "empty.bin"
    save_point_cloud(PointCloud(np.zeros((0, 4), np.float32)), path)
    assert path.stat().st_size == 0
    assert len(load_point_cloud(path)) == 0


def test_generated_cloud_roundtrip(tmp_path):
    cloud = sample_lidar(generate_scene(SceneParams(), 3), LidarConfig(), 3)
    save_point_cloud(cloud, tmp_path / "c.bin")
    back = load_point_cloud(tmp_path / "c.bin")
    assert back.points.tobytes() == cloud.points.tobytes()


@given(arrays(np.float32, st.tuples(st.integers(0, 50), st.just(4)), elements=finite32))
def test_cloud_roundtrip_bitwise(tmp_path_factory, pts):
    path = tmp_path_factory.mktemp("pc") / "c.bin"
    save_point_cloud(PointCloud(pts), path)
    assert load_point_cloud(path).points.tobytes() == pts.tobytes()


def test_cloud_file_is_little_endian_records(tmp_path):
    save_point_cloud(PointCloud(np.array([[1, 2, 3, 0.5]], np.float32)), tmp_path / "c.bin")
    assert (tmp_path / "c.bin").read_bytes() == np.array([1, 2, 3, 0.5], "<f4").tobytes()


def test_truncated_cloud(tmp_path):
    (tmp_path / "c.bin").write_bytes(b"\0" * 37)
    with pytest.raises(ParseError) as info:
        load_point_cloud(tmp_path / "c.bin")
    assert info.value.offset == 32


def test_nonfinite_cloud(tmp_path):
    pts = np.zeros((3, 4), np.float32)
    pts[2, 1] = np.inf
    (tmp_path / "c.bin").write_bytes(pts.astype("<f4").tobytes())
    with pytest.raises(ParseError) as info:
        load_point_cloud(tmp_path / "c.bin")
    assert info.value.offset == (2 * 4 + 1) * 4


def _dm(values, valid):
    return DisparityMap(np.asarray(values, np.float32), np.asarray(valid, bool), (0, 2), 0.54)


@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**31))
def test_disparity_roundtrip(tmp_path_factory, h, w, seed):
    rng = np.random.default_rng(seed)
    dm = _dm(rng.uniform(0, 192, (h, w)), rng.random((h, w)) < 0.7)
    path = tmp_path_factory.mktemp("dm") / "d.pfm"
    save_disparity_map(dm, path)
    back = load_disparity_map(path, (0, 2), 0.54)
    assert np.array_equal(back.valid, dm.valid)
    assert back.values[dm.valid].tobytes() == dm.values[dm.valid].tobytes()
    assert back.source_pair == (0, 2) and back.baseline == 0.54


def test_nan_cells_become_invalid(tmp_path):
    values = np.array([[1.0, np.nan], [np.nan, 4.0]], np.float32)
    (tmp_path / "d.pfm").write_bytes(b"Pf\n2 2\n-1.0\n" + np.flipud(values).astype("<f4").tobytes())
    dm = load_disparity_map(tmp_path / "d.pfm")
    assert dm.valid.tolist() == [[True, False], [False, True]]


def test_pfm_rows_stored_bottom_up(tmp_path):
    save_disparity_map(_dm([[1, 2], [3, 4]], np.ones((2, 2))), tmp_path / "d.pfm")
    payload = (tmp_path / "d.pfm").read_bytes()[len(b"Pf\n2 2\n-1.0\n"):]
    assert np.frombuffer(payload, "<f4").tolist() == [3, 4, 1, 2]


def test_big_endian_pfm_accepted(tmp_path):
    (tmp_path / "d.pfm").write_bytes(b"Pf\n2 1\n1.0\n" + np.array([5, 6], ">f4").tobytes())
    assert load_disparity_map(tmp_path / "d.pfm").values.tolist() == [[5, 6]]


@pytest.mark.parametrize("blob, offset", [
    (b"PF\n1 1\n-1.0\n" + b"\0" * 12, 0),
    (b"Pf\n1 x\n-1.0\n" + b"\0" * 4, 3),
    (b"Pf\n2 2\n-1.0\n" + b"\0" * 12, 24),
    (b"Pf\n1 1\n0\n" + b"\0" * 4, 7),
])
def test_malformed_pfm(tmp_path, blob, offset):
    (tmp_path / "d.pfm").write_bytes(blob)
    with pytest.raises(ParseError) as info:
        load_disparity_map(tmp_path / "d.pfm")
    assert info.value.offset == offset


def test_infinite_disparity_rejected(tmp_path):
    head = b"Pf\n2 1\n-1.0\n"
    (tmp_path / "d.pfm").write_bytes(head + np.array([1, np.inf], "<f4").tobytes())
    with pytest.raises(ParseError) as info:
        load_disparity_map(tmp_path / "d.pfm")
    assert info.value.offset == len(head) + 4


def test_payload_starting_with_newline_byte(tmp_path):
    # 0x0a as the first payload byte must not be read as part of the header
    values = np.frombuffer(b"\n\x00\x80\x3f" + np.array([2.0], "<f4").tobytes(), "<f4")
    dm = _dm(np.flipud(values.reshape(1, 2)), np.ones((1, 2)))
    save_disparity_map(dm, tmp_path / "d.pfm")
    assert load_disparity_map(tmp_path / "d.pfm").values.tobytes() == dm.values.tobytes()
