import json
import math
import os

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp
from PIL import Image

from posechain import fileio
from posechain.camera import CameraIntrinsics
from posechain.errors import MissingImage, ParseError
from posechain.kinematics import JointState
from posechain.observations import CalibrationShot
from posechain.se3 import RigidTransform
from posechain.trajectory import Trajectory

from conftest import random_pose


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# joint logs


def test_joint_log_round_trip_is_exact(tmp_path, rng):
    log = [JointState(f"f{k:03d}", rng.uniform(-math.pi, math.pi, 6)) for k in range(10)]
    p = fileio.write_joint_log(tmp_path / "j.csv", log)
    back = fileio.read_joint_log(p)
    assert [js.frame_id for js in back] == [js.frame_id for js in log]
    for a, b in zip(log, back):
        np.testing.assert_array_equal(a.q, b.q)


def test_joint_log_non_numeric_names_line(tmp_path):
    p = _write(tmp_path / "j.csv", "frame_id,q1,q2\na,0.1,0.2\nb,0.1,oops\n")
    with pytest.raises(ParseError, match=r"line 3.*'q2'"):
        fileio.read_joint_log(p)


def test_joint_log_wrong_field_count_names_line(tmp_path):
    p = _write(tmp_path / "j.csv", "frame_id,q1,q2\na,0.1,0.2\n\nb,0.1\n")
    with pytest.raises(ParseError, match="line 4: expected 3 fields"):
        fileio.read_joint_log(p)


def test_joint_log_in_degrees_is_rejected(tmp_path):
    p = _write(tmp_path / "j.csv", "frame_id,q1,q2\na,0.1,0.2\nb,90.0,45.0\n")
    with pytest.raises(ParseError, match="line 3.*radians"):
        fileio.read_joint_log(p)


def test_joint_log_duplicate_frame(tmp_path):
    p = _write(tmp_path / "j.csv", "frame_id,q1\na,0.1\na,0.2\n")
    with pytest.raises(ParseError, match="duplicate"):
        fileio.read_joint_log(p)


def test_joint_log_bad_header(tmp_path):
    with pytest.raises(ParseError, match="line 1"):
        fileio.read_joint_log(_write(tmp_path / "j.csv", "frame,q1\na,0.1\n"))
    with pytest.raises(ParseError, match="q1..qn"):
        fileio.read_joint_log(_write(tmp_path / "k.csv", "frame_id,a1\na,0.1\n"))
    with pytest.raises(ParseError, match="empty file"):
        fileio.read_joint_log(_write(tmp_path / "l.csv", ""))


def test_header_only_joint_log_is_empty(tmp_path):
    assert fileio.read_joint_log(_write(tmp_path / "j.csv", "frame_id,q1,q2,q3,q4,q5,q6\n")) == []


def test_non_finite_joint_rejected(tmp_path):
    with pytest.raises(ParseError, match="not finite"):
        fileio.read_joint_log(_write(tmp_path / "j.csv", "frame_id,q1\na,nan\n"))


# ---------------------------------------------------------------------------
# observations, trajectories, small JSON documents


def test_observations_round_trip(tmp_path, rng):
    shots = [
        CalibrationShot.from_pairs(f"s{k}", None, [(f"p{i}", tuple(rng.uniform(0, 640, 2))) for i in range(5)])
        for k in range(3)
    ]
    back = fileio.read_observations(fileio.write_observations(tmp_path / "o.csv", shots))
    assert [s.frame_id for s in back] == ["s0", "s1", "s2"]
    for a, b in zip(shots, back):
        assert list(a.point_ids) == list(b.point_ids)
        np.testing.assert_array_equal(a.pixels, b.pixels)


def test_observations_keep_first_appearance_order(tmp_path):
    rows = [f"{fid},{k},{k}.5,{2 * k}" for k in range(4) for fid in ("z", "a")]
    shots = fileio.read_observations(_write(tmp_path / "o.csv", "frame_id,point_id,u,v\n" + "\n".join(rows) + "\n"))
    assert [s.frame_id for s in shots] == ["z", "a"]
    np.testing.assert_array_equal(shots[0].pixels, [[0.5, 0], [1.5, 2], [2.5, 4], [3.5, 6]])


def test_shot_with_too_few_points_names_its_first_line(tmp_path):
    p = _write(tmp_path / "o.csv", "frame_id,point_id,u,v\nz,1,1,2\nz,2,5,6\n")
    with pytest.raises(ParseError, match="line 2"):
        fileio.read_observations(p)


def test_observations_bad_row(tmp_path):
    p = _write(tmp_path / "o.csv", "frame_id,point_id,u,v\nz,1,1,2\nz,2,1\n")
    with pytest.raises(ParseError, match="line 3"):
        fileio.read_observations(p)


def test_trajectory_round_trip_preserves_order(tmp_path, rng):
    traj = Trajectory((f"{k:02d}", random_pose(rng)) for k in (5, 1, 3))
    back = fileio.read_trajectory(fileio.write_trajectory(tmp_path / "t.json", traj))
    assert back.frame_ids == traj.frame_ids
    for (_, a), (_, b) in zip(traj, back):
        np.testing.assert_allclose(a.as_matrix(), b.as_matrix(), atol=1e-15)


def test_invalid_json_names_line(tmp_path):
    p = _write(tmp_path / "t.json", '[\n  {"frame_id": "a",\n  oops\n]\n')
    with pytest.raises(ParseError, match="line 3"):
        fileio.read_json(p)


def test_dumps_json_rejects_nan():
    with pytest.raises(ValueError):
        fileio.dumps_json({"x": float("nan")})


def test_intrinsics_round_trip(tmp_path):
    intr = CameraIntrinsics(800.0, 810.0, 320.5, 240.25, k1=-0.1, k2=0.01, p1=1e-4, width=640, height=480)
    back = fileio.read_intrinsics(fileio.write_intrinsics(tmp_path / "i.json", intr))
    assert back.to_dict() == intr.to_dict()


# ---------------------------------------------------------------------------
# atomic writes


def test_write_replaces_without_leaving_temporaries(tmp_path):
    p = tmp_path / "sub" / "a.txt"
    fileio.write_text(p, "one")
    fileio.write_text(p, "two")
    assert p.read_text() == "two"
    assert os.listdir(p.parent) == ["a.txt"]


def test_failed_write_keeps_old_file(tmp_path):
    p = tmp_path / "a.json"
    fileio.write_json(p, {"v": 1})
    with pytest.raises(TypeError):
        fileio.write_json(p, {"v": object()})
    assert json.loads(p.read_text()) == {"v": 1}
    assert os.listdir(tmp_path) == ["a.json"]


# ---------------------------------------------------------------------------
# images


def test_png_reads_as_unit_float(tmp_path):
    arr = np.array([[0, 51, 255], [128, 1, 254]], dtype=np.uint8)
    Image.fromarray(arr).save(tmp_path / "g.png")
    np.testing.assert_array_equal(fileio.read_image(tmp_path / "g.png"), arr / 255.0)


def test_png_alpha_is_dropped(tmp_path):
    rgba = np.zeros((3, 4, 4), dtype=np.uint8)
    rgba[..., 0] = 200
    rgba[..., 3] = 10
    Image.fromarray(rgba, "RGBA").save(tmp_path / "a.png")
    img = fileio.read_image(tmp_path / "a.png")
    assert img.shape == (3, 4, 3)
    np.testing.assert_array_equal(img[..., 0], 200 / 255.0)


def test_png_write_read_round_trip(tmp_path, rng):
    img = rng.integers(0, 256, (7, 9, 3)) / 255.0
    np.testing.assert_array_equal(fileio.read_image(fileio.write_png(tmp_path / "x.png", img)), img)


def test_missing_image(tmp_path):
    with pytest.raises(MissingImage):
        fileio.read_image(tmp_path / "none.png")


def test_list_images_keys_by_stem(tmp_path):
    for n in ("b.png", "a.jpg", "notes.txt"):
        (tmp_path / n).write_bytes(b"")
    assert list(fileio.list_images(tmp_path)) == ["a", "b"]


@given(hnp.arrays(np.float32, st.tuples(st.integers(1, 6), st.integers(1, 6), st.sampled_from([1, 3])),
                  elements=st.floats(-1e6, 1e6, width=32)))
def test_pfm_round_trip(tmp_path_factory, a):
    p = tmp_path_factory.mktemp("pfm") / "m.pfm"
    back = fileio.read_pfm(fileio.write_pfm(p, a))
    np.testing.assert_array_equal(back, a[..., 0] if a.shape[2] == 1 else a)


def test_pfm_layout_is_bottom_row_first(tmp_path):
    a = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]], dtype=np.float32)
    raw = fileio.write_pfm(tmp_path / "m.pfm", a).read_bytes()
    header = b"Pf\n2 3\n-1.0\n"
    assert raw.startswith(header)
    body = np.frombuffer(raw[len(header):], dtype="<f4")
    np.testing.assert_array_equal(body, [5, 6, 3, 4, 1, 2])


def test_pfm_big_endian_is_read(tmp_path):
    a = np.array([[1.5, -2.0]], dtype=np.float32)
    (tmp_path / "b.pfm").write_bytes(b"Pf\n2 1\n1.0\n" + a.astype(">f4").tobytes())
    np.testing.assert_array_equal(fileio.read_pfm(tmp_path / "b.pfm"), a)


def test_pfm_bad_magic(tmp_path):
    (tmp_path / "x.pfm").write_bytes(b"P6\n1 1\n255\n\0\0\0")
    with pytest.raises(ParseError, match="not a PFM"):
        fileio.read_pfm(tmp_path / "x.pfm")


# ---------------------------------------------------------------------------
# manifest


def test_opengl_axes_hand_value():
    # camera at (0, 0, 1) in the world looking down -z: c_from_w flips y and z
    pose = RigidTransform.from_matrix(np.array([[1, 0, 0, 0], [0, -1, 0, 0], [0, 0, -1, 1], [0, 0, 0, 1.0]]))
    m = fileio.camera_to_world_gl(pose)
    np.testing.assert_allclose(m, [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 1], [0, 0, 0, 1]], atol=1e-15)


def test_gl_conversion_inverts(rng):
    for _ in range(20):
        pose = random_pose(rng)
        back = fileio.camera_pose_from_gl(fileio.camera_to_world_gl(pose))
        np.testing.assert_allclose(back.as_matrix(), pose.as_matrix(), atol=1e-14)


def test_manifest_round_trip_bit_identical(tmp_path, rng):
    cams = Trajectory((f"{k:04d}", random_pose(rng)) for k in range(6))
    intr = CameraIntrinsics(700.0, 700.0, 320.0, 240.0, k1=0.01, width=640, height=480)
    doc = fileio.build_manifest(cams, intr, {fid: f"images/{fid}.png" for fid in cams.frame_ids})
    assert doc["camera_model"] == "OPENCV"
    assert list(doc)[-1] == "frames"
    p = fileio.write_manifest(tmp_path / "transforms.json", doc)
    intr2, frames = fileio.read_manifest(p)
    assert intr2.to_dict() == intr.to_dict()
    for f, (path, m) in zip(doc["frames"], frames):
        assert f["file_path"] == path
        np.testing.assert_array_equal(np.array(f["transform_matrix"]), m)
    rebuilt = {**{k: v for k, v in doc.items() if k != "frames"},
               "frames": [{"file_path": fp, "transform_matrix": m.tolist()} for fp, m in frames]}
    q = fileio.write_manifest(tmp_path / "again.json", rebuilt)
    assert p.read_bytes() == q.read_bytes()
    assert fileio.manifest_camera_poses(frames).frame_ids == cams.frame_ids


def test_manifest_missing_image():
    cams = Trajectory([("a", RigidTransform.identity())])
    with pytest.raises(MissingImage, match="'a'"):
        fileio.build_manifest(cams, CameraIntrinsics(1.0, 1.0, 0.0, 0.0, width=2, height=2), {})


def test_manifest_bad_matrix(tmp_path):
    doc = {"fl_x": 1.0, "fl_y": 1.0, "cx": 0.0, "cy": 0.0, "w": 2, "h": 2, "frames": [{"file_path": "a.png", "transform_matrix": [[1, 0], [0, 1]]}]}
    fileio.write_json(tmp_path / "m.json", doc)
    with pytest.raises(ParseError, match="4x4"):
        fileio.read_manifest(tmp_path / "m.json")
