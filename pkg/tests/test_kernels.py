"""Both kernel backends against each other and against the camera/DH oracles."""

import numpy as np
import pytest

from posechain import kernels
from posechain.errors import NonPositiveDepth
from posechain.synth import DEFAULT_INTRINSICS, load_chain


def _points(rng, n=500):
    xy = rng.uniform(-0.6, 0.6, (n, 2))
    z = rng.uniform(0.1, 3.0, n)
    return np.c_[xy * z[:, None], z]


def test_backend_is_known():
    assert kernels.BACKEND in ("compiled", "python")
    assert "python" in kernels.available_backends()


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        kernels.load_backend("fortran")


def test_projection_backends_agree(rng):
    pts = _points(rng)
    intr = DEFAULT_INTRINSICS.as_vector()
    results = [kernels.project_points(pts, intr, True, impl=b) for b in kernels.available_backends()]
    for uv, J in results[1:]:
        np.testing.assert_allclose(uv, results[0][0], rtol=0, atol=1e-9)
        np.testing.assert_allclose(J, results[0][1], rtol=1e-12, atol=1e-9)


def test_dh_backends_agree(rng):
    chain = load_chain()
    q = rng.uniform(-np.pi, np.pi, (300, 6))
    ref = kernels.dh_chain(chain.params, q, impl="python")
    for b in kernels.available_backends():
        np.testing.assert_allclose(kernels.dh_chain(chain.params, q, impl=b), ref, atol=1e-14)


def test_projection_matches_opencv(rng, backend):
    cv2 = pytest.importorskip("cv2")
    pts = _points(rng, 200)
    i = DEFAULT_INTRINSICS
    K = np.array([[i.fx, 0, i.cx], [0, i.fy, i.cy], [0, 0, 1]])
    dist = np.array([i.k1, i.k2, i.p1, i.p2, i.k3])
    ref, _ = cv2.projectPoints(pts.reshape(-1, 1, 3), np.zeros(3), np.zeros(3), K, dist)
    uv, _ = kernels.project_points(pts, i.as_vector(), impl=backend)
    np.testing.assert_allclose(uv, ref.reshape(-1, 2), atol=1e-7)


def test_depth_check(backend):
    pts = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
    with pytest.raises(NonPositiveDepth, match="point 1"):
        kernels.project_points(pts, DEFAULT_INTRINSICS.as_vector(), impl=backend)


def test_jacobian_without_request_is_none(backend):
    _, J = kernels.project_points(np.array([[0.0, 0.0, 1.0]]), DEFAULT_INTRINSICS.as_vector(), impl=backend)
    assert J is None


def test_empty_inputs(backend):
    uv, J = kernels.project_points(np.zeros((0, 3)), DEFAULT_INTRINSICS.as_vector(), True, impl=backend)
    assert uv.shape == (0, 2) and J.shape == (0, 2, 12)
    assert kernels.dh_chain(load_chain().params, np.zeros((0, 6)), impl=backend).shape == (0, 4, 4)
