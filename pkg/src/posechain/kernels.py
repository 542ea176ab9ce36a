"""Backend selection for the hot loops.

The compiled extension ``posechain._kernels`` is used when it imports;
otherwise, or when ``POSECHAIN_BACKEND=python`` is set, the numpy versions in
``posechain._kernels_py`` are used. Both expose the same functions.
"""

import importlib
import os

import numpy as np

from .errors import NonPositiveDepth

_REQUESTED = os.environ.get("POSECHAIN_BACKEND", "auto").lower()


def load_backend(name):
    """Return the kernel module for ``"compiled"`` or ``"python"``."""
    if name == "compiled":
        return importlib.import_module("posechain._kernels")
    if name == "python":
        return importlib.import_module("posechain._kernels_py")
    raise ValueError(f"unknown backend {name!r}")


def available_backends():
    names = ["python"]
    try:
        load_backend("compiled")
    except ImportError:
        pass
    else:
        names.insert(0, "compiled")
    return names


if _REQUESTED == "python":
    _impl = load_backend("python")
    BACKEND = "python"
else:
    try:
        _impl = load_backend("compiled")
        BACKEND = "compiled"
    except ImportError:
        if _REQUESTED == "compiled":
            raise
        _impl = load_backend("python")
        BACKEND = "python"


def _resolve(impl):
    if impl is None:
        return _impl
    return load_backend(impl) if isinstance(impl, str) else impl


def project_points(points, intr, jacobian=False, *, impl=None):
    """Batched projection; returns ``(uv, J)`` with ``J=None`` unless requested.

    ``impl`` picks a backend by name (``"compiled"``/``"python"``) or module.

    Raises:
        NonPositiveDepth: if any point has ``z <= 1e-12``.
    """
    impl = _resolve(impl)
    pts = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
    vec = np.ascontiguousarray(intr, dtype=np.float64).reshape(9)
    uv, J, bad = impl.project_points(pts, vec, bool(jacobian))
    if bad >= 0:
        raise NonPositiveDepth(f"point {bad} has depth {pts[bad, 2]!r} <= 1e-12")
    return uv, J


def dh_chain(dh, q, *, impl=None):
    impl = _resolve(impl)
    dh = np.ascontiguousarray(dh, dtype=np.float64).reshape(-1, 4)
    q = np.ascontiguousarray(q, dtype=np.float64).reshape(-1, dh.shape[0])
    return impl.dh_chain(dh, q)
