"""Numpy implementations of the compiled kernels in ``_kernels.pyx``.

Used when the extension is not built or ``POSECHAIN_BACKEND=python``.
"""

import numpy as np

DEPTH_EPS = 1e-12


def project_points(pts, intr, jacobian=False):
    pts = np.asarray(pts, dtype=np.float64)
    n = pts.shape[0]
    fx, fy, cx, cy, k1, k2, k3, p1, p2 = (float(v) for v in intr)
    X, Y, Z = pts[:, 0], pts[:, 1], pts[:, 2]
    bad = np.flatnonzero(~(Z > DEPTH_EPS))
    if bad.size:
        return np.empty((n, 2)), None, int(bad[0])

    iz = 1.0 / Z
    x = X * iz
    y = Y * iz
    xx, yy, xy = x * x, y * y, x * y
    r2 = xx + yy
    r4 = r2 * r2
    r6 = r4 * r2
    radial = 1.0 + k1 * r2 + k2 * r4 + k3 * r6
    xd = x * radial + 2.0 * p1 * xy + p2 * (r2 + 2.0 * xx)
    yd = y * radial + p1 * (r2 + 2.0 * yy) + 2.0 * p2 * xy
    uv = np.stack([fx * xd + cx, fy * yd + cy], axis=1)
    if not jacobian:
        return uv, None, -1

    dr = k1 + 2.0 * k2 * r2 + 3.0 * k3 * r4
    du_dx = fx * (radial + 2.0 * xx * dr + 2.0 * p1 * y + 6.0 * p2 * x)
    du_dy = fx * (2.0 * xy * dr + 2.0 * p1 * x + 2.0 * p2 * y)
    dv_dx = fy * (2.0 * xy * dr + 2.0 * p1 * x + 2.0 * p2 * y)
    dv_dy = fy * (radial + 2.0 * yy * dr + 6.0 * p1 * y + 2.0 * p2 * x)

    J = np.zeros((n, 2, 12))
    J[:, 0, 0] = du_dx * iz
    J[:, 0, 1] = du_dy * iz
    J[:, 0, 2] = -(du_dx * x + du_dy * y) * iz
    J[:, 1, 0] = dv_dx * iz
    J[:, 1, 1] = dv_dy * iz
    J[:, 1, 2] = -(dv_dx * x + dv_dy * y) * iz
    J[:, 0, 3] = xd
    J[:, 1, 4] = yd
    J[:, 0, 5] = 1.0
    J[:, 1, 6] = 1.0
    J[:, 0, 7] = fx * x * r2
    J[:, 1, 7] = fy * y * r2
    J[:, 0, 8] = fx * x * r4
    J[:, 1, 8] = fy * y * r4
    J[:, 0, 9] = fx * x * r6
    J[:, 1, 9] = fy * y * r6
    J[:, 0, 10] = fx * 2.0 * xy
    J[:, 1, 10] = fy * (r2 + 2.0 * yy)
    J[:, 0, 11] = fx * (r2 + 2.0 * xx)
    J[:, 1, 11] = fy * 2.0 * xy
    return uv, J, -1


def dh_chain(dh, q):
    dh = np.asarray(dh, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    m, n = q.shape
    out = np.broadcast_to(np.eye(4), (m, 4, 4)).copy()
    for j in range(n):
        a, alpha, d, offset = dh[j]
        th = q[:, j] + offset
        ct, st = np.cos(th), np.sin(th)
        ca, sa = np.cos(alpha), np.sin(alpha)
        A = np.zeros((m, 4, 4))
        A[:, 0, 0] = ct
        A[:, 0, 1] = -st * ca
        A[:, 0, 2] = st * sa
        A[:, 0, 3] = a * ct
        A[:, 1, 0] = st
        A[:, 1, 1] = ct * ca
        A[:, 1, 2] = -ct * sa
        A[:, 1, 3] = a * st
        A[:, 2, 1] = sa
        A[:, 2, 2] = ca
        A[:, 2, 3] = d
        A[:, 3, 3] = 1.0
        out = out @ A
    return out
