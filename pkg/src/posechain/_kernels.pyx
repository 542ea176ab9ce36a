# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: batched distorted projection and DH chains.

Signatures and results mirror ``_kernels_py`` exactly; ``kernels`` picks one
of the two at import time.
"""

import numpy as np
from libc.math cimport cos, sin

cdef double DEPTH_EPS = 1e-12


def project_points(const double[:, ::1] pts, const double[::1] intr, bint jacobian=False):
    """Project camera-frame points with Brown-Conrady distortion.

    Returns ``(uv, J, bad)``. ``J`` has shape ``(N, 2, 12)`` with columns
    ``(X, Y, Z, fx, fy, cx, cy, k1, k2, k3, p1, p2)`` or is ``None``. ``bad``
    is the index of the first point with non-positive depth, else -1; outputs
    are only meaningful when ``bad == -1``.
    """
    cdef Py_ssize_t n = pts.shape[0], i
    cdef double fx = intr[0], fy = intr[1], cx = intr[2], cy = intr[3]
    cdef double k1 = intr[4], k2 = intr[5], k3 = intr[6], p1 = intr[7], p2 = intr[8]
    cdef double X, Y, Z, iz, x, y, xx, yy, xy, r2, r4, r6, radial, dr, xd, yd
    cdef double dxd_dx, dxd_dy, dyd_dx, dyd_dy
    cdef double du_dx, du_dy, dv_dx, dv_dy

    uv_arr = np.empty((n, 2), dtype=np.float64)
    cdef double[:, ::1] uv = uv_arr
    cdef double[:, :, ::1] J
    J_arr = None
    if jacobian:
        J_arr = np.zeros((n, 2, 12), dtype=np.float64)
        J = J_arr

    for i in range(n):
        X = pts[i, 0]
        Y = pts[i, 1]
        Z = pts[i, 2]
        if not (Z > DEPTH_EPS):
            return uv_arr, J_arr, i
        iz = 1.0 / Z
        x = X * iz
        y = Y * iz
        xx = x * x
        yy = y * y
        xy = x * y
        r2 = xx + yy
        r4 = r2 * r2
        r6 = r4 * r2
        radial = 1.0 + k1 * r2 + k2 * r4 + k3 * r6
        xd = x * radial + 2.0 * p1 * xy + p2 * (r2 + 2.0 * xx)
        yd = y * radial + p1 * (r2 + 2.0 * yy) + 2.0 * p2 * xy
        uv[i, 0] = fx * xd + cx
        uv[i, 1] = fy * yd + cy
        if not jacobian:
            continue

        dr = k1 + 2.0 * k2 * r2 + 3.0 * k3 * r4
        dxd_dx = radial + 2.0 * xx * dr + 2.0 * p1 * y + 6.0 * p2 * x
        dxd_dy = 2.0 * xy * dr + 2.0 * p1 * x + 2.0 * p2 * y
        dyd_dx = 2.0 * xy * dr + 2.0 * p1 * x + 2.0 * p2 * y
        dyd_dy = radial + 2.0 * yy * dr + 6.0 * p1 * y + 2.0 * p2 * x
        du_dx = fx * dxd_dx
        du_dy = fx * dxd_dy
        dv_dx = fy * dyd_dx
        dv_dy = fy * dyd_dy

        # d(x, y)/d(X, Y, Z) = [[1/Z, 0, -x/Z], [0, 1/Z, -y/Z]]
        J[i, 0, 0] = du_dx * iz
        J[i, 0, 1] = du_dy * iz
        J[i, 0, 2] = -(du_dx * x + du_dy * y) * iz
        J[i, 1, 0] = dv_dx * iz
        J[i, 1, 1] = dv_dy * iz
        J[i, 1, 2] = -(dv_dx * x + dv_dy * y) * iz

        J[i, 0, 3] = xd
        J[i, 1, 4] = yd
        J[i, 0, 5] = 1.0
        J[i, 1, 6] = 1.0
        J[i, 0, 7] = fx * x * r2
        J[i, 1, 7] = fy * y * r2
        J[i, 0, 8] = fx * x * r4
        J[i, 1, 8] = fy * y * r4
        J[i, 0, 9] = fx * x * r6
        J[i, 1, 9] = fy * y * r6
        J[i, 0, 10] = fx * 2.0 * xy
        J[i, 1, 10] = fy * (r2 + 2.0 * yy)
        J[i, 0, 11] = fx * (r2 + 2.0 * xx)
        J[i, 1, 11] = fy * 2.0 * xy

    return uv_arr, J_arr, -1


def dh_chain(const double[:, ::1] dh, const double[:, ::1] q):
    """Base-to-tool 4x4 transforms for ``m`` joint vectors.

    ``dh`` rows are ``(a, alpha, d, theta_offset)`` of the standard (distal)
    convention; ``q`` has shape ``(m, n)``.
    """
    cdef Py_ssize_t n = dh.shape[0], m = q.shape[0], f, j, r
    cdef double a, d, ct, st, ca, sa, th
    cdef double A0, A1, A2
    cdef double T[12]
    cdef double N[12]

    out_arr = np.zeros((m, 4, 4), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr

    for f in range(m):
        # T holds the top 3x4 block, row-major
        for r in range(12):
            T[r] = 0.0
        T[0] = 1.0
        T[5] = 1.0
        T[10] = 1.0
        for j in range(n):
            a = dh[j, 0]
            d = dh[j, 2]
            th = q[f, j] + dh[j, 3]
            ct = cos(th)
            st = sin(th)
            ca = cos(dh[j, 1])
            sa = sin(dh[j, 1])
            # N = T @ [[ct, -st ca, st sa, a ct], [st, ct ca, -ct sa, a st], [0, sa, ca, d]]
            for r in range(3):
                A0 = T[4 * r]
                A1 = T[4 * r + 1]
                A2 = T[4 * r + 2]
                N[4 * r] = A0 * ct + A1 * st
                N[4 * r + 1] = -A0 * st * ca + A1 * ct * ca + A2 * sa
                N[4 * r + 2] = A0 * st * sa - A1 * ct * sa + A2 * ca
                N[4 * r + 3] = A0 * a * ct + A1 * a * st + A2 * d + T[4 * r + 3]
            for r in range(12):
                T[r] = N[r]
        for r in range(3):
            out[f, r, 0] = T[4 * r]
            out[f, r, 1] = T[4 * r + 1]
            out[f, r, 2] = T[4 * r + 2]
            out[f, r, 3] = T[4 * r + 3]
        out[f, 3, 3] = 1.0
    return out_arr
