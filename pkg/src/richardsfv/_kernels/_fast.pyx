# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled assembly kernels.

Mirrors _pure.py function by function; expression structure is kept
identical (and fused multiply-add is disabled in setup.py) so both
backends agree to the last few ulps.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport expm1, isfinite, log1p, pow, sqrt

cnp.import_array()

cdef double _SE_SAT = 1.0 - 1e-15


def vgm_curves(psi, double theta_r, double theta_s, double alpha, double n):
    """Van Genuchten curves; see _pure.vgm_curves."""
    cdef cnp.ndarray[double, ndim=1] psi_a = \
        np.ascontiguousarray(psi, dtype=np.float64)
    cdef Py_ssize_t nn = psi_a.shape[0], i
    cdef cnp.ndarray[double, ndim=1] theta = np.empty(nn)
    cdef cnp.ndarray[double, ndim=1] dtheta = np.empty(nn)
    cdef cnp.ndarray[double, ndim=1] kr = np.empty(nn)
    cdef cnp.ndarray[double, ndim=1] dkr = np.empty(nn)
    cdef double m = 1.0 - 1.0 / n
    cdef double dtw = theta_s - theta_r
    cdef double p, u, se, sqrt_se, t, la, g, dse, dkr_dse

    for i in range(nn):
        if psi_a[i] >= 0.0:
            theta[i] = theta_s
            dtheta[i] = 0.0
            kr[i] = 1.0
            dkr[i] = 0.0
            continue
        p = -psi_a[i]
        u = pow(alpha * p, n)
        se = pow(1.0 + u, -m)
        if se >= _SE_SAT:
            theta[i] = theta_s
            dtheta[i] = 0.0
            kr[i] = 1.0
            dkr[i] = 0.0
            continue
        if se <= 0.0:
            theta[i] = theta_r
            dtheta[i] = 0.0
            kr[i] = 0.0
            dkr[i] = 0.0
            continue
        sqrt_se = sqrt(se)
        t = pow(se, 1.0 / m)
        # g = 1 - (1 - t)^m via expm1/log1p, matching the numpy backend;
        # derivative factors use the same pow-free identities
        la = log1p(-t)
        g = -expm1(m * la)
        dse = m * n * alpha * (u / (alpha * p)) * (se / (1.0 + u))
        if not isfinite(dse):
            dse = 0.0
        dkr_dse = 0.5 / sqrt_se * g * g \
            + 2.0 * sqrt_se * g * ((1.0 - g) / (1.0 - t)) * (t / se)
        theta[i] = theta_r + dtw * se
        dtheta[i] = dtw * dse
        kr[i] = sqrt_se * g * g
        dkr[i] = dkr_dse * dse
    return theta, dtheta, kr, dkr


def unconf_curves(h, z_min, z_max, double phi, double alpha_phi,
                  double alpha_theta, double floor_frac):
    """Unconfined piecewise-linear curves; see _pure.unconf_curves."""
    cdef cnp.ndarray[double, ndim=1] h_a = \
        np.ascontiguousarray(h, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] zmin_a = \
        np.ascontiguousarray(z_min, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] zmax_a = \
        np.ascontiguousarray(z_max, dtype=np.float64)
    cdef Py_ssize_t nn = h_a.shape[0], i
    cdef cnp.ndarray[double, ndim=1] theta = np.empty(nn)
    cdef cnp.ndarray[double, ndim=1] dtheta = np.empty(nn)
    cdef cnp.ndarray[double, ndim=1] kr = np.empty(nn)
    cdef cnp.ndarray[double, ndim=1] dkr = np.empty(nn)
    cdef double dz, h_r, th, d
    cdef double floor = phi * alpha_phi * floor_frac
    cdef int n_clamped = 0

    for i in range(nn):
        dz = zmax_a[i] - zmin_a[i]
        h_r = zmin_a[i] + alpha_phi * dz
        if h_a[i] >= zmax_a[i]:
            th = phi
            d = 0.0
        elif h_a[i] >= h_r:
            th = phi * (h_a[i] - zmin_a[i]) / dz
            d = phi / dz
        else:
            th = phi * (alpha_phi - alpha_theta * (h_r - h_a[i]))
            d = phi * alpha_theta
        if th < floor:
            th = floor
            d = 0.0
            n_clamped += 1
        theta[i] = th
        dtheta[i] = d
        kr[i] = th / phi
        dkr[i] = d / phi
    return theta, dtheta, kr, dkr, n_clamped


def continuation_apply(kf, double q, int kind_code, bint need_deriv):
    """Continuation wrapper; see _pure.continuation_apply."""
    cdef cnp.ndarray[double, ndim=1] kf_a = \
        np.ascontiguousarray(kf, dtype=np.float64)
    cdef Py_ssize_t nn = kf_a.shape[0], i
    cdef cnp.ndarray[double, ndim=1] K = np.empty(nn)
    cdef cnp.ndarray[double, ndim=1] dK = np.zeros(nn)
    if q == 0.0:
        K[:] = 1.0
        return K, dK
    if kind_code == 0:
        for i in range(nn):
            K[i] = 1.0 + q * (kf_a[i] - 1.0)
            if need_deriv:
                dK[i] = q
        return K, dK
    for i in range(nn):
        if kf_a[i] <= 0.0:
            K[i] = 0.0
        else:
            K[i] = pow(kf_a[i], q)
            if need_deriv:
                dK[i] = q * pow(kf_a[i], q - 1.0)
    return K, dK


def face_system(h, kr, dkr, kr_dir, cell_l, cell_r, ptr, col, w, g,
                double q, int kind_code, int mode_code, bint need_deriv):
    """Fused per-face pass; see _pure.face_system for the contract."""
    cdef cnp.ndarray[double, ndim=1] h_a = \
        np.ascontiguousarray(h, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] kr_a = \
        np.ascontiguousarray(kr, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] dkr_a = \
        np.ascontiguousarray(dkr, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] krd_a = \
        np.ascontiguousarray(kr_dir, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cl_a = \
        np.ascontiguousarray(cell_l, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cr_a = \
        np.ascontiguousarray(cell_r, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ptr_a = \
        np.ascontiguousarray(ptr, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] col_a = \
        np.ascontiguousarray(col, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=1] w_a = \
        np.ascontiguousarray(w, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] g_a = \
        np.ascontiguousarray(g, dtype=np.float64)

    cdef Py_ssize_t m = cl_a.shape[0], f, j
    cdef cnp.ndarray[double, ndim=1] flux0 = np.empty(m)
    cdef cnp.ndarray[double, ndim=1] K = np.empty(m)
    cdef cnp.ndarray[double, ndim=1] dk_l = np.zeros(m)
    cdef cnp.ndarray[double, ndim=1] dk_r = np.zeros(m)
    cdef double s, kf, wl, wr, Kf, dKdkf, hl, hr
    cdef cnp.int64_t cr

    for f in range(m):
        s = 0.0
        for j in range(ptr_a[f], ptr_a[f + 1]):
            s += w_a[j] * h_a[col_a[j]]
        flux0[f] = s + g_a[f]

        cr = cr_a[f]
        if cr < 0:
            kf = krd_a[f]
            wl = 0.0
            wr = 0.0
        elif mode_code == 0:
            kf = 0.5 * (kr_a[cl_a[f]] + kr_a[cr])
            wl = 0.5
            wr = 0.5
        else:
            hl = h_a[cl_a[f]]
            hr = h_a[cr]
            if hl > hr:
                wl = 1.0
            elif hl < hr:
                wl = 0.0
            else:
                wl = 0.5
            wr = 1.0 - wl
            kf = wl * kr_a[cl_a[f]] + wr * kr_a[cr]

        if q == 0.0:
            Kf = 1.0
            dKdkf = 0.0
        elif kind_code == 0:
            Kf = 1.0 + q * (kf - 1.0)
            dKdkf = q
        elif kf <= 0.0:
            Kf = 0.0
            dKdkf = 0.0
        else:
            Kf = pow(kf, q)
            dKdkf = q * pow(kf, q - 1.0)
        K[f] = Kf
        if need_deriv and cr >= 0:
            dk_l[f] = dKdkf * wl * dkr_a[cl_a[f]]
            dk_r[f] = dKdkf * wr * dkr_a[cr]
    return flux0, K, dk_l, dk_r


def scatter_faces(values, cell_l, cell_r, int n_cells):
    """Signed per-cell accumulation; see _pure.scatter_faces.

    Accumulates the plus and minus contributions in separate buffers and
    subtracts once, matching the bincount-difference rounding of the
    numpy backend.
    """
    cdef cnp.ndarray[double, ndim=1] v_a = \
        np.ascontiguousarray(values, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cl_a = \
        np.ascontiguousarray(cell_l, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cr_a = \
        np.ascontiguousarray(cell_r, dtype=np.int64)
    cdef Py_ssize_t m = v_a.shape[0], f
    cdef cnp.ndarray[double, ndim=1] out = np.zeros(n_cells)
    cdef cnp.ndarray[double, ndim=1] neg = np.zeros(n_cells)
    cdef bint any_neg = False
    cdef Py_ssize_t i

    for f in range(m):
        out[cl_a[f]] += v_a[f]
        if cr_a[f] >= 0:
            neg[cr_a[f]] += v_a[f]
            any_neg = True
    if any_neg:
        for i in range(n_cells):
            out[i] -= neg[i]
    return out
