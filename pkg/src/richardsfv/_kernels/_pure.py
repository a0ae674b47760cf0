"""Pure numpy implementation of the hot assembly kernels.

This module defines the backend contract; the compiled extension in
``_fast.pyx`` implements the same functions with identical semantics.
All functions are free of Python-level state so either backend can be
swapped in at import time.
"""

import numpy as np

# Effective saturations within this distance of 1 are treated as fully
# saturated so the n < 2 derivative singularity cannot inject inf/nan.
_SE_SAT = 1.0 - 1e-15


def vgm_curves(psi, theta_r, theta_s, alpha, n):
    """Van Genuchten water content and Mualem relative permeability.

    Parameters
    ----------
    psi : float array
        Capillary pressure head (m); the saturated branch psi >= 0
        returns theta_s / kr = 1 with zero derivatives.
    theta_r, theta_s, alpha, n : float
        Retention parameters; m = 1 - 1/n.

    Returns
    -------
    theta, dtheta_dpsi, kr, dkr_dpsi : float arrays
    """
    psi = np.asarray(psi, dtype=float)
    m = 1.0 - 1.0 / n
    dtw = theta_s - theta_r

    theta = np.full_like(psi, theta_s)
    dtheta = np.zeros_like(psi)
    kr = np.ones_like(psi)
    dkr = np.zeros_like(psi)

    wet = psi >= 0.0
    p = -psi[~wet]
    with np.errstate(over="ignore"):
        u = np.power(alpha * p, n)
        se = np.power(1.0 + u, -m)
    sat = se >= _SE_SAT
    se_w = np.where(sat, 0.5, se)  # placeholder values, overwritten below
    dry = se_w <= 0.0
    se_w = np.where(dry, 0.5, se_w)

    sqrt_se = np.sqrt(se_w)
    t = np.power(se_w, 1.0 / m)
    # g = 1 - (1 - t)^m via expm1/log1p: avoids the cancellation that
    # otherwise dominates g for small t
    la = np.log1p(-t)
    g = -np.expm1(m * la)
    kr_u = sqrt_se * g * g
    # (alpha p)^(n-1) = u/(alpha p) and (1+u)^(-m-1) = se/(1+u); ditto
    # (1-t)^(m-1) = (1-g)/(1-t) and se^(1/m-1) = t/se below
    with np.errstate(over="ignore", invalid="ignore"):
        dse = m * n * alpha * (u / (alpha * p)) * (se / (1.0 + u))
        dse = np.where(np.isfinite(dse), dse, 0.0)
    dkr_dse = 0.5 / sqrt_se * g * g \
        + 2.0 * sqrt_se * g * ((1.0 - g) / (1.0 - t)) * (t / se_w)

    th_u = theta_r + dtw * se
    th_u = np.where(sat, theta_s, th_u)
    dth_u = np.where(sat | dry, 0.0, dtw * dse)
    kr_u = np.where(sat, 1.0, np.where(dry, 0.0, kr_u))
    dkr_u = np.where(sat | dry, 0.0, dkr_dse * dse)

    theta[~wet] = th_u
    dtheta[~wet] = dth_u
    kr[~wet] = kr_u
    dkr[~wet] = dkr_u
    return theta, dtheta, kr, dkr


def unconf_curves(h, z_min, z_max, phi, alpha_phi, alpha_theta, floor_frac):
    """Piecewise-linear unconfined water content and kr = theta/phi.

    Kinks use the right-hand derivative. The third branch is clamped at
    phi * alpha_phi * floor_frac to keep theta positive; the number of
    clamped entries is returned so callers can log it.

    Returns
    -------
    theta, dtheta_dh, kr, dkr_dh : float arrays
    n_clamped : int
    """
    h = np.asarray(h, dtype=float)
    z_min = np.asarray(z_min, dtype=float)
    z_max = np.asarray(z_max, dtype=float)
    dz = z_max - z_min
    h_r = z_min + alpha_phi * dz

    theta = np.where(h >= z_max, phi,
                     np.where(h >= h_r,
                              phi * (h - z_min) / dz,
                              phi * (alpha_phi - alpha_theta * (h_r - h))))
    dtheta = np.where(h >= z_max, 0.0,
                      np.where(h >= h_r, phi / dz, phi * alpha_theta))
    floor = phi * alpha_phi * floor_frac
    clamped = theta < floor
    n_clamped = int(clamped.sum())
    if n_clamped:
        theta = np.where(clamped, floor, theta)
        dtheta = np.where(clamped, 0.0, dtheta)
    return theta, dtheta, theta / phi, dtheta / phi, n_clamped


def continuation_apply(kf, q, kind_code, need_deriv):
    """Apply the continuation wrapper K(., q) to face permeabilities.

    kind_code 0 is the affine variant 1 + q*(kf - 1), kind_code 1 the
    power variant kf**q. Returns (K, dK_dkf); the derivative array is
    zeros when need_deriv is false. kf = 0 under the power variant maps
    to K = 0 with zero slope (documented limit).
    """
    kf = np.asarray(kf, dtype=float)
    if q == 0.0:
        return np.ones_like(kf), np.zeros_like(kf)
    if kind_code == 0:
        K = 1.0 + q * (kf - 1.0)
        dK = np.full_like(kf, q) if need_deriv else np.zeros_like(kf)
        return K, dK
    zero = kf <= 0.0
    kf_s = np.where(zero, 1.0, kf)
    K = np.where(zero, 0.0, np.power(kf_s, q))
    if need_deriv:
        dK = np.where(zero, 0.0, q * np.power(kf_s, q - 1.0))
    else:
        dK = np.zeros_like(kf)
    return K, dK


def face_system(h, kr, dkr, kr_dir, cell_l, cell_r, ptr, col, w, g,
                q, kind_code, mode_code, need_deriv):
    """Per-face base flux and continued permeability with derivatives.

    The base flux of face f is sum(w[ptr[f]:ptr[f+1]] * h[col[...]]) +
    g[f]. Face permeability uses the central half-sum (mode_code 0) or
    the higher-head upwind value (mode_code 1, ties fall back to the
    half-sum); Dirichlet boundary faces (cell_r < 0) use the precomputed
    kr_dir value, which carries no derivative.

    Returns
    -------
    flux0, kface, dk_l, dk_r : float arrays over faces
        dk_l / dk_r are d(kface)/dh of the left/right cell.
    """
    hw = w * h[col]
    flux0 = np.add.reduceat(hw, ptr[:-1]) if len(hw) else np.zeros(0)
    flux0 = flux0 + g

    bdry = cell_r < 0
    safe_r = np.where(bdry, 0, cell_r)
    kr_l = kr[cell_l]
    kr_r = kr[safe_r]
    if mode_code == 0:
        kf = 0.5 * (kr_l + kr_r)
        wl = np.full(len(cell_l), 0.5)
        wr = wl
    else:
        h_l = h[cell_l]
        h_r = h[safe_r]
        wl = np.where(h_l > h_r, 1.0, np.where(h_l < h_r, 0.0, 0.5))
        wr = 1.0 - wl
        kf = wl * kr_l + wr * kr_r
    kf = np.where(bdry, kr_dir, kf)

    K, dKdkf = continuation_apply(kf, q, kind_code, need_deriv)
    if need_deriv:
        dk_l = np.where(bdry, 0.0, dKdkf * wl * dkr[cell_l])
        dk_r = np.where(bdry, 0.0, dKdkf * wr * dkr[safe_r])
    else:
        dk_l = np.zeros(len(cell_l))
        dk_r = dk_l
    return flux0, K, dk_l, dk_r


def scatter_faces(values, cell_l, cell_r, n_cells):
    """Signed per-cell accumulation of face quantities.

    Adds values to the first adjacent cell and subtracts them from the
    second where it exists (cell_r >= 0).
    """
    out = np.bincount(cell_l, weights=values, minlength=n_cells)
    interior = cell_r >= 0
    if interior.any():
        out -= np.bincount(cell_r[interior], weights=values[interior],
                           minlength=n_cells)
    return out
