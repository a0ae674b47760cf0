"""Constitutive relationships for variably saturated flow.

Two models: the van Genuchten / Mualem retention and relative
permeability curves, and the mesh-dependent piecewise-linear unconfined
model where kr equals the cell saturation. Both are exposed as scalar
functions plus vectorized per-cell evaluations used by assembly, and a
continuation wrapper interpolating each kr toward 1.
"""

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import _kernels

__all__ = [
    "VgmParams",
    "UnconfinedParams",
    "ConstitutiveModel",
    "vgm_theta",
    "vgm_kr_of_theta",
    "vgm_kr_of_head",
    "unconf_theta",
    "unconf_kr",
    "continuation_kr",
    "cell_curves",
]

logger = logging.getLogger(__name__)

# Third-branch clamp: theta never drops below phi*alpha_phi*UNCONF_FLOOR.
UNCONF_FLOOR = 1e-6


@dataclass(frozen=True)
class VgmParams:
    """Van Genuchten retention parameters; m is derived as 1 - 1/n."""

    theta_r: float
    theta_s: float
    alpha: float  # 1/m
    n: float

    def __post_init__(self):
        if not 0.0 <= self.theta_r < self.theta_s <= 1.0:
            raise ValueError(
                f"need 0 <= theta_r < theta_s <= 1, got "
                f"{self.theta_r}, {self.theta_s}")
        if self.alpha <= 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.n <= 1.0:
            raise ValueError(f"n must exceed 1, got {self.n}")

    @property
    def m(self):
        return 1.0 - 1.0 / self.n


@dataclass(frozen=True)
class UnconfinedParams:
    """Unconfined-model parameters: porosity and the two small slopes.

    alpha_phi positions the lower breakpoint inside the cell's vertical
    extent; alpha_theta is the residual slope below it. Both are kept
    small so they only guard positivity of the water content.
    """

    phi: float = 0.3
    alpha_phi: float = 1e-2
    alpha_theta: float = 1e-3  # 1/m

    def __post_init__(self):
        if not 0.0 < self.phi <= 1.0:
            raise ValueError(f"porosity must be in (0, 1], got {self.phi}")
        if not 0.0 < self.alpha_phi < 1.0:
            raise ValueError(
                f"alpha_phi must be in (0, 1), got {self.alpha_phi}")
        if self.alpha_theta <= 0.0:
            raise ValueError(
                f"alpha_theta must be positive, got {self.alpha_theta}")


ConstitutiveModel = Union[VgmParams, UnconfinedParams]


def vgm_theta(psi, p):
    """Water content theta(psi); saturated branch returns theta_s.

    Examples frozen in the tests: psi=0 gives theta_s; psi=-1 with
    (0.1, 0.4, 1, 2) gives 0.31213203435596426.
    """
    th, _, _, _ = _kernels.vgm_curves(
        np.atleast_1d(np.asarray(psi, dtype=float)),
        p.theta_r, p.theta_s, p.alpha, p.n)
    return float(th[0]) if np.isscalar(psi) else th.reshape(np.shape(psi))


def vgm_kr_of_theta(theta, p):
    """Mualem relative permeability as a function of water content.

    Raises ValueError outside [theta_r, theta_s]; assembly clamps before
    calling. Endpoints map exactly to 0 and 1.
    """
    theta_a = np.atleast_1d(np.asarray(theta, dtype=float))
    if (theta_a < p.theta_r).any() or (theta_a > p.theta_s).any():
        raise ValueError(
            f"theta outside [{p.theta_r}, {p.theta_s}]")
    se = (theta_a - p.theta_r) / (p.theta_s - p.theta_r)
    m = p.m
    kr = np.sqrt(se) * (1.0 - np.power(1.0 - np.power(se, 1.0 / m), m)) ** 2
    kr = np.where(se <= 0.0, 0.0, np.where(se >= 1.0, 1.0, kr))
    return float(kr[0]) if np.isscalar(theta) else kr.reshape(np.shape(theta))


def vgm_kr_of_head(h, z, p):
    """kr as a function of hydraulic head: kr(theta(h - z))."""
    psi = np.asarray(h, dtype=float) - np.asarray(z, dtype=float)
    _, _, kr, _ = _kernels.vgm_curves(
        np.atleast_1d(psi), p.theta_r, p.theta_s, p.alpha, p.n)
    return float(kr[0]) if psi.ndim == 0 else kr.reshape(psi.shape)


def unconf_theta(h, z_min, z_max, p):
    """Piecewise-linear cell water content of the unconfined model.

    z_min / z_max are the cell's vertical vertex extents. Continuous at
    both breakpoints; clamped at phi*alpha_phi*1e-6 below the residual
    branch (the clamp is logged when it activates).
    """
    th, _, _, _, n_clamped = _kernels.unconf_curves(
        np.atleast_1d(np.asarray(h, dtype=float)),
        np.atleast_1d(np.asarray(z_min, dtype=float)),
        np.atleast_1d(np.asarray(z_max, dtype=float)),
        p.phi, p.alpha_phi, p.alpha_theta, UNCONF_FLOOR)
    if n_clamped:
        logger.warning("unconfined theta floor active in %d cells", n_clamped)
    return float(th[0]) if np.isscalar(h) else th.reshape(np.shape(h))


def unconf_kr(h, z_min, z_max, p):
    """Relative permeability of the unconfined model: theta/phi."""
    th = unconf_theta(h, z_min, z_max, p)
    return th / p.phi


def continuation_kr(kr_value, q, kind):
    """Continuation-wrapped permeability K(kr, q).

    kind "linear" is 1 + q*(kr - 1); kind "power" is kr**q. Both equal 1
    at q = 0 and kr_value at q = 1. kr_value = 0 under "power" with
    q > 0 returns the limit 0.
    """
    K, _ = _kernels.continuation_apply(
        np.atleast_1d(np.asarray(kr_value, dtype=float)),
        float(q), _kind_code(kind), False)
    return float(K[0]) if np.isscalar(kr_value) else \
        K.reshape(np.shape(kr_value))


def _kind_code(kind):
    try:
        return {"linear": 0, "power": 1}[kind]
    except KeyError:
        raise ValueError(
            f"unknown continuation kind {kind!r} "
            "(expected 'linear' or 'power')") from None


def cell_curves(model, h, z_centroid, z_min, z_max, kernels=None):
    """Vectorized (theta, dtheta_dh, kr, dkr_dh) for an array of cells.

    VGM evaluates at psi = h - z_centroid; the unconfined model uses the
    cell vertical extents directly. `kernels` overrides the backend
    (benchmark hook).
    """
    kern = kernels or _kernels
    if isinstance(model, VgmParams):
        return kern.vgm_curves(
            h - z_centroid, model.theta_r, model.theta_s,
            model.alpha, model.n)
    th, dth, kr, dkr, n_clamped = kern.unconf_curves(
        h, z_min, z_max, model.phi, model.alpha_phi, model.alpha_theta,
        UNCONF_FLOOR)
    if n_clamped:
        logger.warning("unconfined theta floor active in %d cells", n_clamped)
    return th, dth, kr, dkr
