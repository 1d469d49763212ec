"""Complex-frequency-shifted convolutional PML coefficient profiles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class AxisProfile:
    """Recursive-convolution coefficients along one axis.

    The ``*_int`` arrays live on integer lattice positions (E-field
    derivative locations), ``*_half`` on half-integer positions (H-field
    derivative locations).
    """

    b_int: np.ndarray
    c_int: np.ndarray
    kinv_int: np.ndarray
    b_half: np.ndarray
    c_half: np.ndarray
    kinv_half: np.ndarray


def _coeffs(depth, npml, dx, dt, order, kappa_max, alpha_max):
    rho = np.clip(depth / max(npml, 1), 0.0, 1.0)
    sigma_max = 0.8 * (order + 1) / dx
    sigma = sigma_max * rho**order
    kappa = 1.0 + (kappa_max - 1.0) * rho**order
    alpha = np.where(rho > 0, alpha_max * (1.0 - rho), 0.0)
    b = np.exp(-(sigma / kappa + alpha) * dt)
    denom = sigma * kappa + kappa**2 * alpha
    c = np.where(sigma > 0, sigma * (b - 1.0) / np.where(denom > 0, denom, 1.0), 0.0)
    b = np.where(sigma > 0, b, 0.0)
    return b, c, 1.0 / kappa


def axis_profile(n_cells: int, npml: int, dx: float, dt: float, order=3.0, kappa_max=1.0, alpha_max=0.05):
    pos_int = np.arange(n_cells + 1, dtype=float)
    pos_half = np.arange(n_cells, dtype=float) + 0.5
    if npml == 0:
        z_int, z_half = np.zeros(n_cells + 1), np.zeros(n_cells)
    else:
        lo, hi = npml, n_cells - npml
        z_int = np.maximum(np.maximum(lo - pos_int, pos_int - hi), 0.0)
        z_half = np.maximum(np.maximum(lo - pos_half, pos_half - hi), 0.0)
    bi, ci, ki = _coeffs(z_int, npml, dx, dt, order, kappa_max, alpha_max)
    bh, ch, kh = _coeffs(z_half, npml, dx, dt, order, kappa_max, alpha_max)
    return AxisProfile(bi, ci, ki, bh, ch, kh)
