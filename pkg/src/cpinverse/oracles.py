"""Closed-form reference potentials used by the validation harness."""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad

from .materials import AtomModel, atom_polarizability


def free_green_xx_imag(R: float, xi: float) -> float:
    """G0_xx(R, i xi) for a separation vector perpendicular to x."""
    return np.exp(-xi * R) / (4 * np.pi * R) * (1 + (1 + xi * R) / (xi * R) ** 2)


def pec_plane_potential(z: float, atom: AtomModel, orientation: str = "parallel") -> float:
    """U(z) for an atom polarised parallel (or normal) to a perfectly conducting plane.

    The scattered Green tensor is that of the mirror dipole at distance 2z
    (-p parallel, +p normal), and U = (1/2pi) int_0^inf dxi xi^2 alpha(i xi) G1(i xi).
    """
    if z <= 0:
        raise ValueError("z must be positive")
    if orientation not in ("parallel", "normal"):
        raise ValueError("orientation must be 'parallel' or 'normal'")
    normal = orientation == "normal"

    def integrand(xi):
        a = atom_polarizability(1j * xi, atom).real
        if normal:
            return a * np.exp(-2 * xi * z) * 2 * (1 + 2 * xi * z) / (4 * z**2)
        return a * np.exp(-2 * xi * z) * (xi**2 + (1 + 2 * xi * z) / (4 * z**2))

    val, _ = quad(integrand, 0, np.inf, limit=400, epsabs=0, epsrel=1e-11)
    return -val / (16 * np.pi**2 * z)


def pec_plane_potential_nonretarded(z: float, atom: AtomModel, orientation: str = "parallel") -> float:
    """Static-image limit: U = -(1/2pi) int dxi alpha(i xi) / (32 pi z^3), doubled for a normal dipole."""
    val, _ = quad(lambda xi: atom_polarizability(1j * xi, atom).real, 0, np.inf, limit=400)
    return -val / (64 * np.pi**2 * z**3) * (2.0 if orientation == "normal" else 1.0)


def log_slope(z, U) -> float:
    """Least-squares exponent p in |U| ~ z^p."""
    p = np.polyfit(np.log(np.asarray(z, float)), np.log(np.abs(np.asarray(U, float))), 1)
    return float(p[0])
