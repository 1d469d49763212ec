"""Dispersion models: Drude metal for the structure, Lorentz atom."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .units import DEFAULT_L0_NM, ev_to_sim


@dataclass(frozen=True)
class DrudeParameters:
    """eps(w) = eps_inf - wp^2 / (w^2 + i*gamma*w), frequencies in c/L0."""

    eps_inf: float
    omega_p: float
    gamma_p: float
    name: str = "custom"

    def __post_init__(self):
        if self.omega_p <= 0:
            raise ValueError("omega_p must be positive")
        if self.gamma_p < 0:
            raise ValueError("gamma_p must be non-negative")
        if self.eps_inf < 1:
            raise ValueError("eps_inf must be >= 1")


@dataclass(frozen=True)
class AtomModel:
    """Single-resonance atom polarised along one axis.

    ``alpha0`` is kept at 1 by default: the merit only needs relative values
    and the SI prefactor is applied on export.
    """

    alpha0: float = 1.0
    omega_a: float = ev_to_sim(1.6)
    gamma_a: float = ev_to_sim(2.5e-8)
    axis: tuple = (1.0, 0.0, 0.0)

    def __post_init__(self):
        if self.omega_a <= 0 or self.gamma_a <= 0:
            raise ValueError("omega_a and gamma_a must be positive")
        if self.alpha0 < 0:
            raise ValueError("alpha0 must be non-negative")
        n = float(np.linalg.norm(self.axis))
        if n == 0:
            raise ValueError("axis must be non-zero")
        if abs(n - 1.0) > 1e-12:
            object.__setattr__(self, "axis", tuple(float(a) / n for a in self.axis))


def drude_permittivity(omega, p: DrudeParameters):
    omega = np.asarray(omega, dtype=complex)
    return p.eps_inf - p.omega_p**2 / (omega**2 + 1j * p.gamma_p * omega)


def fill_drude(p: DrudeParameters, fill, damping_decades: float = 0.0):
    """Drude parameters of a partially filled cell: (wp^2(f), gamma(f), eps_inf(f)).

    wp^2 and eps_inf - 1 scale linearly with fill.  With ``damping_decades`` D
    the collision rate also rises to gamma_p * 10^(D (1 - f)), so a sliver of
    metal is a weak, heavily damped conductor instead of a dilute plasma.
    """
    f = np.asarray(fill, dtype=float)
    return f * p.omega_p**2, p.gamma_p * 10.0 ** (damping_decades * (1.0 - f)), 1.0 + f * (p.eps_inf - 1.0)


def drude_update_coefficients(p: DrudeParameters, fill, dt: float, damping_decades: float = 0.0):
    """Exponential-integrator ADE coefficients and their fill derivatives.

    J^{n+1/2} = kd J^{n-1/2} + bd E^n with kd = exp(-gamma dt) and
    bd = wp^2 (1 - kd) / gamma, exact for E held fixed over the step and
    well behaved when gamma dt is large.  Returns (kd, bd, dkd/df, dbd/df).
    """
    f = np.asarray(fill, dtype=float)
    wp2, gam, _ = fill_drude(p, f, damping_decades)
    x = gam * dt
    kd = np.exp(-x)
    small = x < 1e-8
    xs = np.where(small, 1.0, x)
    phi = np.where(small, 1.0 - 0.5 * x, -np.expm1(-xs) / xs)
    dphi = np.where(small, -0.5, (kd * (1.0 + xs) - 1.0) / xs**2)
    dx_df = -damping_decades * np.log(10.0) * x
    bd = wp2 * dt * phi
    dkd = -kd * dx_df
    dbd = p.omega_p**2 * dt * (phi + f * dphi * dx_df)
    return kd, bd, dkd, dbd


def atom_polarizability(omega, a: AtomModel):
    """alpha(w) = alpha0 wa^2 / (wa^2 - w^2 - i gamma_a w).

    Also valid for complex ``omega``; on the imaginary axis w = i*xi the
    result is real and positive.
    """
    omega = np.asarray(omega, dtype=complex)
    return a.alpha0 * a.omega_a**2 / (a.omega_a**2 - omega**2 - 1j * a.gamma_a * omega)


# Drude-only fits for gold, energies in eV: (eps_inf, hbar*wp, hbar*gamma).
_GOLD_PRESETS = {
    # free-electron gold, eps_inf = 1 (Rakic et al. 1998 plasma frequency and damping)
    "gold": (1.0, 9.03, 0.053),
    # background-screened gold (Johnson & Christy based Drude fit)
    "gold-jc": (9.5, 8.95, 0.069),
}

PRESET_VERSION = "1"


def gold_preset(name: str = "gold", l0_nm: float = DEFAULT_L0_NM, **override) -> DrudeParameters:
    """Literature Drude gold in simulation units; keyword overrides replace fields."""
    try:
        eps_inf, wp_ev, g_ev = _GOLD_PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown material preset {name!r}; choose from {sorted(_GOLD_PRESETS)}") from None
    p = DrudeParameters(eps_inf, ev_to_sim(wp_ev, l0_nm), ev_to_sim(g_ev, l0_nm), name=name)
    return replace(p, **override) if override else p


def list_presets(l0_nm: float = DEFAULT_L0_NM) -> list[str]:
    lines = []
    for name, (eps_inf, wp, g) in sorted(_GOLD_PRESETS.items()):
        p = gold_preset(name, l0_nm)
        lines.append(
            f"{name}: eps_inf={eps_inf:g}, hbar*wp={wp:g} eV, hbar*gamma={g:g} eV "
            f"-> wp={p.omega_p:.6g} c/L0, gamma={p.gamma_p:.6g} c/L0 (L0={l0_nm:g} nm)"
        )
    return lines
