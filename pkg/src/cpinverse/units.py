"""Unit conventions.

Everything internal uses c = 1, eps0 = mu0 = 1, hbar = 1 with lengths in L0,
times in L0/c and angular frequencies in c/L0.
"""

HBAR_C_EV_NM = 197.3269804  # hbar*c in eV*nm
DEFAULT_L0_NM = 100.0


def ev_to_sim(energy_ev: float, l0_nm: float = DEFAULT_L0_NM) -> float:
    """Photon energy in eV -> angular frequency in c/L0."""
    return energy_ev * l0_nm / HBAR_C_EV_NM


def sim_to_ev(omega: float, l0_nm: float = DEFAULT_L0_NM) -> float:
    return omega * HBAR_C_EV_NM / l0_nm


def energy_scale_ev(l0_nm: float = DEFAULT_L0_NM) -> float:
    """Energy represented by hbar*c/L0, the natural energy unit of a run."""
    return HBAR_C_EV_NM / l0_nm
