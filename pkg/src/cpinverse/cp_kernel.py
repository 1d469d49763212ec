"""Time-domain Casimir-Polder evaluation from recorded fields.

The potential of a ground-state atom follows from the scattered field of a
point current at the atom,

    U(r_A) = -hbar * integral_0^inf dt K(t) E1_x(r_A, t),
    K(t)   = Im g(-t),   g(w) = -i alpha(w) w / J(w) H(w),

with the transform convention f(t) = (1/2pi) int dw f(w) exp(-i w t), i.e.
J(w) = int dt J(t) exp(+i w t).  For t > 0 the one-sided transform can be
rotated onto the imaginary axis w = i*xi, where g(i xi) is real:

    K(t) = (1/2pi) int_0^inf dxi g(i xi) exp(-xi t),
    g(i xi) = alpha(i xi) (gamma + xi)^5 / (24 J0 gamma^3).

Along the real axis the integrand w^2 alpha G1 does not decay, so a truncated
real-frequency transform never converges; the rotated integral is absolutely
convergent and has a closed form (polynomial part plus exponential
integrals).  K diverges like 1/t^4 as t -> 0, but the scattered field is
identically zero before the first round trip to the structure, so K is set
to zero below ``t_min``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import exp1

from .materials import AtomModel, atom_polarizability

DECAY_THRESHOLD = 1e-6  # |J| / max|J| considered "off"


@dataclass(frozen=True)
class SourceWaveform:
    """J(t) = J0 [4 (g t)^3 - (g t)^4] exp(-g t) for t >= 0.

    ``samples[n]`` is J(n dt); ``injection[n]`` is J((n + 1/2) dt), the value
    used by the leapfrog E update from step n to n + 1.
    """

    gamma: float
    J0: float
    dt: float
    samples: np.ndarray
    injection: np.ndarray

    @property
    def n_steps(self) -> int:
        return len(self.samples)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps) * self.dt


def source_time(t, gamma: float, J0: float = 1.0):
    t = np.asarray(t, dtype=float)
    x = gamma * t
    out = J0 * (4 * x**3 - x**4) * np.exp(-np.clip(x, 0, None))
    return np.where(t >= 0, out, 0.0)


def decay_time(gamma: float, level: float = DECAY_THRESHOLD) -> float:
    """Time after which |J(t)| stays below ``level`` * max|J|.

    max|J| sits at gamma t = 2 and the late tail is monotone beyond the
    negative lobe at gamma t = 6, so bisection on gamma t in [6, 200] is safe.
    """
    peak = (4 * 8 - 16) * math.exp(-2.0)
    f = lambda x: abs((4 * x**3 - x**4) * math.exp(-x)) / peak - level
    lo, hi = 6.0, 200.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return hi / gamma


def build_source_waveform(gamma: float, J0: float, dt: float, n_steps: int) -> SourceWaveform:
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if n_steps * dt < 25.0 / gamma:
        raise ValueError(
            f"window too short: {n_steps} steps of {dt:g} cover {n_steps * dt:g} L0/c, "
            f"source needs >= {25.0 / gamma:g} L0/c to decay"
        )
    n = np.arange(n_steps)
    return SourceWaveform(
        gamma=gamma,
        J0=J0,
        dt=dt,
        samples=source_time(n * dt, gamma, J0),
        injection=source_time((n + 0.5) * dt, gamma, J0),
    )


def source_spectrum(gamma: float, J0: float, omega):
    """Closed-form J(w) = int J(t) exp(i w t) dt = 24 J0 g^3 (-i w) / (g - i w)^5.

    Accepts complex ``omega``; at w = i xi this is the (real) Laplace
    transform 24 J0 g^3 xi / (g + xi)^5.
    """
    omega = np.asarray(omega, dtype=complex)
    return 24 * J0 * gamma**3 * (-1j * omega) / (gamma - 1j * omega) ** 5


def kernel_spectrum(atom: AtomModel, gamma: float, J0: float, omega):
    """g(w) = -i alpha(w) w / J(w), finite at w = 0."""
    omega = np.asarray(omega, dtype=complex)
    return atom_polarizability(omega, atom) * (gamma - 1j * omega) ** 5 / (24 * J0 * gamma**3)


@dataclass
class ConvolutionKernel:
    dt: float
    times: np.ndarray  # t_n = n dt, n = 1..N
    values: np.ndarray  # K(t_n)
    t_min: float
    method: str
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.values)

    def scaled(self, c: float) -> "ConvolutionKernel":
        return ConvolutionKernel(self.dt, self.times, self.values * c, self.t_min, self.method, dict(self.meta))


def _effective_atom(atom: AtomModel, linewidth_floor: float | None) -> AtomModel:
    if linewidth_floor is None or linewidth_floor <= atom.gamma_a:
        return atom
    return AtomModel(atom.alpha0, atom.omega_a, linewidth_floor, atom.axis)


def _kernel_analytic(atom: AtomModel, gamma: float, J0: float, t: np.ndarray) -> np.ndarray:
    wa, ga = atom.omega_a, atom.gamma_a
    # (gamma + xi)^5 = Q(xi) (xi^2 + ga xi + wa^2) + r1 xi + r0
    num = np.poly1d([1.0, gamma]) ** 5
    q, r = np.polydiv(num.coeffs, [1.0, ga, wa**2])
    r = np.concatenate([np.zeros(2 - len(r)), r])
    r1, r0 = r
    disc = np.sqrt(complex(wa**2 - ga**2 / 4))
    p1, p2 = ga / 2 - 1j * disc, ga / 2 + 1j * disc  # xi^2 + ga xi + wa^2 = (xi + p1)(xi + p2)
    a1 = (r0 - r1 * p1) / (p2 - p1)
    a2 = (r0 - r1 * p2) / (p1 - p2)

    deg = len(q) - 1
    poly = np.zeros_like(t)
    for k, qk in enumerate(q[::-1]):  # q[::-1][k] multiplies xi^k
        poly += qk * math.factorial(k) / t ** (k + 1)
    assert deg == 3
    rest = a1 * np.exp(p1 * t) * exp1(p1 * t) + a2 * np.exp(p2 * t) * exp1(p2 * t)
    pref = atom.alpha0 * wa**2 / (2 * np.pi * 24 * J0 * gamma**3)
    return pref * (poly + rest.real)


def _kernel_quadrature(atom, gamma, J0, t, n_omega, omega_max):
    # cubic stretching puts most nodes near xi = 0, where exp(-xi t) varies fastest at late t
    u = np.linspace(0.0, 1.0, n_omega)
    xi = omega_max * u**3
    jac = 3 * omega_max * u**2
    spacing = np.diff(xi)
    near = spacing[xi[1:] <= atom.omega_a]
    if len(near) == 0 or near.max() > atom.omega_a / 20:
        raise ValueError("unresolved atomic response: refine n_omega")
    g = kernel_spectrum(atom, gamma, J0, 1j * xi).real
    out = np.empty_like(t)
    w = np.full(n_omega, 1.0 / (n_omega - 1))
    w[0] = w[-1] = 0.5 / (n_omega - 1)
    for i, ti in enumerate(t):
        out[i] = np.sum(w * jac * g * np.exp(-xi * ti))
    return out / (2 * np.pi)


def build_kernel(
    atom: AtomModel,
    src: SourceWaveform,
    n_omega: int | None = None,
    omega_max: float | None = None,
    *,
    method: str = "analytic",
    t_min: float = 0.2,
    linewidth_floor: float | None = None,
) -> ConvolutionKernel:
    """Sample K(t_n) = Im g(-t_n) at t_n = n dt, n = 1..N (zero for t_n < t_min).

    ``method="analytic"`` uses the closed form; ``method="quadrature"``
    integrates along the imaginary frequency axis on ``n_omega`` nodes up to
    ``omega_max`` and serves as the independent check of the closed form.
    """
    if t_min <= 0:
        raise ValueError("t_min must be positive")
    atom_eff = _effective_atom(atom, linewidth_floor)
    t = np.arange(1, src.n_steps + 1) * src.dt
    on = t >= t_min
    values = np.zeros_like(t)
    if atom.alpha0 != 0 and on.any():
        if method == "analytic":
            values[on] = _kernel_analytic(atom_eff, src.gamma, src.J0, t[on])
        elif method == "quadrature":
            n_omega = n_omega or 4000
            omega_max = omega_max or max(10 * src.gamma, 40.0 / t_min)
            if omega_max < 10 * src.gamma or omega_max * t_min < 30:
                raise ValueError(
                    f"omega_max={omega_max:g} too small: need >= 10*gamma and >= 30/t_min"
                )
            values[on] = _kernel_quadrature(atom_eff, src.gamma, src.J0, t[on], n_omega, omega_max)
        else:
            raise ValueError(f"unknown kernel method {method!r}")
    if not np.all(np.isfinite(values)):
        raise FloatingPointError("non-finite kernel samples")
    meta = dict(gamma=src.gamma, J0=src.J0, gamma_a=atom_eff.gamma_a, omega_a=atom.omega_a,
                n_omega=n_omega, omega_max=omega_max)
    return ConvolutionKernel(src.dt, t, values, t_min, method, meta)


# ---------------------------------------------------------------------------
# records -> potential / force


@dataclass
class PotentialSample:
    position: tuple
    U: float
    flagged: bool = False
    meta: dict = field(default_factory=dict)


def scattered_series(total, vacuum):
    """Elementwise structure-minus-vacuum probe series."""
    from .sim.records import ProbeRecord

    if total.dt != vacuum.dt:
        raise ValueError(f"time step mismatch: {total.dt} vs {vacuum.dt}")
    if total.data.shape != vacuum.data.shape:
        raise ValueError("probe layout mismatch")
    if total.signature != vacuum.signature:
        raise ValueError("records come from different source/probe setups")
    return ProbeRecord(
        positions=total.positions,
        components=total.components,
        data=total.data - vacuum.data,
        dt=total.dt,
        signature=total.signature,
        meta={**total.meta, "scattered": True},
    )


def _check_decay(series: np.ndarray, frac: float = 0.05, tol: float = 1e-3) -> bool:
    peak = np.max(np.abs(series))
    if peak == 0:
        return True
    n_tail = max(1, int(len(series) * frac))
    return np.max(np.abs(series[-n_tail:])) <= tol * peak


def _check_lengths(K: ConvolutionKernel, n: int, dt: float):
    if abs(K.dt - dt) > 1e-12 * dt:
        raise ValueError(f"kernel dt {K.dt} != record dt {dt}")
    if len(K) != n:
        raise ValueError(f"kernel has {len(K)} samples, record has {n}")


def cp_potential(K: ConvolutionKernel, e1, probe: int = 0) -> PotentialSample:
    """U = -sum_n K(t_n) E1_x(t_n) dt  (hbar = 1)."""
    series = e1.data[probe]
    _check_lengths(K, len(series), e1.dt)
    U = -float(np.dot(K.values, series) * e1.dt)
    decayed = _check_decay(series)
    if not decayed:
        warnings.warn("scattered series has not decayed by the final step; sample flagged", RuntimeWarning)
    return PotentialSample(tuple(e1.positions[probe]), U, flagged=not decayed, meta=dict(e1.meta))


def merit_force(K: ConvolutionKernel, gradient_probe, plus: int = 1, minus: int = 0) -> float:
    """Kernel-weighted x-gradient of the scattered field at the atom.

    ``gradient_probe`` holds scattered Ex at r_A + dx (index ``plus``) and
    r_A - dx (index ``minus``).  Positive means attraction toward a
    structure on the +x side, negative means repulsion.
    """
    d = gradient_probe.data
    _check_lengths(K, d.shape[1], gradient_probe.dt)
    sep = gradient_probe.positions[plus][0] - gradient_probe.positions[minus][0]
    if sep <= 0:
        raise ValueError("plus probe must sit at larger x than minus probe")
    dEdx = (d[plus] - d[minus]) / sep
    if not (_check_decay(d[plus]) and _check_decay(d[minus])):
        warnings.warn("gradient probe series has not decayed by the final step", RuntimeWarning)
    return float(np.dot(K.values, dEdx) * gradient_probe.dt)


def merit_weights(K: ConvolutionKernel, sep: float) -> np.ndarray:
    """Per-step weights w_n with merit = sum_n w_n (E+[n] - E-[n])."""
    return K.values * K.dt / sep


def cp_force_x(potential: Callable[[np.ndarray], float], r_A, delta: float, cell: float) -> float:
    """F_x = -[U(r_A + delta/2 x) - U(r_A - delta/2 x)] / delta.

    ``potential`` runs a full evaluation with the source at the given
    position.  ``delta`` must be at least one cell.
    """
    if delta < cell * (1 - 1e-9):
        raise ValueError("displacement must be at least one grid cell")
    r_A = np.asarray(r_A, dtype=float)
    shift = np.zeros_like(r_A)
    shift[0] = delta / 2
    return -(potential(r_A + shift) - potential(r_A - shift)) / delta
