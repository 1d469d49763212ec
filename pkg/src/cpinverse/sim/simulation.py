"""Yee FDTD with CPML boundaries and Drude media."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from itertools import product

import numpy as np

from ..materials import DrudeParameters, drude_update_coefficients
from . import _kernels as K
from .grid import Grid, SimulationConfig
from .pml import axis_profile
from .records import GridBand, PointSource, ProbePosition, ProbeRecord, VolumeRecord

NAN_CHECK_EVERY = 100


@dataclass
class Media:
    """Per-E-component material description.

    ``fill[c]`` scales the Drude response at each location of component c
    (see ``materials.fill_drude`` for ``damping_decades``); ``pec[c]`` marks
    locations held at zero.
    """

    drude: DrudeParameters | None = None
    fill: tuple | None = None
    pec: tuple | None = None
    damping_decades: float = 0.0

    def check(self, grid: Grid):
        for arrs, name in ((self.fill, "fill"), (self.pec, "pec")):
            if arrs is None:
                continue
            if len(arrs) != grid.ndim:
                raise ValueError(f"{name} needs one array per E component")
            for c, a in enumerate(arrs):
                if a.shape != grid.e_shape(c):
                    raise ValueError(f"{name}[{c}] has shape {a.shape}, grid expects {grid.e_shape(c)}")
        if self.fill is not None and self.drude is None:
            raise ValueError("fill given without Drude parameters")


class Simulation:
    """Owns the field state of one grid; single owner while stepping."""

    def __init__(self, config: SimulationConfig, media: Media | None = None):
        self.config = config
        self.grid = Grid(config)
        self.media = media or Media()
        self.media.check(self.grid)
        self.dt = config.dt
        self.dx = config.dx
        self.n_steps = config.n_steps
        self._build_coefficients()
        self.reset()

    # ------------------------------------------------------------------ setup
    def _build_coefficients(self):
        cfg, g = self.config, self.grid
        self.profiles = [
            axis_profile(n, g.npml, self.dx, self.dt, cfg.pml_order, cfg.pml_kappa_max, cfg.pml_alpha_max)
            for n in g.shape
        ]
        ny = g.e_shape(0)[1]
        self._ar, self._sr = np.ones(ny), np.zeros(ny)
        if cfg.axial:
            y = g.e_coords(0, 1)
            on_axis = np.abs(y) < 0.25 * self.dx
            self._ar[on_axis] = 2.0
            self._sr = np.where(on_axis, 0.0, 1.0 / np.where(on_axis, 1.0, y))
        d = self.media.drude
        self.ca, self.cb, self.bd, self.kd, self.dkd, self.dbd = [], [], [], [], [], []
        for c in range(g.ndim):
            shape = g.e_shape(c)
            f = self.media.fill[c] if self.media.fill is not None else np.zeros(shape)
            if d is not None:
                kd, bd, dkd, dbd = drude_update_coefficients(d, f, self.dt, self.media.damping_decades)
                eps = 1.0 + f * (d.eps_inf - 1.0)
            else:
                kd, bd, dkd, dbd = (np.zeros(shape) for _ in range(4))
                eps = np.ones(shape)
            ca = np.ones(shape)
            cb = self.dt / eps
            if self.media.pec is not None:
                p = self.media.pec[c]
                ca[p] = 0.0
                cb, bd, dkd, dbd = (np.where(p, 0.0, a) for a in (cb, bd, dkd, dbd))
            for lst, a in ((self.ca, ca), (self.cb, cb), (self.bd, bd), (self.kd, kd)):
                lst.append(np.ascontiguousarray(a, dtype=float))
            self.dkd.append(np.ravel(dkd))
            self.dbd.append(np.ravel(dbd))

    def reset(self):
        g = self.grid
        self.E = [np.zeros(g.e_shape(c)) for c in range(g.ndim)]
        self.J = [np.zeros(g.e_shape(c)) for c in range(g.ndim)]
        if g.ndim == 2:
            nx, ny = g.shape
            self.H = [np.zeros((nx, ny))]
            self.psi_h = [np.zeros((nx, ny)), np.zeros((nx, ny))]
            self.psi_e = [np.zeros(g.e_shape(0)), np.zeros(g.e_shape(1))]
        else:
            nx, ny, nz = g.shape
            hs = [(nx + 1, ny, nz), (nx, ny + 1, nz), (nx, ny, nz + 1)]
            self.H = [np.zeros(s) for s in hs]
            self.psi_h = [np.zeros(s) for s in hs for _ in range(2)]
            self.psi_e = [np.zeros(g.e_shape(c)) for c in range(3) for _ in range(2)]
        self.n = 0

    # ---------------------------------------------------------------- stepping
    def _update_h(self):
        p = self.profiles
        if self.grid.ndim == 2:
            K.update_h_2d(self.H[0], self.E[0], self.E[1], self.psi_h[0], self.psi_h[1],
                          p[0].b_half, p[0].c_half, p[0].kinv_half,
                          p[1].b_half, p[1].c_half, p[1].kinv_half, self.dt, self.dx)
        else:
            K.update_h_3d(*self.H, *self.E, *self.psi_h,
                          p[0].b_half, p[0].c_half, p[0].kinv_half,
                          p[1].b_half, p[1].c_half, p[1].kinv_half,
                          p[2].b_half, p[2].c_half, p[2].kinv_half, self.dt, self.dx)

    def _update_e(self):
        p = self.profiles
        if self.grid.ndim == 2:
            K.update_e_2d(self.E[0], self.E[1], self.H[0], self.J[0], self.J[1],
                          self.ca[0], self.cb[0], self.bd[0], self.kd[0],
                          self.ca[1], self.cb[1], self.bd[1], self.kd[1],
                          self.psi_e[0], self.psi_e[1],
                          p[0].b_int, p[0].c_int, p[0].kinv_int,
                          p[1].b_int, p[1].c_int, p[1].kinv_int, self._ar, self._sr, self.dx)
        else:
            K.update_e_3d(*self.E, *self.H, *self.J,
                          self.ca[0], self.cb[0], self.bd[0], self.kd[0],
                          self.ca[1], self.cb[1], self.bd[1], self.kd[1],
                          self.ca[2], self.cb[2], self.bd[2], self.kd[2],
                          *self.psi_e,
                          p[0].b_int, p[0].c_int, p[0].kinv_int,
                          p[1].b_int, p[1].c_int, p[1].kinv_int,
                          p[2].b_int, p[2].c_int, p[2].kinv_int, self.dx)

    def step(self, injections=()):
        """Advance by dt.  ``injections`` is a sequence of (comp, index, current density)."""
        self._update_h()
        self._update_e()
        for comp, idx, value in injections:
            self.E[comp][idx] -= self.cb[comp][idx] * value
        self.n += 1
        if self.n % NAN_CHECK_EVERY == 0:
            self._check_finite()
        return self

    def _check_finite(self):
        for c, e in enumerate(self.E):
            if not np.isfinite(e).all():
                bad = np.argwhere(~np.isfinite(e))[0]
                raise FloatingPointError(
                    f"non-finite E{'xyz'[c]} at step {self.n}, index {tuple(bad)} "
                    f"(courant={self.config.courant}, dt={self.dt:g})"
                )

    # ------------------------------------------------------------ diagnostics
    def energy(self) -> float:
        """Electromagnetic energy 0.5 * sum(eps E^2 + H^2) dV (H at the half step)."""
        dv = self.dx**self.grid.ndim
        we = sum(float(np.sum(e * e * (self.dt / np.where(cb > 0, cb, self.dt)))) for e, cb in zip(self.E, self.cb))
        wh = sum(float(np.sum(h * h)) for h in self.H)
        return 0.5 * (we + wh) * dv

    # ------------------------------------------------------------- sources
    def _source_injections(self, sources):
        """Per source: list of (comp, index, weight) with weight = orientation / dV."""
        out = []
        for s in sources:
            o = np.asarray(s.orientation, float)
            parts = []
            for c in range(self.grid.ndim):
                if o[c] != 0.0:
                    if not self.grid.inside_interior(s.position):
                        raise ValueError(f"source at {s.position} lies in the PML collar or outside")
                    idx = self.grid.snap_e(c, s.position)
                    dv = np.broadcast_to(self.grid.cell_volume(c), self.grid.e_shape(c))[idx]
                    parts.append((c, idx, o[c] / dv))
            if len(s.waveform) > self.n_steps:
                raise ValueError("source waveform longer than the configured number of steps")
            out.append((s, parts))
        return out

    def _probe_stencils(self, probes):
        g = self.grid
        out = []
        for pr in probes:
            c = pr.component
            shape = g.e_shape(c)
            idx, wts = [], []
            base, frac = [], []
            for a in range(g.ndim):
                u = pr.position[a] / self.dx + g.shape[a] / 2 - g.offsets[c][a]
                if u < -1e-9 or u > shape[a] - 1 + 1e-9:
                    raise ValueError(f"probe {pr.position} outside the domain")
                i0 = int(min(max(np.floor(u + 1e-12), 0), shape[a] - 2))
                base.append(i0)
                frac.append(min(max(u - i0, 0.0), 1.0))
            for corner in product((0, 1), repeat=g.ndim):
                w = 1.0
                for a, bit in enumerate(corner):
                    w *= frac[a] if bit else 1.0 - frac[a]
                if w != 0.0:
                    idx.append(np.ravel_multi_index(tuple(b + bit for b, bit in zip(base, corner)), shape))
                    wts.append(w)
            out.append((c, np.array(idx, dtype=np.int64), np.array(wts)))
        return out

    def signature(self, sources, probes) -> str:
        h = hashlib.sha256(self.config.digest().encode())
        for s in sources:
            h.update(s.key().encode())
        for p in probes:
            h.update(np.asarray(p.position, float).tobytes())
            h.update(bytes([p.component]))
        return h.hexdigest()[:16]

    # ------------------------------------------------------------------ runs
    def run(self, sources, probes=(), band: GridBand | None = None, record_steps=None,
            stride: int = 1, memory_budget_mb: float = 2048.0):
        """Zero the fields, drive ``sources`` for the configured steps.

        Returns (ProbeRecord, VolumeRecord | None).  Band samples are taken
        before the E update of every step in ``record_steps``.
        """
        if isinstance(sources, PointSource):
            sources = [sources]
        self.reset()
        inj = self._source_injections(sources)
        stencils = self._probe_stencils(probes)
        N = self.n_steps
        data = np.zeros((len(probes), N))

        rec_steps = None
        if band is not None:
            rec_steps = np.asarray(record_steps if record_steps is not None else np.arange(0, N, stride), dtype=np.int64)
            if np.any(rec_steps < 0) or np.any(rec_steps >= N):
                raise ValueError("record steps outside the run")
            n_arrays = 2 if self.media.drude is not None else 1
            need = band.size * len(rec_steps) * 8 * n_arrays / 2**20
            if need > memory_budget_mb:
                raise MemoryError(f"band record needs {need:.0f} MB > budget {memory_budget_mb:.0f} MB")
            want = np.zeros(N, dtype=bool)
            want[rec_steps] = True
            slot = np.cumsum(want) - 1
            rec_E = [np.zeros((len(rec_steps), len(ix))) for ix in band.indices]
            rec_J = [np.zeros((len(rec_steps), len(ix))) for ix in band.indices]
            # d(current)/d(fill) at the band, carried by its own recursion
            junit = [np.zeros(len(ix)) for ix in band.indices]
            bkd = [self.kd[c].ravel()[ix] for c, ix in enumerate(band.indices)]
            bdkd = [self.dkd[c][ix] for c, ix in enumerate(band.indices)]
            bdbd = [self.dbd[c][ix] for c, ix in enumerate(band.indices)]
            # extra bound polarisation of unit fill when eps_inf != 1
            chi = (self.media.drude.eps_inf - 1.0) / self.dt if self.media.drude is not None else 0.0
            en_all = [None] * len(band.indices)

        for n in range(N):
            if band is not None:
                for c, ix in enumerate(band.indices):
                    if len(ix) == 0:
                        continue
                    en = self.E[c].ravel()[ix]
                    jprev = self.J[c].ravel()[ix]
                    junit[c] = bkd[c] * junit[c] + bdkd[c] * jprev + bdbd[c] * en
                    en_all[c] = en
                    if want[n]:
                        rec_E[c][slot[n]] = en
                        rec_J[c][slot[n]] = junit[c]
            injections = []
            for s, parts in inj:
                if n < len(s.waveform):
                    amp = s.waveform[n]
                    if amp != 0.0:
                        injections.extend((c, idx, w * amp) for c, idx, w in parts)
            self.step(injections)
            if band is not None and want[n] and chi != 0.0:
                for c, ix in enumerate(band.indices):
                    if len(ix):
                        rec_J[c][slot[n]] += chi * (self.E[c].ravel()[ix] - en_all[c])
            for p, (c, ix, w) in enumerate(stencils):
                data[p, n] = np.dot(self.E[c].ravel()[ix], w)
        self._check_finite()

        sig = self.signature(sources, probes)
        rec = ProbeRecord(
            positions=[tuple(p.position) for p in probes],
            components=[p.component for p in probes],
            data=data,
            dt=self.dt,
            signature=sig,
            meta={"config": self.config.digest()},
        )
        vol = None
        if band is not None:
            vol = VolumeRecord(
                band=band, steps=rec_steps, stride=stride, dt=self.dt,
                E=tuple(rec_E), current=tuple(rec_J) if self.media.drude is not None else None,
                meta={"config": self.config.digest(), "signature": sig},
            )
        return rec, vol


# --------------------------------------------------------------------------
# functional surface


def create_simulation(config: SimulationConfig, media: Media | None = None) -> Simulation:
    return Simulation(config, media)


def step(sim: Simulation) -> Simulation:
    return sim.step()


def run_with_source(sim: Simulation, source, probes) -> ProbeRecord:
    rec, _ = sim.run(source, probes)
    return rec


def record_volume(sim: Simulation, source, region: GridBand, stride: int = 2, steps=None,
                  memory_budget_mb: float = 2048.0) -> VolumeRecord:
    if region.size == 0:
        return VolumeRecord(region, np.zeros(0, dtype=np.int64), stride, sim.dt,
                            tuple(np.zeros((0, 0)) for _ in range(sim.grid.ndim)))
    for c, ix in enumerate(region.indices):
        if len(ix) and (ix.min() < 0 or ix.max() >= np.prod(sim.grid.e_shape(c))):
            raise ValueError("band outside the domain")
    _, vol = sim.run(source, (), band=region, record_steps=steps, stride=stride,
                     memory_budget_mb=memory_budget_mb)
    return vol
