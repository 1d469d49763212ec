"""Forward and reverse-time adjoint runs and the shape sensitivity they give.

The merit is the kernel-weighted x-gradient of the scattered field at the
atom, measured with probes one cell either side of it:

    M = sum_n w_n [E_x^{n+1}(r_A + dx) - E_x^{n+1}(r_A - dx)],  w_n = K_n dt / (2 dx).

Adding a fill fraction df of gold at a lattice location l acts on the
solver like an extra current df * J_unit(l), where J_unit is the Drude
current a unit fill would carry in the present field.  By reciprocity the
response of M to a current at (l, step n) is the field at l of an adjoint
run whose sources are the probe pair driven by the merit weights played
backward in time:

    dM/df(l) = dV * sum_n J_unit^{n+1/2}(l) * E_adj^{N-n}(l).

That is the adjoint field "running backward in time": the adjoint source
waveform is reversed, the run is an ordinary forward simulation, and the
recorded adjoint samples are reversed before the time integral.  The
identity holds to round-off for the discrete solver, which is what the
finite-difference checks in the test suite measure.

``mode="kernel"`` instead drives the adjoint with K at the atom itself and
differentiates the time-integrated overlap E . E_adj along x on the band.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import levelset as ls
from .cp_kernel import ConvolutionKernel, build_kernel, build_source_waveform, merit_weights
from .materials import AtomModel, DrudeParameters
from .sim import Grid, GridBand, Media, PointSource, ProbePosition, ProbeRecord, SimulationConfig, VolumeRecord
from .sim import create_simulation

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdjointSource:
    """Sources of the adjoint run; ``reversed`` marks time-reversed waveforms."""

    sources: tuple
    reversed: bool = True

    @property
    def n_steps(self) -> int:
        return max(len(s.waveform) for s in self.sources)


@dataclass
class OverlapField:
    """Sensitivity d(merit)/d(fill) per E component on the band (zero elsewhere)."""

    band: GridBand
    values: tuple  # one array per component, aligned with band.indices
    mode: str
    meta: dict = field(default_factory=dict)

    def dense(self, grid: Grid) -> tuple:
        out = []
        for c, (ix, v) in enumerate(zip(self.band.indices, self.values)):
            a = np.zeros(int(np.prod(grid.e_shape(c))))
            a[ix] = v
            out.append(a.reshape(grid.e_shape(c)))
        return tuple(out)


class CPProblem:
    """Atom + design region + kernel; caches the vacuum reference run."""

    def __init__(self, config: SimulationConfig, drude: DrudeParameters, atom: AtomModel | None = None,
                 x_atom: float = 0.0, gamma: float = 2.5, J0: float = 1.0, stride: int = 2,
                 band_width: float = 3.0, t_min: float = 0.2, linewidth_floor: float | None = None,
                 damping_decades: float = 6.0):
        self.config = config
        self.grid = Grid(config)
        self.drude = drude
        self.atom = atom or AtomModel()
        self.gamma, self.J0 = gamma, J0
        self.stride = int(stride)
        self.band_width = band_width
        self.damping_decades = float(damping_decades)
        dx = config.dx
        # atom on an Ex lattice node on the symmetry axis
        idx = self.grid.snap_e(0, (x_atom,) + (0.0,) * (config.dimensionality - 1))
        self.r_atom = self.grid.e_position(0, idx)
        self.probe_plus = (self.r_atom[0] + dx,) + tuple(self.r_atom[1:])
        self.probe_minus = (self.r_atom[0] - dx,) + tuple(self.r_atom[1:])
        for p in (self.r_atom, self.probe_plus, self.probe_minus):
            if not self.grid.inside_interior(p, margin=dx):
                raise ValueError(f"atom probe {p} too close to the PML")
        if config.axial and abs(self.r_atom[1]) > 1e-12:
            raise ValueError("with axial symmetry the atom must sit on the axis")
        self.waveform = build_source_waveform(gamma, J0, config.dt, config.n_steps)
        self.kernel: ConvolutionKernel = build_kernel(self.atom, self.waveform, t_min=t_min,
                                                      linewidth_floor=linewidth_floor)
        self.weights = merit_weights(self.kernel, 2 * dx)
        self._vacuum: ProbeRecord | None = None
        self.n_simulations = 0

    # ------------------------------------------------------------ plumbing
    @property
    def probes(self):
        return [ProbePosition(self.probe_minus, 0), ProbePosition(self.probe_plus, 0),
                ProbePosition(self.r_atom, 0)]

    @property
    def source(self) -> PointSource:
        o = (1.0,) + (0.0,) * (self.config.dimensionality - 1)
        return PointSource(self.r_atom, o, self.waveform.injection)

    def media(self, geometry: ls.LevelSetField) -> Media:
        return Media(drude=self.drude, fill=ls.interior_mask(geometry), damping_decades=self.damping_decades)

    def _run(self, media, sources, probes=(), band=None, steps=None):
        self.n_simulations += 1
        return create_simulation(self.config, media).run(sources, probes, band=band, record_steps=steps,
                                                          stride=self.stride)

    def vacuum(self) -> ProbeRecord:
        if self._vacuum is None:
            self._vacuum, _ = self._run(Media(drude=self.drude), self.source, self.probes)
        return self._vacuum

    def band(self, geometry: ls.LevelSetField) -> GridBand:
        """E locations within ``band_width`` cells of the zero contour, outside the PML."""
        idx = []
        lo_hi = self.grid.interior_bounds()
        for c in range(self.grid.ndim):
            pc = ls.component_phi(geometry, c)
            m = np.abs(pc) <= self.band_width * self.config.dx
            for a, (lo, hi) in enumerate(lo_hi):
                x = self.grid.e_coords(c, a)
                shape = [1] * self.grid.ndim
                shape[a] = -1
                m &= ((x >= lo) & (x <= hi)).reshape(shape)
            idx.append(np.flatnonzero(m))
        return GridBand(tuple(idx), int(self.band_width))

    def band_volumes(self, band: GridBand) -> tuple:
        """Cell volume at every band location, per component."""
        return tuple(np.broadcast_to(self.grid.cell_volume(c), self.grid.e_shape(c)).reshape(-1)[ix]
                     for c, ix in enumerate(band.indices))

    def forward_steps(self) -> np.ndarray:
        N = self.config.n_steps
        return np.arange(1, N, self.stride)

    # ------------------------------------------------------------ merit
    def evaluate(self, geometry: ls.LevelSetField, band: GridBand | None = None):
        """Forward run.  Returns (merit, potential, scattered ProbeRecord, VolumeRecord | None)."""
        steps = self.forward_steps() if band is not None else None
        tot, vol = self._run(self.media(geometry), self.source, self.probes, band, steps)
        vac = self.vacuum()
        e1 = ProbeRecord(tot.positions, tot.components, tot.data - vac.data, tot.dt, tot.signature,
                         {**tot.meta, "scattered": True})
        d = e1.data
        merit = float(np.dot(self.weights, d[1] - d[0]))
        U = -float(np.dot(self.kernel.values, d[2]) * self.config.dt)
        return merit, U, e1, vol

    def merit(self, geometry: ls.LevelSetField) -> float:
        return self.evaluate(geometry)[0]

    # ------------------------------------------------------------ adjoint
    def adjoint_source(self, mode: str = "exact", reverse: bool = True) -> AdjointSource:
        o = (1.0,) + (0.0,) * (self.config.dimensionality - 1)
        neg = tuple(-x for x in o)
        if mode == "exact":
            w = self.weights[::-1] if reverse else self.weights
            return AdjointSource((PointSource(self.probe_plus, o, w.copy()),
                                  PointSource(self.probe_minus, neg, w.copy())), reverse)
        if mode == "kernel":
            k = self.kernel.values * self.config.dt
            w = k[::-1] if reverse else k
            return AdjointSource((PointSource(self.r_atom, o, w.copy()),), reverse)
        raise ValueError(f"unknown adjoint mode {mode!r}")


# ---------------------------------------------------------------- operations

def run_forward(problem: CPProblem, geometry: ls.LevelSetField, band: GridBand):
    """Forward run recording the band; returns (VolumeRecord, merit)."""
    if geometry.phi.shape != problem.config.node_shape:
        raise ValueError("geometry does not match the grid")
    merit, U, e1, vol = problem.evaluate(geometry, band)
    vol.meta.update(merit=merit, U=U)
    return vol, merit


def run_adjoint(problem: CPProblem, geometry: ls.LevelSetField, band: GridBand, mode: str = "exact",
                reverse: bool = True) -> VolumeRecord:
    """Adjoint run in the current geometry, recorded so that sample i pairs with forward sample i.

    The forward record holds steps n = 1, 1 + s, ...; the adjoint needs
    E_adj^{N - n}, so it records steps N - n and the arrays are then
    reversed into forward order.
    """
    src = problem.adjoint_source(mode, reverse)
    N = problem.config.n_steps
    fsteps = problem.forward_steps()
    asteps = np.sort(N - fsteps)
    _, vol = problem._run(problem.media(geometry), list(src.sources), (), band, asteps)
    vol.meta.update(mode=mode, reverse_source=reverse)
    out = vol.time_reversed()
    out.current = None
    return out


def overlap_velocity(fwd: VolumeRecord, adj: VolumeRecord, dt: float | None = None, *, mode: str = "exact",
                     grid: Grid | None = None, dv: float | None = None) -> OverlapField:
    """Time-integrated overlap of forward and adjoint band records.

    exact: s = dV * stride * sum J_unit . E_adj per component location.
    kernel: o = stride * dt * sum E . E_adj, then a central difference along x
    between band neighbours (requires ``grid``).
    ``dv`` is a scalar or one array of cell volumes per component.
    """
    if not fwd.band.same_as(adj.band):
        raise ValueError("forward and adjoint records use different bands")
    if fwd.n_samples != adj.n_samples or fwd.stride != adj.stride:
        raise ValueError("forward and adjoint records use different time sampling")
    if fwd.band.size == 0:
        return OverlapField(fwd.band, tuple(np.zeros(0) for _ in fwd.band.indices), mode)
    dt = dt if dt is not None else fwd.dt
    dvs = dv if isinstance(dv, tuple) else (1.0 if dv is None else dv,) * len(fwd.E)
    if mode == "exact":
        if fwd.current is None:
            raise ValueError("exact overlap needs the forward unit-fill current")
        vals = tuple(v * fwd.stride * np.einsum("ij,ij->j", J, A) for v, J, A in zip(dvs, fwd.current, adj.E))
        return OverlapField(fwd.band, vals, mode)
    if mode == "kernel":
        if grid is None:
            raise ValueError("kernel-mode overlap needs the grid for the x derivative")
        vals = []
        for c, (E, A, ix) in enumerate(zip(fwd.E, adj.E, fwd.band.indices)):
            o = fwd.stride * dt * np.einsum("ij,ij->j", E, A)
            shape = grid.e_shape(c)
            dense = np.full(int(np.prod(shape)), np.nan)
            dense[ix] = o
            dense = dense.reshape(shape)
            d = np.zeros_like(dense)
            d[1:-1] = (dense[2:] - dense[:-2]) / (2 * grid.dx)
            d = np.nan_to_num(d.reshape(-1)[ix], nan=0.0)
            vals.append(dvs[c] * d)
        return OverlapField(fwd.band, tuple(vals), mode)
    raise ValueError(f"unknown overlap mode {mode!r}")


def node_velocity(problem: CPProblem, geometry: ls.LevelSetField, overlap: OverlapField):
    """Map the band sensitivity to level-set nodes.

    exact: v = d(merit)/d(Phi), so advecting with v (outward positive)
    changes the merit by -dtau * sum v^2 to first order.
    kernel: v = -o mapped the same way (sign fixed so that the first step from
    the default disk lowers the merit).
    Returns (node values, node mask of where they are defined).
    """
    dense = overlap.dense(problem.grid)
    if overlap.mode == "kernel":
        dense = tuple(-d for d in dense)
    g = ls.fill_gradient_to_nodes(geometry, dense)
    mask = g != 0.0
    return g, mask


def sensitivity(problem: CPProblem, geometry: ls.LevelSetField, mode: str = "exact", reverse: bool = True):
    """Forward + adjoint + overlap.  Returns (merit, OverlapField, node gradient, node mask)."""
    band = problem.band(geometry)
    fwd, merit = run_forward(problem, geometry, band)
    adj = run_adjoint(problem, geometry, band, mode, reverse)
    ov = overlap_velocity(fwd, adj, problem.config.dt, mode=mode, grid=problem.grid,
                          dv=problem.band_volumes(band))
    g, mask = node_velocity(problem, geometry, ov)
    ov.meta.update(merit=merit, U=fwd.meta.get("U"))
    return merit, ov, g, mask
