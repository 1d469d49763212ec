"""Simulation configuration and Yee-lattice geometry."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

UNITS = "c=1; length L0; time L0/c; angular frequency c/L0"

# Yee offsets (in cells) of each E component relative to the lattice nodes.
_E_OFFSETS = {
    2: ((0.5, 0.0), (0.0, 0.5)),
    3: ((0.5, 0.0, 0.0), (0.0, 0.5, 0.0), (0.0, 0.0, 0.5)),
}
COMPONENT_NAMES = ("x", "y", "z")


@dataclass(frozen=True)
class SimulationConfig:
    """Uniform Yee grid in a box centred on the origin.

    ``domain`` is the interior side length (or per-axis lengths) in L0;
    the PML collar of depth ``pml`` is added on every side.  With
    ``boundary="pec"`` the box is a closed conductor and no PML is used.

    ``symmetry="axial"`` (2D only) reads the plane as a meridian section of
    a body of revolution about the x axis: y is the signed radius, and the
    fields are the m = 0 (axis-symmetric) solution of the 3D problem.
    """

    dimensionality: int = 2
    domain: float | tuple = 8.0
    resolution: int = 10
    pml: float = 1.0
    courant: float = 0.5
    t_total: float = 60.0
    boundary: str = "pml"
    pml_order: float = 3.0
    pml_kappa_max: float = 1.0
    pml_alpha_max: float = 0.05
    l0_nm: float = 100.0
    symmetry: str = "none"
    units: str = field(default=UNITS, compare=False)

    def __post_init__(self):
        d = self.dimensionality
        if d not in (2, 3):
            raise ValueError("dimensionality must be 2 or 3")
        if isinstance(self.domain, (list, tuple)):
            if len(self.domain) != d:
                raise ValueError("domain tuple length must equal dimensionality")
            object.__setattr__(self, "domain", tuple(float(v) for v in self.domain))
        if self.resolution < 8:
            raise ValueError(f"resolution {self.resolution} < 8 cells per L0")
        if not (0 < self.courant <= 1 / math.sqrt(d) + 1e-12):
            raise ValueError(f"Courant factor {self.courant} outside (0, 1/sqrt({d})]")
        if self.boundary not in ("pml", "pec"):
            raise ValueError("boundary must be 'pml' or 'pec'")
        if self.boundary == "pml" and self.pml < 0.5:
            raise ValueError("PML depth must be >= 0.5 L0")
        if self.symmetry not in ("none", "axial"):
            raise ValueError("symmetry must be 'none' or 'axial'")
        if self.symmetry == "axial" and d != 2:
            raise ValueError("axial symmetry needs dimensionality 2")
        if self.t_total <= 0:
            raise ValueError("t_total must be positive")
        for ext in self.extent:
            cells = ext * self.resolution
            if abs(cells - round(cells)) > 1e-9 or cells < 2:
                raise ValueError("domain extent must be a positive whole number of cells")
        if self.symmetry == "axial" and self.interior_cells[1] % 2:
            raise ValueError("axial symmetry needs an even number of cells across the axis")

    @property
    def extent(self) -> tuple:
        if isinstance(self.domain, tuple):
            return self.domain
        return (float(self.domain),) * self.dimensionality

    @property
    def dx(self) -> float:
        return 1.0 / self.resolution

    @property
    def dt(self) -> float:
        return self.courant * self.dx

    @property
    def n_steps(self) -> int:
        return int(round(self.t_total / self.dt))

    @property
    def npml(self) -> int:
        return 0 if self.boundary == "pec" else int(round(self.pml * self.resolution))

    @property
    def interior_cells(self) -> tuple:
        return tuple(int(round(e * self.resolution)) for e in self.extent)

    @property
    def shape(self) -> tuple:
        """Cells per axis including the PML collar."""
        return tuple(n + 2 * self.npml for n in self.interior_cells)

    @property
    def node_shape(self) -> tuple:
        return tuple(n + 1 for n in self.shape)

    @property
    def axial(self) -> bool:
        return self.symmetry == "axial"

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("units")
        if out["symmetry"] == "none":
            out.pop("symmetry")  # keeps digests of plain runs unchanged
        if isinstance(out["domain"], tuple):
            out["domain"] = list(out["domain"])
        return out

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


class Grid:
    """Coordinate bookkeeping for nodes and staggered E components."""

    def __init__(self, config: SimulationConfig):
        self.config = config
        self.ndim = config.dimensionality
        self.dx = config.dx
        self.shape = config.shape
        self.npml = config.npml
        self.offsets = _E_OFFSETS[self.ndim]

    # lattice node i sits at x = (i - N/2) dx
    def node_coords(self, axis: int) -> np.ndarray:
        n = self.shape[axis]
        return (np.arange(n + 1) - n / 2) * self.dx

    def node_mesh(self) -> tuple:
        return np.meshgrid(*(self.node_coords(a) for a in range(self.ndim)), indexing="ij")

    def e_shape(self, comp: int) -> tuple:
        return tuple(n + (0 if self.offsets[comp][a] else 1) for a, n in enumerate(self.shape))

    def e_coords(self, comp: int, axis: int) -> np.ndarray:
        n = self.shape[axis]
        off = self.offsets[comp][axis]
        count = n if off else n + 1
        return (np.arange(count) + off - n / 2) * self.dx

    def e_mesh(self, comp: int) -> tuple:
        return np.meshgrid(*(self.e_coords(comp, a) for a in range(self.ndim)), indexing="ij")

    def cell_mesh(self) -> tuple:
        return np.meshgrid(
            *((np.arange(n) + 0.5 - n / 2) * self.dx for n in self.shape), indexing="ij"
        )

    def snap_e(self, comp: int, position) -> tuple:
        """Nearest lattice index of component ``comp`` to ``position``."""
        idx = []
        for a in range(self.ndim):
            x = (position[a] / self.dx) + self.shape[a] / 2 - self.offsets[comp][a]
            i = int(np.floor(x + 0.5))
            hi = self.e_shape(comp)[a] - 1
            if i < 0 or i > hi:
                raise ValueError(f"position {tuple(position)} outside the grid")
            idx.append(i)
        return tuple(idx)

    def e_position(self, comp: int, index) -> tuple:
        return tuple(
            (index[a] + self.offsets[comp][a] - self.shape[a] / 2) * self.dx for a in range(self.ndim)
        )

    def cell_volume(self, comp: int) -> np.ndarray:
        """Volume represented by each location of component ``comp`` (broadcastable).

        Cartesian: dx^d.  Axial: the half ring pi |y| dx^2 swept by a cell of
        the meridian plane (its mirror image carries the other half), and
        pi dx^3 / 4 for the disc of radius dx/2 at the axis.
        """
        dx = self.dx
        if not self.config.axial:
            return np.full((1,) * self.ndim, dx**self.ndim)
        y = np.abs(self.e_coords(comp, 1))
        v = np.where(y < 0.25 * dx, 0.25 * np.pi * dx**3, np.pi * y * dx**2)
        return v.reshape(1, -1)

    def interior_bounds(self) -> tuple:
        """(lo, hi) coordinates of the non-PML region per axis."""
        return tuple(
            (-(n / 2 - self.npml) * self.dx, (n / 2 - self.npml) * self.dx) for n in self.shape
        )

    def inside_interior(self, position, margin: float = 0.0) -> bool:
        return all(lo + margin <= p <= hi - margin for p, (lo, hi) in zip(position, self.interior_bounds()))

    def pml_depth_nodes(self) -> np.ndarray:
        """Distance (L0) of every lattice node into the PML collar (0 outside)."""
        depth = np.zeros(self.config.node_shape)
        for a, (lo, hi) in enumerate(self.interior_bounds()):
            x = self.node_coords(a)
            d = np.maximum(np.maximum(lo - x, x - hi), 0.0)
            shape = [1] * self.ndim
            shape[a] = -1
            depth = np.maximum(depth, d.reshape(shape))
        return depth
