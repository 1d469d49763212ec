"""Sources, probes and recorded data."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class PointSource:
    """Point current (dipole moment rate) with an arbitrary per-step waveform.

    ``waveform[n]`` is the current moment injected during the update from
    step n to n + 1, i.e. at t = (n + 1/2) dt.
    """

    position: tuple
    orientation: tuple
    waveform: np.ndarray

    def key(self) -> str:
        h = hashlib.sha256()
        h.update(np.asarray(self.position, float).tobytes())
        h.update(np.asarray(self.orientation, float).tobytes())
        h.update(np.ascontiguousarray(self.waveform, dtype=float).tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class ProbePosition:
    position: tuple
    component: int = 0


@dataclass
class ProbeRecord:
    """E-field time series at probe points, sampled at t_n = n dt, n = 1..N."""

    positions: list
    components: list
    data: np.ndarray  # (n_probes, n_steps)
    dt: float
    signature: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.arange(1, self.data.shape[1] + 1) * self.dt

    def series(self, i: int = 0) -> np.ndarray:
        return self.data[i]


@dataclass
class GridBand:
    """Set of E-component lattice locations, stored as flat indices per component."""

    indices: tuple  # one int array per component
    width: int = 3

    @property
    def size(self) -> int:
        return int(sum(len(ix) for ix in self.indices))

    def same_as(self, other: "GridBand") -> bool:
        return len(self.indices) == len(other.indices) and all(
            np.array_equal(a, b) for a, b in zip(self.indices, other.indices)
        )

    @classmethod
    def empty(cls, ndim: int) -> "GridBand":
        return cls(tuple(np.zeros(0, dtype=np.int64) for _ in range(ndim)), 0)


@dataclass
class VolumeRecord:
    """Band samples at selected steps.

    ``E[c]`` has shape (n_samples, n_points_c) and holds E^n before the update
    of step n.  ``current[c]`` (when present) holds the unit-fill Drude
    polarisation current J^{n+1/2} driven by the local field: the current a
    unit of added metal would carry (plus the bound polarisation current
    (eps_inf - 1) dE/dt when eps_inf differs from 1).
    """

    band: GridBand
    steps: np.ndarray
    stride: int
    dt: float
    E: tuple
    current: tuple | None = None
    reversed: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return len(self.steps)

    def count(self) -> int:
        return int(sum(a.size for a in self.E))

    def time_reversed(self) -> "VolumeRecord":
        rev = lambda arrs: None if arrs is None else tuple(a[::-1].copy() for a in arrs)
        return VolumeRecord(
            band=self.band,
            steps=self.steps[::-1].copy(),
            stride=self.stride,
            dt=self.dt,
            E=rev(self.E),
            current=rev(self.current),
            reversed=not self.reversed,
            meta=dict(self.meta),
        )
