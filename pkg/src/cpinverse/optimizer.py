"""Discovery loop: forward -> adjoint -> velocity -> advection -> merit."""

from __future__ import annotations

import json
import logging
import struct
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import levelset as ls
from .adjoint import CPProblem, node_velocity, overlap_velocity, run_adjoint

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"CPINVCK\x00"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class StoppingRule:
    max_iterations: int = 25
    plateau_tol: float = 0.02  # relative merit change counted as "no change"
    plateau_window: int = 3
    require_negative: bool = True
    noise_floor: float = 1e-6  # |merit| below this fraction of max |merit| counts as zero

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.plateau_window < 1 or self.plateau_tol < 0:
            raise ValueError("invalid plateau settings")


@dataclass(frozen=True)
class OptimizerSettings:
    stopping: StoppingRule = field(default_factory=StoppingRule)
    step_cells: float = 1.0  # trust region: largest boundary displacement per iteration
    substeps: int = 2
    max_backtracks: int = 3
    backtrack_tol: float = 0.0  # accepted rise of the merit, relative to |merit|
    mode: str = "exact"
    clearance_cells: float = 2.0  # no material within this distance of the atom probes
    front_gap: float = 0.2  # L0; material stays at x >= x_atom + front_gap
    collar_cells: float = 2.0  # contour kept this far inside the non-PML region

    def __post_init__(self):
        if self.step_cells < 0 or self.substeps < 1 or self.max_backtracks < 0:
            raise ValueError("invalid step settings")
        if self.step_cells / self.substeps > 0.5 + 1e-12:
            raise ValueError("each substep must move the boundary by at most half a cell")
        if self.mode not in ("exact", "kernel"):
            raise ValueError(f"unknown velocity mode {self.mode!r}")


@dataclass
class OptimizationState:
    iteration: int
    geometry: ls.LevelSetField
    merits: list
    potentials: list
    accepted: list
    backtracks: list
    hashes: list
    topology: list
    status: str = "running"
    deterministic: bool = True  # no random numbers anywhere in the loop

    @property
    def normalized(self) -> np.ndarray:
        m = np.asarray(self.merits, float)
        top = np.max(np.abs(m)) if len(m) else 0.0
        return m / top if top > 0 else m

    def history(self) -> dict:
        return dict(iteration=self.iteration, merits=list(map(float, self.merits)),
                    potentials=list(map(float, self.potentials)), accepted=list(self.accepted),
                    backtracks=list(self.backtracks), hashes=list(self.hashes),
                    topology=[list(t) for t in self.topology], status=self.status)


# ---------------------------------------------------------------- constraints

def constraint_floor(problem: CPProblem, geometry: ls.LevelSetField, s: OptimizerSettings) -> np.ndarray:
    dx = problem.config.dx
    r = s.clearance_cells * dx
    floor = np.full(geometry.phi.shape, -np.inf)
    for p in (problem.r_atom, problem.probe_plus, problem.probe_minus):
        floor = np.maximum(floor, ls.ball_floor(geometry, p, r))
    if s.front_gap is not None:
        floor = np.maximum(floor, ls.halfspace_floor(geometry, 0, problem.r_atom[0] + s.front_gap))
    bounds = problem.grid.interior_bounds()
    m = s.collar_cells * dx
    floor = np.maximum(floor, ls.collar_floor(geometry, [b[0] + m for b in bounds], [b[1] - m for b in bounds]))
    return floor


def check_geometry(problem: CPProblem, geometry: ls.LevelSetField, s: OptimizerSettings):
    if geometry.phi.shape != problem.config.node_shape:
        raise ValueError("geometry does not match the simulation grid")
    floor = constraint_floor(problem, geometry, s)
    bad = (geometry.phi < 0) & (floor > 0)
    if bad.any():
        raise ValueError(f"initial geometry violates the atom clearance / design region ({int(bad.sum())} nodes)")


def _topo(problem, geometry):
    t = ls.topology_stats(geometry, axis=0, axis_point=problem.r_atom)
    return (t.components, t.holes, int(t.axis_clear))


# ---------------------------------------------------------------- loop

class Optimizer:
    """Runs the loop for one problem; the state is checkpointable after every iteration."""

    def __init__(self, problem: CPProblem, settings: OptimizerSettings | None = None, config_hash: str = "",
                 output=None, lean: bool = False):
        self.problem = problem
        self.settings = settings or OptimizerSettings()
        self.config_hash = config_hash
        self.output = Path(output) if output is not None else None
        self.lean = lean
        self._fwd = None  # (geometry digest, forward band record)

    # -- state
    def initial_state(self, geometry: ls.LevelSetField) -> OptimizationState:
        check_geometry(self.problem, geometry, self.settings)
        band = self.problem.band(geometry)
        merit, U, _, vol = self.problem.evaluate(geometry, band)
        self._fwd = (geometry.digest(), band, vol)
        st = OptimizationState(0, geometry, [merit], [U], [True], [0], [geometry.digest()],
                               [_topo(self.problem, geometry)])
        log.info("iteration 0: merit %.6e", merit)
        return st

    def _forward(self, geometry):
        if self._fwd is not None and self._fwd[0] == geometry.digest():
            return self._fwd[1], self._fwd[2]
        band = self.problem.band(geometry)
        _, _, _, vol = self.problem.evaluate(geometry, band)
        self._fwd = (geometry.digest(), band, vol)
        return band, vol

    def velocity(self, geometry: ls.LevelSetField) -> np.ndarray:
        band, fwd = self._forward(geometry)
        if band.size == 0 or not (geometry.phi < 0).any():
            return np.zeros_like(geometry.phi)
        adj = run_adjoint(self.problem, geometry, band, self.settings.mode)
        ov = overlap_velocity(fwd, adj, self.problem.config.dt, mode=self.settings.mode, grid=self.problem.grid,
                              dv=self.problem.band_volumes(band))
        g, mask = node_velocity(self.problem, geometry, ov)
        if not mask.any():
            return np.zeros_like(geometry.phi)
        return ls.extend_velocity(geometry, g, mask)

    def propose(self, geometry: ls.LevelSetField, v: np.ndarray, scale: float) -> ls.LevelSetField:
        s = self.settings
        vmax = float(np.max(np.abs(v)))
        if vmax == 0.0 or scale == 0.0 or s.step_cells == 0.0:
            return geometry.copy()
        dtau = s.step_cells * scale * self.problem.config.dx / vmax / s.substeps
        g = geometry
        for _ in range(s.substeps):
            g = ls.advect(g, v, dtau)
        floor = constraint_floor(self.problem, g, s)
        g = ls.clamp(g, floor)
        res = ls.reinitialize(g)
        return ls.clamp(res.field, floor)

    def iterate(self, state: OptimizationState) -> OptimizationState:
        s = self.settings
        g0 = state.geometry
        m0 = state.merits[-1]
        v = self.velocity(g0)
        scale = 1.0
        tries = 0
        while True:
            cand = self.propose(g0, v, scale)
            band = self.problem.band(cand)
            merit, U, _, vol = self.problem.evaluate(cand, band)
            ok = merit <= m0 + s.backtrack_tol * abs(m0) or not np.any(v)
            log.info("iteration %d try %d: merit %.6e (%s)", state.iteration + 1, tries, merit,
                     "accept" if ok else "reject")
            if ok:
                self._fwd = (cand.digest(), band, vol)
                break
            tries += 1
            if tries > s.max_backtracks:
                state.status = "stalled"
                return state
            scale *= 0.5
        state.iteration += 1
        state.geometry = cand
        state.merits.append(merit)
        state.potentials.append(U)
        state.accepted.append(tries == 0)
        state.backtracks.append(tries)
        state.hashes.append(cand.digest())
        state.topology.append(_topo(self.problem, cand))
        return state

    def stop_reason(self, state: OptimizationState) -> str | None:
        rule = self.settings.stopping
        if state.status == "stalled":
            return "stalled"
        m = np.asarray(state.merits, float)
        if state.iteration > 0 and not (state.geometry.phi < 0).any():
            return "vanished"  # every boundary retreated; only noise is left
        negative = m[-1] < -rule.noise_floor * np.max(np.abs(m))
        w = rule.plateau_window
        if len(m) > w:
            recent = m[-(w + 1):]
            rel = np.abs(np.diff(recent)) / np.maximum(np.abs(recent[1:]), 1e-300)
            if np.all(rel < rule.plateau_tol):
                if negative or not rule.require_negative:
                    return "converged"
                return "stalled"
        if state.iteration >= rule.max_iterations:
            return "budget"
        return None

    def run(self, geometry: ls.LevelSetField | None = None, state: OptimizationState | None = None):
        if state is None:
            state = self.initial_state(geometry)
            self._save(state)
        state.status = "running"
        while True:
            reason = self.stop_reason(state)
            if reason:
                state.status = reason
                break
            state = self.iterate(state)
            self._save(state)
        self._save(state, final=True)
        return state

    # -- artifacts
    def _save(self, state: OptimizationState, final: bool = False):
        if self.output is None:
            return
        from . import io

        out = self.output
        out.mkdir(parents=True, exist_ok=True)
        save_checkpoint(out / "checkpoint.ckpt", state, self.config_hash)
        io.write_merit_history(out / "merit_history.csv", state.merits, state.accepted, self.config_hash)
        if not self.lean:
            io.write_geometry(out / f"geometry_{state.iteration:04d}.bin", state.geometry, self.config_hash,
                              iteration=state.iteration, merit=state.merits[-1])
        if final:
            io.write_geometry(out / "geometry_final.bin", state.geometry, self.config_hash,
                              iteration=state.iteration, merit=state.merits[-1])
            if (state.geometry.phi < 0).any():
                io.export_geometry(state.geometry, out / "geometry_final.obj", self.config_hash)
            summary = dict(state.history(), config_hash=self.config_hash, final_merit=float(state.merits[-1]),
                           final_normalized_merit=float(state.normalized[-1]),
                           simulations=self.problem.n_simulations)
            io._atomic_text(out / "summary.json", json.dumps(summary, indent=2) + "\n")
            if self.lean:
                (out / "checkpoint.ckpt").unlink(missing_ok=True)


# ---------------------------------------------------------------- checkpoints

def save_checkpoint(path, state: OptimizationState, config_hash: str):
    """Binary container: magic, version, header length, JSON header, Phi payload, CRC32."""
    from .io import _atomic_write

    g = state.geometry
    header = dict(config_hash=config_hash, shape=list(g.phi.shape), dtype="<f8", dx=g.dx,
                  origin=list(g.origin), tau=g.tau, age=g.age, **state.history())
    hb = json.dumps(header, sort_keys=True).encode()
    body = CHECKPOINT_MAGIC + struct.pack("<II", CHECKPOINT_VERSION, len(hb)) + hb
    body += np.ascontiguousarray(g.phi, dtype="<f8").tobytes()
    body += struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)
    _atomic_write(Path(path), body)


def read_checkpoint_header(path) -> dict:
    raw = Path(path).read_bytes()
    if raw[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (bad magic)")
    version, n = struct.unpack("<II", raw[8:16])
    return dict(json.loads(raw[16:16 + n]), version=version)


def load_checkpoint(path, config_hash: str | None = None) -> OptimizationState:
    raw = Path(path).read_bytes()
    if len(raw) < 20 or raw[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (bad magic)")
    (crc,) = struct.unpack("<I", raw[-4:])
    if zlib.crc32(raw[:-4]) & 0xFFFFFFFF != crc:
        raise ValueError(f"{path}: checksum mismatch, file is corrupted or truncated")
    version, n = struct.unpack("<II", raw[8:16])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: checkpoint version {version}, expected {CHECKPOINT_VERSION}")
    h = json.loads(raw[16:16 + n])
    if config_hash is not None and h["config_hash"] != config_hash:
        raise ValueError(f"{path}: checkpoint belongs to config {h['config_hash']}, not {config_hash}")
    phi = np.frombuffer(raw[16 + n:-4], dtype="<f8")
    shape = tuple(h["shape"])
    if phi.size != int(np.prod(shape)):
        raise ValueError(f"{path}: payload size does not match shape {shape}")
    geom = ls.LevelSetField(phi.reshape(shape).copy(), h["dx"], tuple(h["origin"]), h["tau"], h["age"])
    return OptimizationState(h["iteration"], geom, h["merits"], h["potentials"], h["accepted"],
                             h["backtracks"], h["hashes"], [tuple(t) for t in h["topology"]], h["status"])


def resume(path, optimizer: Optimizer) -> OptimizationState:
    """Continue a checkpointed run to its stopping rule."""
    state = load_checkpoint(path, optimizer.config_hash)
    if state.geometry.phi.shape != optimizer.problem.config.node_shape:
        raise ValueError("checkpoint grid does not match the configured resolution")
    return optimizer.run(state=state)


def settings_dict(s: OptimizerSettings) -> dict:
    return asdict(s)
