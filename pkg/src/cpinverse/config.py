"""Run configuration: a sectioned key = value file with a strict schema.

Every key has a type, a default and a unit comment.  Unknown sections or
keys are rejected so that a typo cannot silently fall back to a default.
``serialize`` writes every key, so parse -> serialize -> parse is the
identity.  The config hash ignores keys that do not change the physics or
the optimizer trajectory (iteration budget, output location, lean mode).
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .materials import AtomModel, DrudeParameters, gold_preset
from .sim import SimulationConfig


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _domain(text: str):
    v = _floats(text)
    return v[0] if len(v) == 1 else v


def _opt_float(text: str):
    return None if text.strip().lower() in ("none", "") else float(text)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


_ATOM = AtomModel()

# section -> key -> (parser, default, comment)
SCHEMA = {
    "simulation": {
        "dimensionality": (int, 3, "2 or 3"),
        "symmetry": (str, "none", "none | axial (2D meridian plane of a body of revolution about x)"),
        "domain": (_domain, 8.0, "interior side length(s), L0"),
        "resolution": (int, 10, "cells per L0"),
        "pml": (float, 1.0, "PML depth, L0"),
        "courant": (float, 0.5, "dt / dx"),
        "t_total": (float, 60.0, "simulated time, L0/c"),
        "boundary": (str, "pml", "pml | pec"),
        "pml_order": (float, 3.0, "polynomial grading order"),
        "pml_kappa_max": (float, 1.0, "CPML kappa at the outer edge"),
        "pml_alpha_max": (float, 0.05, "CPML alpha at the inner edge, c/L0"),
        "l0_nm": (float, 100.0, "length unit L0, nm"),
    },
    "atom": {
        "x": (float, -0.55, "atom position on the x axis, L0 (snapped to an Ex node)"),
        "alpha0": (float, 1.0, "static polarizability scale, arbitrary"),
        "omega_a": (float, _ATOM.omega_a, "resonance, c/L0"),
        "gamma_a": (float, _ATOM.gamma_a, "linewidth, c/L0"),
    },
    "kernel": {
        "source_gamma": (float, 2.5, "source cut-off rate, c/L0"),
        "J0": (float, 1.0, "source amplitude"),
        "t_min": (float, 0.2, "kernel zeroed below this time, L0/c"),
        "linewidth_floor": (_opt_float, None, "optional broadening of the atom line, c/L0"),
    },
    "material": {
        "preset": (str, "gold", "gold | gold-jc"),
        "eps_inf": (_opt_float, None, "override, dimensionless"),
        "omega_p": (_opt_float, None, "override, c/L0"),
        "gamma_p": (_opt_float, None, "override, c/L0"),
        "damping_decades": (float, 6.0, "extra collision-rate decades of an empty cell"),
    },
    "shape": {
        "kind": (str, "cylinder", "cylinder | file | none"),
        "radius": (float, 1.5, "cylinder radius, L0"),
        "height": (float, 0.4, "cylinder height along x, L0"),
        "x0": (float, 1.1, "atom to cylinder-centre distance along x, L0"),
        "file": (str, "", "level-set .bin file when kind = file"),
    },
    "optimizer": {
        "max_iterations": (int, 20, "iteration budget"),
        "plateau_tol": (float, 0.02, "relative merit change counted as a plateau"),
        "plateau_window": (int, 3, "iterations in the plateau test"),
        "require_negative": (_bool, True, "converged only with a negative merit"),
        "step_cells": (float, 1.0, "largest boundary move per iteration, cells"),
        "substeps": (int, 2, "advection substeps per iteration"),
        "max_backtracks": (int, 3, "step halvings before a stall"),
        "backtrack_tol": (float, 0.0, "accepted merit rise relative to |merit|"),
        "mode": (str, "exact", "exact | kernel velocity"),
        "clearance_cells": (float, 2.0, "material kept this far from atom and probes, cells"),
        "front_gap": (float, 0.2, "material stays at x >= atom + front_gap, L0"),
        "collar_cells": (float, 2.0, "contour kept this far inside the non-PML region, cells"),
        "stride": (int, 2, "time decimation of the band records"),
        "band_width": (float, 3.0, "band half-width around the contour, cells"),
    },
    "output": {
        "directory": (str, "run", "output directory (relative to the output root)"),
        "lean": (_bool, False, "keep only merit history and final geometry"),
    },
}

# keys that leave the physics and the optimizer trajectory untouched
HASH_EXCLUDED = {("optimizer", "max_iterations"), ("output", "directory"), ("output", "lean")}


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        full = {s: {k: spec[1] for k, spec in keys.items()} for s, keys in SCHEMA.items()}
        for s, kv in self.values.items():
            if s not in SCHEMA:
                raise ValueError(f"unknown section [{s}]")
            for k, v in kv.items():
                if k not in SCHEMA[s]:
                    raise ValueError(f"unknown key {k!r} in [{s}]")
                full[s][k] = v
        self.values = full
        self.validate()

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    def replace(self, **sections) -> "RunConfig":
        vals = {s: dict(kv) for s, kv in self.values.items()}
        for s, kv in sections.items():
            vals.setdefault(s, {}).update(kv)
        return RunConfig(vals)

    # ------------------------------------------------------------ checks
    def validate(self):
        self.simulation_config()  # raises on invalid solver settings
        k, m, sh, o = (self.values[s] for s in ("kernel", "material", "shape", "optimizer"))
        positive = [("atom", "alpha0"), ("atom", "omega_a"), ("atom", "gamma_a"), ("kernel", "source_gamma"),
                    ("kernel", "J0"), ("shape", "radius"), ("shape", "height"), ("optimizer", "step_cells"),
                    ("optimizer", "band_width")]
        for s, key in positive:
            if not self.values[s][key] > 0:
                raise ValueError(f"[{s}] {key} must be positive")
        if k["t_min"] < 0 or m["damping_decades"] < 0:
            raise ValueError("t_min and damping_decades must be non-negative")
        if sh["kind"] not in ("cylinder", "file", "none"):
            raise ValueError(f"unknown shape kind {sh['kind']!r}")
        if sh["kind"] == "file" and not sh["file"]:
            raise ValueError("shape kind 'file' needs [shape] file")
        if o["stride"] < 1 or o["max_iterations"] < 1:
            raise ValueError("stride and max_iterations must be >= 1")
        self.drude()
        self.optimizer_settings()

    # ------------------------------------------------------------ builders
    def simulation_config(self) -> SimulationConfig:
        return SimulationConfig(**self.values["simulation"])

    def atom_model(self) -> AtomModel:
        a = self.values["atom"]
        d = self.values["simulation"]["dimensionality"]
        return AtomModel(a["alpha0"], a["omega_a"], a["gamma_a"], (1.0,) + (0.0,) * (d - 1))

    def drude(self) -> DrudeParameters:
        m = self.values["material"]
        override = {k: m[k] for k in ("eps_inf", "omega_p", "gamma_p") if m[k] is not None}
        return gold_preset(m["preset"], self.values["simulation"]["l0_nm"], **override)

    def optimizer_settings(self):
        from .optimizer import OptimizerSettings, StoppingRule

        o = self.values["optimizer"]
        rule = StoppingRule(o["max_iterations"], o["plateau_tol"], o["plateau_window"], o["require_negative"])
        return OptimizerSettings(rule, o["step_cells"], o["substeps"], o["max_backtracks"], o["backtrack_tol"],
                                 o["mode"], o["clearance_cells"], o["front_gap"], o["collar_cells"])

    def problem(self):
        from .adjoint import CPProblem

        k, o = self.values["kernel"], self.values["optimizer"]
        return CPProblem(self.simulation_config(), self.drude(), self.atom_model(), x_atom=self.values["atom"]["x"],
                         gamma=k["source_gamma"], J0=k["J0"], stride=o["stride"], band_width=o["band_width"],
                         t_min=k["t_min"], linewidth_floor=k["linewidth_floor"],
                         damping_decades=self.values["material"]["damping_decades"])

    def initial_geometry(self, problem, base: Path | None = None):
        from . import io, levelset as ls

        sh = self.values["shape"]
        if sh["kind"] == "none":
            return ls.empty_field(problem.grid)
        if sh["kind"] == "file":
            path = Path(sh["file"])
            if base is not None and not path.is_absolute():
                path = Path(base) / path
            field_, _ = io.read_geometry(path)
            if field_.phi.shape != problem.config.node_shape:
                raise ValueError(f"level-set file {path} does not match the grid")
            return field_
        center = (problem.r_atom[0] + sh["x0"],) + (0.0,) * (problem.grid.ndim - 1)
        return ls.init_cylinder(problem.grid, sh["radius"], sh["height"], center)

    # ------------------------------------------------------------ text form
    def serialize(self) -> str:
        out = ["# cpinverse run configuration; units: c = 1, lengths in L0, times in L0/c", ""]
        for s, keys in SCHEMA.items():
            out.append(f"[{s}]")
            for k, (_, _, comment) in keys.items():
                out.append(f"# {comment}")
                out.append(f"{k} = {_fmt(self.values[s][k])}")
            out.append("")
        return "\n".join(out)

    def hash(self) -> str:
        canon = {s: {k: _fmt(v) for k, v in kv.items() if (s, k) not in HASH_EXCLUDED}
                 for s, kv in self.values.items()}
        return hashlib.sha256(json.dumps(canon, sort_keys=True).encode()).hexdigest()[:16]


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=None, strict=True)
    cp.optionxform = str  # keys are case sensitive (J0)
    cp.read_string(text)
    values = {}
    for s in cp.sections():
        if s not in SCHEMA:
            raise ValueError(f"unknown section [{s}]")
        values[s] = {}
        for k, raw in cp.items(s):
            if k not in SCHEMA[s]:
                raise ValueError(f"unknown key {k!r} in [{s}]")
            parser = SCHEMA[s][k][0]
            try:
                values[s][k] = parser(raw)
            except ValueError as exc:
                raise ValueError(f"[{s}] {k}: {exc}") from None
    return RunConfig(values)


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())


def save_config(path, cfg: RunConfig):
    from .io import _atomic_text

    _atomic_text(path, cfg.serialize())
