"""Command line: ``cpinverse <subcommand>``.

Exit codes: 0 success, 2 validation failure (bad config, failed benchmark,
flagged positions, empty geometry), 3 numerical failure (the last good
checkpoint is on disk).  Relative output paths resolve against
``$CPINV_OUTPUT_ROOT`` (default: the working directory).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .config import RunConfig, load_config

log = logging.getLogger("cpinverse")

OUTPUT_ROOT_ENV = "CPINV_OUTPUT_ROOT"
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


class ValidationFailure(Exception):
    """Input or benchmark failure reported with exit code 2."""


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "."))


def resolve_output(path) -> Path:
    p = Path(path)
    return p if p.is_absolute() else output_root() / p


def set_threads(n: int | None):
    """Worker-thread cap for independent simulation jobs; each FDTD run is itself serial."""
    if n is None:
        return 1
    if n < 1:
        raise ValidationFailure("--threads must be >= 1")
    return n


def _load(path) -> RunConfig:
    try:
        return load_config(path) if path else RunConfig()
    except (ValueError, OSError) as exc:
        raise ValidationFailure(f"config: {exc}") from None


def write_run_config(directory: Path, cfg: RunConfig) -> Path:
    path = directory / "config.ini"
    io._atomic_text(path, f"# {io.HASH_KEY}={cfg.hash()}\n" + cfg.serialize() + "\n")
    return path


# ---------------------------------------------------------------- potential

def _parse_point(text: str, ndim: int) -> tuple:
    v = [float(x) for x in text.replace(",", " ").split()]
    if len(v) not in (ndim, 3):
        raise ValidationFailure(f"position {text!r} needs {ndim} or 3 coordinates")
    if len(v) == 3 and ndim == 2 and v[2] != 0:
        raise ValidationFailure(f"position {text!r}: z must be 0 in 2D")
    return tuple(v[:ndim])


def read_positions(path, ndim: int) -> list:
    pts = []
    for line in Path(path).read_text().splitlines():
        s = line.strip()
        if not s or s.startswith("#") or s[0].isalpha():
            continue
        pts.append(_parse_point(s, ndim))
    return pts


def line_positions(a, b, n: int) -> list:
    a, b = np.asarray(a, float), np.asarray(b, float)
    return [tuple(a + (b - a) * t) for t in np.linspace(0.0, 1.0, n)]


def position_flag(problem, geometry, position, clearance: float) -> str | None:
    """Reason a potential sample cannot be taken at ``position``, or None."""
    from scipy.interpolate import RegularGridInterpolator

    grid, dx = problem.grid, problem.config.dx
    if not grid.inside_interior(position, margin=dx):
        return "outside the non-PML region"
    if problem.config.axial and abs(position[1]) > 1e-12:
        return "off the symmetry axis"
    interp = RegularGridInterpolator([geometry.coords(a) for a in range(geometry.ndim)], geometry.phi)
    phi = float(interp([position])[0])
    if phi < 0:
        return "inside the structure"
    if phi < clearance:
        return "inside the clamp region next to the structure"
    return None


def potential_at(problem, geometry, position) -> float:
    """Scattered-field potential of an x-polarized atom at ``position``."""
    from .cp_kernel import cp_potential, scattered_series
    from .sim import Media, PointSource, ProbePosition, create_simulation

    cfg, grid = problem.config, problem.grid
    r = grid.e_position(0, grid.snap_e(0, position))
    o = (1.0,) + (0.0,) * (cfg.dimensionality - 1)
    src = PointSource(r, o, problem.waveform.injection)
    probe = [ProbePosition(r, 0)]
    vac, _ = create_simulation(cfg, Media(drude=problem.drude)).run(src, probe)
    tot, _ = create_simulation(cfg, problem.media(geometry)).run(src, probe)
    return cp_potential(problem.kernel, scattered_series(tot, vac)).U


def potential_map(problem, geometry, positions, clearance: float, threads: int = 1):
    """Rows (x, y, z, U | None) plus the flag reason per row."""
    flags = [position_flag(problem, geometry, p, clearance) for p in positions]
    todo = [p for p, f in zip(positions, flags) if f is None]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        values = iter(list(pool.map(lambda p: potential_at(problem, geometry, p), todo)))
    rows = []
    for p, f in zip(positions, flags):
        xyz = tuple(p) + (0.0,) * (3 - len(p))
        rows.append(xyz + (None if f else next(values),))
    return rows, flags


# ---------------------------------------------------------------- subcommands

def cmd_validate_plane(args) -> int:
    from .validation import validate_plane

    cfg = _load(args.config)
    res = args.resolution or cfg["simulation"]["resolution"]
    z = [float(v) for v in args.z.split(",")]
    rep = validate_plane(z, resolution=res, atom=cfg.atom_model() if cfg["simulation"]["dimensionality"] == 3
                         else None, tolerance=args.tolerance, gamma=cfg["kernel"]["source_gamma"],
                         t_total=args.t_total)
    for line in rep.lines():
        print(line)
    if args.output:
        out = resolve_output(args.output)
        out.mkdir(parents=True, exist_ok=True)
        body = [[f"{a:.9g}", f"{b:.9g}", f"{c:.9g}", f"{e:.9g}"]
                for a, b, c, e in zip(rep.z, rep.U_fdtd, rep.U_oracle, rep.rel_error)]
        io._table(out / "plane_validation.csv", "z,U_fdtd,U_oracle,rel_error", body, cfg.hash())
    return EXIT_OK if rep.passed else EXIT_VALIDATION


def cmd_potential(args) -> int:
    cfg = _load(args.config)
    threads = set_threads(args.threads)
    problem = cfg.problem()
    base = Path(args.config).parent if args.config else None
    try:
        geometry = cfg.initial_geometry(problem, base)
    except (ValueError, OSError) as exc:
        raise ValidationFailure(str(exc)) from None
    nd = problem.grid.ndim
    pts = [_parse_point(s, nd) for s in args.at or []]
    if args.positions:
        pts += read_positions(args.positions, nd)
    if args.line:
        pts += line_positions(_parse_point(args.line[0], nd), _parse_point(args.line[1], nd), args.points)
    if not pts:
        raise ValidationFailure("no positions given (use --at, --line or --positions)")
    clearance = cfg["optimizer"]["clearance_cells"] * problem.config.dx
    rows, flags = potential_map(problem, geometry, pts, clearance, threads)
    out = resolve_output(args.output)
    io.write_potential_table(out, rows, cfg.hash())
    for r, f in zip(rows, flags):
        if f:
            print(f"flagged ({r[0]:.4g}, {r[1]:.4g}, {r[2]:.4g}): {f}", file=sys.stderr)
    print(f"wrote {len(rows)} rows to {out} ({sum(bool(f) for f in flags)} flagged)")
    return EXIT_VALIDATION if any(flags) else EXIT_OK


def _optimizer(cfg: RunConfig, out: Path, lean: bool):
    from .optimizer import Optimizer

    return Optimizer(cfg.problem(), cfg.optimizer_settings(), cfg.hash(), out, lean=lean)


def _finish(state, out: Path) -> int:
    m = state.merits[-1]
    print(f"status={state.status} iterations={state.iteration} final_merit={m:.6e} "
          f"normalized={state.normalized[-1]:.4f} output={out}")
    return EXIT_OK


def _numerical_failure(exc, out: Path) -> int:
    ck = out / "checkpoint.ckpt"
    print(f"numerical failure: {exc}; last good checkpoint: {ck if ck.exists() else 'none'}", file=sys.stderr)
    return EXIT_NUMERICAL


def cmd_optimize(args) -> int:
    cfg = _load(args.config)
    set_threads(args.threads)
    if args.max_iterations is not None:
        cfg = cfg.replace(optimizer={"max_iterations": args.max_iterations})
    lean = args.lean or cfg["output"]["lean"]
    out = resolve_output(args.output or cfg["output"]["directory"])
    out.mkdir(parents=True, exist_ok=True)
    write_run_config(out, cfg)
    opt = _optimizer(cfg, out, lean)
    base = Path(args.config).parent if args.config else None
    try:
        geometry = cfg.initial_geometry(opt.problem, base)
        if not (geometry.phi < 0).any():
            raise ValueError("initial geometry is empty")
        state = opt.run(geometry)
    except FloatingPointError as exc:
        return _numerical_failure(exc, out)
    except (ValueError, OSError) as exc:
        raise ValidationFailure(str(exc)) from None
    return _finish(state, out)


def cmd_resume(args) -> int:
    from .optimizer import read_checkpoint_header, resume

    ck = Path(args.checkpoint)
    if not ck.exists():
        raise ValidationFailure(f"{ck}: no such checkpoint")
    cfg = _load(args.config or ck.parent / "config.ini")
    set_threads(args.threads)
    if args.max_iterations is not None:
        cfg = cfg.replace(optimizer={"max_iterations": args.max_iterations})
    try:
        head = read_checkpoint_header(ck)
    except ValueError as exc:
        raise ValidationFailure(str(exc)) from None
    if head["config_hash"] != cfg.hash():
        raise ValidationFailure(f"checkpoint belongs to config {head['config_hash']}, not {cfg.hash()}")
    out = ck.parent
    opt = _optimizer(cfg, out, args.lean or cfg["output"]["lean"])
    try:
        state = resume(ck, opt)
    except FloatingPointError as exc:
        return _numerical_failure(exc, out)
    except ValueError as exc:
        raise ValidationFailure(str(exc)) from None
    return _finish(state, out)


def cmd_export(args) -> int:
    src = Path(args.geometry)
    try:
        field, meta = io.read_geometry(src)
    except (OSError, KeyError, ValueError) as exc:
        raise ValidationFailure(f"{src}: {exc}") from None
    out = resolve_output(args.output) if args.output else src.with_suffix(".obj")
    try:
        info = io.export_geometry(field, out, meta.get(io.HASH_KEY, ""))
    except ValueError as exc:
        raise ValidationFailure(f"{src}: {exc}") from None
    print(f"wrote {out}: " + json.dumps(info))
    return EXIT_OK


def cmd_materials(args) -> int:
    from .materials import list_presets

    for line in list_presets(args.l0_nm):
        print(line)
    return EXIT_OK


def cmd_config(args) -> int:
    """Print the fully populated default (or given) configuration."""
    cfg = _load(args.config)
    print(f"# {io.HASH_KEY}={cfg.hash()}")
    print(cfg.serialize())
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cpinverse", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, threads=True):
        sp.add_argument("--config", help="run configuration file (defaults apply to missing keys)")
        if threads:
            sp.add_argument("--threads", type=int, help="concurrency cap for simulation jobs")

    sp = sub.add_parser("validate-plane", help="PEC-plane benchmark against the image-dipole oracle")
    common(sp, threads=False)
    sp.add_argument("--z", default="0.8,1.0,1.5,2.0", help="comma-separated separations, L0")
    sp.add_argument("--resolution", type=int, help="cells per L0 (default: from the config)")
    sp.add_argument("--tolerance", type=float, default=0.15)
    sp.add_argument("--t-total", type=float, default=20.0)
    sp.add_argument("--output", help="directory for plane_validation.csv")
    sp.set_defaults(func=cmd_validate_plane)

    sp = sub.add_parser("potential", help="potential U at atom positions near the configured shape")
    common(sp)
    sp.add_argument("--at", action="append", help="one position 'x,y,z' (repeatable)")
    sp.add_argument("--line", nargs=2, metavar=("START", "END"), help="line scan endpoints 'x,y,z'")
    sp.add_argument("--points", type=int, default=5, help="samples along --line")
    sp.add_argument("--positions", help="file of 'x,y,z' rows")
    sp.add_argument("--output", default="potential.csv")
    sp.set_defaults(func=cmd_potential)

    sp = sub.add_parser("optimize", help="run the shape optimization")
    common(sp)
    sp.add_argument("--output", help="output directory (default: [output] directory)")
    sp.add_argument("--lean", action="store_true", help="keep only merit history and final geometry")
    sp.add_argument("--max-iterations", type=int)
    sp.set_defaults(func=cmd_optimize)

    sp = sub.add_parser("resume", help="continue a run from its checkpoint")
    sp.add_argument("checkpoint")
    common(sp)
    sp.add_argument("--lean", action="store_true")
    sp.add_argument("--max-iterations", type=int)
    sp.set_defaults(func=cmd_resume)

    sp = sub.add_parser("export", help="level-set .bin to OBJ (polylines in 2D, triangles in 3D)")
    sp.add_argument("geometry")
    sp.add_argument("--output", help="OBJ path (default: next to the input)")
    sp.add_argument("--format", choices=["obj"], default="obj")
    sp.set_defaults(func=cmd_export)

    sp = sub.add_parser("materials", help="material presets")
    msub = sp.add_subparsers(dest="action", required=True)
    lp = msub.add_parser("list")
    lp.add_argument("--l0-nm", type=float, default=100.0)
    lp.set_defaults(func=cmd_materials)

    sp = sub.add_parser("config", help="print the populated configuration with its hash")
    common(sp, threads=False)
    sp.set_defaults(func=cmd_config)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except ValidationFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
