"""Artifact files: flat binary arrays with text headers, OBJ meshes, CSV tables.

Every file records the hash of the configuration that produced it, either in
its ``.hdr`` companion or in a leading ``# config_hash=...`` comment line.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

HASH_KEY = "config_hash"


def _atomic_write(path: Path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_text(path, text: str):
    _atomic_write(Path(path), text.encode())


# ---------------------------------------------------------------- arrays

def write_array(path, arr, config_hash: str, **meta):
    """Raw little-endian float64 ``path`` plus ``path.hdr`` (key = value lines)."""
    path = Path(path)
    a = np.ascontiguousarray(arr, dtype="<f8")
    _atomic_write(path, a.tobytes())
    lines = [f"dims = {' '.join(str(n) for n in a.shape)}", "dtype = float64", "order = C",
             "endian = little", f"{HASH_KEY} = {config_hash}"]
    for k, v in meta.items():
        if isinstance(v, (tuple, list, np.ndarray)):
            v = " ".join(repr(float(x)) for x in v)
        lines.append(f"{k} = {v}")
    _atomic_text(path.with_name(path.name + ".hdr"), "\n".join(lines) + "\n")
    return path


def read_header(path) -> dict:
    path = Path(path)
    hdr = path if path.suffix == ".hdr" else path.with_name(path.name + ".hdr")
    out = {}
    for line in hdr.read_text().splitlines():
        if "=" in line and not line.lstrip().startswith("#"):
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def read_array(path):
    path = Path(path)
    meta = read_header(path)
    dims = tuple(int(x) for x in meta["dims"].split())
    a = np.fromfile(path, dtype="<f8")
    if a.size != int(np.prod(dims)):
        raise ValueError(f"{path}: payload has {a.size} values, header says {dims}")
    return a.reshape(dims), meta


def write_geometry(path, field, config_hash: str, **meta):
    return write_array(path, field.phi, config_hash, spacing=field.dx, origin=field.origin,
                       tau=field.tau, quantity="level set (L0)", **meta)


def read_geometry(path):
    from .levelset import LevelSetField

    phi, meta = read_array(path)
    origin = tuple(float(x) for x in meta["origin"].split())
    f = LevelSetField(phi, float(meta["spacing"]), origin, float(meta.get("tau", 0.0)))
    return f, meta


# ---------------------------------------------------------------- meshes

def contour_polylines(field):
    """Zero contour of a 2D level set as a list of (n, 2) physical-coordinate arrays."""
    from skimage.measure import find_contours

    lines = find_contours(field.phi, 0.0)
    return [np.asarray(field.origin) + field.dx * ln for ln in lines]


def surface_mesh(field):
    """Marching-cubes triangulation of a 3D zero level set: (verts, faces)."""
    from skimage.measure import marching_cubes

    verts, faces, _, _ = marching_cubes(field.phi, 0.0, spacing=(field.dx,) * 3)
    return verts + np.asarray(field.origin), faces


def euler_characteristic(faces) -> int:
    """V - E + F of a triangle mesh (counting only referenced vertices)."""
    faces = np.asarray(faces)
    V = len(np.unique(faces))
    edges = np.sort(np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]]), axis=1)
    E = len(np.unique(edges, axis=0))
    return int(V - E + len(faces))


def export_geometry(field, path, config_hash: str = ""):
    """Write the zero contour as OBJ: polylines in 2D, triangles in 3D."""
    if not (field.phi < 0).any():
        raise ValueError("level set has an empty interior: nothing to export")
    if not (field.phi > 0).any():
        raise ValueError("level set has no exterior: nothing to export")
    lines = [f"# {HASH_KEY}={config_hash}", "# zero contour of the level set, lengths in L0"]
    if field.ndim == 2:
        k = 1
        for pl in contour_polylines(field):
            for x, y in pl:
                lines.append(f"v {x:.9g} {y:.9g} 0")
            lines.append("l " + " ".join(str(k + i) for i in range(len(pl))))
            k += len(pl)
        info = {"polylines": len(contour_polylines(field))}
    else:
        verts, faces = surface_mesh(field)
        lines += [f"v {x:.9g} {y:.9g} {z:.9g}" for x, y, z in verts]
        lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in faces]
        info = {"vertices": len(verts), "faces": len(faces), "euler": euler_characteristic(faces)}
    _atomic_text(path, "\n".join(lines) + "\n")
    return info


def read_obj(path):
    verts, faces, polylines = [], [], []
    for line in Path(path).read_text().splitlines():
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "v":
            verts.append([float(x) for x in tok[1:4]])
        elif tok[0] == "f":
            faces.append([int(x.split("/")[0]) - 1 for x in tok[1:4]])
        elif tok[0] == "l":
            polylines.append([int(x) - 1 for x in tok[1:]])
    return np.array(verts), np.array(faces, dtype=int), polylines


# ---------------------------------------------------------------- tables

def _table(path, header: str, rows, config_hash: str):
    out = [f"# {HASH_KEY}={config_hash}", header]
    out += [",".join(rows_i) for rows_i in rows]
    _atomic_text(path, "\n".join(out) + "\n")
    return Path(path)


def _g(x) -> str:
    return f"{float(x):.9g}"


def write_potential_table(path, rows, config_hash: str):
    """``x,y,z,U`` rows; U is written as nan for rows that failed (flagged)."""
    body = []
    for r in rows:
        x, y, z, U = r
        body.append([_g(x), _g(y), _g(z), "nan" if U is None else _g(U)])
    return _table(path, "x,y,z,U", body, config_hash)


def write_kernel_table(path, kernel, config_hash: str):
    body = [[_g(t), _g(k)] for t, k in zip(kernel.times, kernel.values)]
    return _table(path, "t,K", body, config_hash)


def write_merit_history(path, merits, accepted, config_hash: str):
    m = np.asarray(merits, float)
    norm = m / np.max(np.abs(m)) if len(m) and np.max(np.abs(m)) > 0 else m
    body = [[str(i), _g(a), _g(b), str(int(bool(acc)))] for i, (a, b, acc) in enumerate(zip(m, norm, accepted))]
    return _table(path, "iteration,merit,normalized_merit,accepted", body, config_hash)


def read_table(path):
    """Returns (config_hash, column names, float array)."""
    lines = Path(path).read_text().splitlines()
    h = ""
    if lines and lines[0].startswith("#"):
        h = lines[0].split("=", 1)[1].strip()
        lines = lines[1:]
    cols = lines[0].split(",")
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:] if ln], dtype=float)
    return h, cols, data.reshape(-1, len(cols))


def file_hash(path) -> str | None:
    path = Path(path)
    if path.name.endswith(".hdr"):
        return read_header(path).get(HASH_KEY)
    try:
        with open(path, "rb") as fh:
            magic = fh.read(8)
    except OSError:
        return None
    from .optimizer import CHECKPOINT_MAGIC, read_checkpoint_header

    if magic == CHECKPOINT_MAGIC:
        return read_checkpoint_header(path).get(HASH_KEY)
    if path.with_name(path.name + ".hdr").exists():
        return read_header(path).get(HASH_KEY)
    try:
        with open(path, "r", errors="replace") as fh:
            first = fh.readline()
    except OSError:
        return None
    if first.startswith(f"# {HASH_KEY}="):
        return first.split("=", 1)[1].strip()
    if first.startswith("{"):
        import json

        try:
            return json.loads(Path(path).read_text()).get(HASH_KEY)
        except ValueError:
            return None
    return None


def check_provenance(directory) -> str:
    """Single config hash shared by every artifact in ``directory``; raises on a mix."""
    seen = {}
    for p in sorted(Path(directory).iterdir()):
        if p.is_file() and not p.name.endswith(".tmp"):
            h = file_hash(p)
            if h:
                seen.setdefault(h, []).append(p.name)
    if len(seen) > 1:
        detail = "; ".join(f"{h}: {', '.join(v)}" for h, v in seen.items())
        raise ValueError(f"mixed provenance in {directory}: {detail}")
    return next(iter(seen), "")
