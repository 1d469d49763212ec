"""Level-set shape representation on the lattice nodes.

Phi < 0 inside the structure, Phi > 0 outside.  Distances are rebuilt with a
closest-point construction: the zero set of a cubic-spline interpolant is
sampled densely by Newton projection, and every node takes its distance to
the nearest sample (to its tangent plane when the sample sits directly under
the node).  The same footpoints give the velocity extension, which is
therefore constant along interface normals by construction.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree


@dataclass
class LevelSetField:
    phi: np.ndarray
    dx: float
    origin: tuple  # coordinate of node 0 along each axis
    tau: float = 0.0
    age: int = 0  # advection steps since the last reinitialization

    @property
    def ndim(self) -> int:
        return self.phi.ndim

    def coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.dx * np.arange(self.phi.shape[axis])

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*[self.coords(a) for a in range(self.ndim)], indexing="ij")

    def points(self) -> np.ndarray:
        return np.stack([m.ravel() for m in self.mesh()], axis=1)

    def with_phi(self, phi, **kw) -> "LevelSetField":
        return replace(self, phi=np.asarray(phi, float), **kw)

    def copy(self) -> "LevelSetField":
        return replace(self, phi=self.phi.copy())

    def digest(self) -> str:
        h = hashlib.sha256(np.ascontiguousarray(self.phi).tobytes())
        h.update(np.asarray([self.dx, *self.origin]).tobytes())
        return h.hexdigest()[:16]

    @classmethod
    def on_grid(cls, grid, phi=None) -> "LevelSetField":
        origin = tuple(float(grid.node_coords(a)[0]) for a in range(grid.ndim))
        if phi is None:
            phi = np.full(grid.config.node_shape, 10.0 * grid.config.extent[0])
        return cls(np.asarray(phi, float), grid.config.dx, origin)


def empty_field(grid) -> LevelSetField:
    """No structure anywhere (vacuum geometry)."""
    return LevelSetField.on_grid(grid)


# ---------------------------------------------------------------- shapes

def cylinder_sdf(points, R, h, center, axis=0):
    """Exact signed distance to a capped cylinder (2D: an axis-aligned slab h x 2R)."""
    p = np.asarray(points, float) - np.asarray(center, float)
    a = np.abs(p[:, axis]) - 0.5 * h
    rest = np.delete(p, axis, axis=1)
    r = np.linalg.norm(rest, axis=1) - R
    q = np.stack([a, r], axis=1)
    return np.minimum(q.max(axis=1), 0.0) + np.linalg.norm(np.maximum(q, 0.0), axis=1)


def init_cylinder(grid, R, h, center, axis=0) -> LevelSetField:
    """Exact signed distance to a cylinder of radius R and height h.

    In 2D the cylinder is cut through its axis, giving a slab of thickness h
    along ``axis`` and half-width R across it.
    """
    if R <= 0 or h <= 0:
        raise ValueError("cylinder radius and height must be positive")
    center = tuple(float(c) for c in center)[: grid.ndim]
    half = [R] * grid.ndim
    half[axis] = 0.5 * h
    for a, (lo, hi) in enumerate(grid.interior_bounds()):
        if center[a] - half[a] < lo - 1e-12 or center[a] + half[a] > hi + 1e-12:
            raise ValueError("cylinder intersects the PML")
    f = LevelSetField.on_grid(grid)
    phi = cylinder_sdf(f.points(), R, h, center, axis).reshape(f.phi.shape)
    return f.with_phi(phi)


def init_box(grid, lo, hi) -> LevelSetField:
    """Exact signed distance to an axis-aligned box."""
    f = LevelSetField.on_grid(grid)
    p = f.points()
    c = 0.5 * (np.asarray(lo) + np.asarray(hi))
    q = np.abs(p - c) - 0.5 * (np.asarray(hi) - np.asarray(lo))
    d = np.minimum(q.max(axis=1), 0.0) + np.linalg.norm(np.maximum(q, 0.0), axis=1)
    return f.with_phi(d.reshape(f.phi.shape))


def union(a: LevelSetField, b: LevelSetField) -> LevelSetField:
    return a.with_phi(np.minimum(a.phi, b.phi))


def subtract(a: LevelSetField, b: LevelSetField) -> LevelSetField:
    return a.with_phi(np.maximum(a.phi, -b.phi))


# ---------------------------------------------------------------- footpoints

@dataclass
class Footpoints:
    points: np.ndarray  # (n, d) physical coordinates on the zero set
    normals: np.ndarray  # (n, d) outward unit normals
    spacing: float


def _interface_cells(phi):
    d = phi.ndim
    corners = [phi[tuple(slice(o, phi.shape[a] - 1 + o) for a, o in enumerate(off))]
               for off in itertools.product((0, 1), repeat=d)]
    lo = np.minimum.reduce(corners)
    hi = np.maximum.reduce(corners)
    return np.argwhere((lo <= 0) & (hi > 0))


def _spline(phi):
    return ndimage.spline_filter(phi, order=3, mode="nearest")


def _eval(coef, idx):
    return ndimage.map_coordinates(coef, idx.T, order=3, prefilter=False, mode="nearest")


def _grad(coef, idx, h=1e-3):
    g = np.empty_like(idx)
    for a in range(idx.shape[1]):
        e = np.zeros(idx.shape[1])
        e[a] = h
        g[:, a] = (_eval(coef, idx + e) - _eval(coef, idx - e)) / (2 * h)
    return g


def footpoints(field: LevelSetField, samples=None, iters=6) -> Footpoints | None:
    """Dense samples of the zero set, found by Newton projection of sub-cell seeds."""
    phi = field.phi
    d = phi.ndim
    cells = _interface_cells(phi)
    if len(cells) == 0:
        return None
    m = samples or (5 if d == 2 else 3)
    sub = (np.arange(m) + 0.5) / m
    offs = np.array(list(itertools.product(sub, repeat=d)))
    seeds = (cells[:, None, :] + offs[None, :, :]).reshape(-1, d)
    coef = _spline(phi)
    p = seeds.copy()
    for _ in range(iters):
        val = _eval(coef, p)
        g = _grad(coef, p)
        g2 = np.maximum((g * g).sum(axis=1), 1e-12)
        step = (val / g2)[:, None] * g
        n = np.linalg.norm(step, axis=1)
        step *= np.minimum(1.0, 1.0 / np.maximum(n, 1e-300))[:, None]
        p -= step
    val = _eval(coef, p)
    g = _grad(coef, p)
    gn = np.linalg.norm(g, axis=1)
    ok = (np.abs(val) < 1e-6 * max(field.dx, 1.0) / field.dx) & (gn > 1e-8) \
        & (np.abs(p - seeds).max(axis=1) <= 2.0)
    hi = np.array(phi.shape) - 1
    ok &= np.all((p >= 0) & (p <= hi), axis=1)
    if not ok.any():
        return None
    p, g, gn = p[ok], g[ok], gn[ok]
    pts = np.asarray(field.origin) + field.dx * p
    return Footpoints(pts, g / gn[:, None], field.dx / m)


def _closest(field: LevelSetField, fp: Footpoints, band=6.0):
    """Distance of every node to the sampled zero set.

    Nodes farther than ``band`` cells fall back to a Euclidean distance
    transform of the sign mask, floored at the band radius.
    """
    tree = cKDTree(fp.points)
    y = field.points()
    reach = band * field.dx
    dist_pt, k = tree.query(y, distance_upper_bound=reach)
    far = ~np.isfinite(dist_pt)
    k = np.where(far, 0, k)
    v = y - fp.points[k]
    dist = np.linalg.norm(v, axis=1)
    dn = np.abs((v * fp.normals[k]).sum(axis=1))
    t = np.sqrt(np.maximum(dist**2 - dn**2, 0.0))
    out = np.where(t <= fp.spacing, dn, dist)
    if far.any():
        outside = field.phi > 0
        edt = np.where(outside, ndimage.distance_transform_edt(outside),
                       ndimage.distance_transform_edt(~outside)).ravel()
        out[far] = np.maximum((edt[far] - 0.5) * field.dx, reach)
    return out, np.where(far, -1, k)


# ---------------------------------------------------------------- operations

@dataclass
class ReinitResult:
    field: LevelSetField
    empty: bool


def reinitialize(field: LevelSetField) -> ReinitResult:
    """Restore signed distance while keeping the zero contour in place.

    A field without a zero contour (all exterior or all interior) is returned
    unchanged with ``empty=True``.
    """
    fp = footpoints(field)
    if fp is None:
        return ReinitResult(field.copy(), True)
    dist, _ = _closest(field, fp)
    sign = np.sign(field.phi).ravel()
    phi = (sign * dist).reshape(field.phi.shape)
    return ReinitResult(field.with_phi(phi, age=0), False)


def gradient_norm(field: LevelSetField) -> np.ndarray:
    g = np.gradient(field.phi, field.dx)
    return np.sqrt(sum(x * x for x in g))


def near_contour(field: LevelSetField, cells=3.0) -> np.ndarray:
    return np.abs(field.phi) <= cells * field.dx


def extend_velocity(field: LevelSetField, band_values, band_mask, radius=1.5) -> np.ndarray:
    """Extend node velocities given on ``band_mask`` along interface normals.

    Each footpoint takes a hat-weighted average of band values within
    ``radius`` cells; every node then copies the value of its closest
    footpoint.
    """
    band_mask = np.asarray(band_mask, bool)
    vals = np.asarray(band_values, float)
    if vals.shape == field.phi.shape:
        vals = vals[band_mask]
    fp = footpoints(field)
    if fp is None or not band_mask.any():
        raise ValueError("velocity band does not intersect the zero contour")
    bpts = field.points()[band_mask.ravel()]
    tree = cKDTree(bpts)
    rad = radius * field.dx
    lists = tree.query_ball_point(fp.points, rad)
    vfp = np.full(len(fp.points), np.nan)
    for i, nb in enumerate(lists):
        if nb:
            w = 1.0 - np.linalg.norm(bpts[nb] - fp.points[i], axis=1) / rad
            w = np.maximum(w, 1e-12)
            vfp[i] = np.dot(w, vals[nb]) / w.sum()
    have = ~np.isnan(vfp)
    if not have.any():
        raise ValueError("velocity band does not intersect the zero contour")
    pts, vfp = fp.points[have], vfp[have]
    dist, k = cKDTree(pts).query(field.points(), distance_upper_bound=6.0 * field.dx)
    near = np.isfinite(dist)
    out = np.zeros(field.phi.size)
    out[near] = vfp[k[near]]
    out = out.reshape(field.phi.shape)
    if not near.all():
        # beyond the band, copy from the nearest banded node
        idx = ndimage.distance_transform_edt(~near.reshape(field.phi.shape), return_distances=False,
                                             return_indices=True)
        out = out[tuple(idx)]
    return out


def _godunov_norm(phi, dx, v):
    d = phi.ndim
    ap = np.zeros_like(phi)
    am = np.zeros_like(phi)
    for a in range(d):
        pad = np.pad(phi, [(1, 1) if b == a else (0, 0) for b in range(d)], mode="edge")
        sl = lambda s: tuple(slice(s, s + phi.shape[a]) if b == a else slice(None) for b in range(d))
        dm = (phi - pad[sl(0)]) / dx
        dp = (pad[sl(2)] - phi) / dx
        ap += np.maximum(dm, 0) ** 2 + np.minimum(dp, 0) ** 2
        am += np.minimum(dm, 0) ** 2 + np.maximum(dp, 0) ** 2
    return np.where(v > 0, np.sqrt(ap), np.sqrt(am))


def advect(field: LevelSetField, v, dtau: float, cfl=0.5) -> LevelSetField:
    """One first-order upwind step of dPhi/dtau + v |grad Phi| = 0.

    v > 0 moves the boundary along its outward normal (the structure grows).
    """
    v = np.broadcast_to(np.asarray(v, float), field.phi.shape)
    if dtau < 0:
        raise ValueError("pseudo-time step must be non-negative")
    if np.max(np.abs(v)) * dtau > cfl * field.dx * (1 + 1e-12):
        raise ValueError(
            f"CFL violation: max|v| dtau = {np.max(np.abs(v)) * dtau:.4g} exceeds {cfl} cell"
        )
    if dtau == 0:
        return field.copy()
    phi = field.phi - dtau * v * _godunov_norm(field.phi, field.dx, v)
    return field.with_phi(phi, tau=field.tau + dtau, age=field.age + 1)


# ---------------------------------------------------------------- material maps

def fill_from_phi(phi, dx):
    return np.clip(0.5 - phi / dx, 0.0, 1.0)


def component_phi(field: LevelSetField, comp: int) -> np.ndarray:
    """Phi averaged onto the Yee E-component positions (half step along ``comp``)."""
    p = field.phi
    a = np.take(p, np.arange(p.shape[comp] - 1), axis=comp)
    b = np.take(p, np.arange(1, p.shape[comp]), axis=comp)
    return 0.5 * (a + b)


def interior_mask(field: LevelSetField) -> tuple:
    """Fill fraction per E component, linear over one cell across the contour."""
    return tuple(fill_from_phi(component_phi(field, c), field.dx) for c in range(field.ndim))


def cell_fill(field: LevelSetField) -> np.ndarray:
    """Fill fraction at cell centres (corner average of Phi)."""
    p = field.phi
    d = p.ndim
    acc = sum(p[tuple(slice(o, p.shape[a] - 1 + o) for a, o in enumerate(off))]
              for off in itertools.product((0, 1), repeat=d))
    return fill_from_phi(acc / 2**d, field.dx)


def volume(field: LevelSetField) -> float:
    return float(cell_fill(field).sum() * field.dx**field.ndim)


def fill_gradient_to_nodes(field: LevelSetField, comp_sens) -> np.ndarray:
    """Chain rule from d(merit)/d(fill) at E components to d(merit)/d(Phi) at nodes."""
    g = np.zeros_like(field.phi)
    for c, s in enumerate(comp_sens):
        pc = component_phi(field, c)
        # the fill is piecewise linear; exactly at a kink take the mean slope
        u = np.abs(pc) / (0.5 * field.dx)
        w = np.where(u < 1 - 1e-9, 1.0, np.where(u <= 1 + 1e-9, 0.5, 0.0))
        gc = -0.5 * w * s / field.dx
        n = field.phi.shape[c]
        lo = tuple(slice(0, n - 1) if a == c else slice(None) for a in range(field.ndim))
        hi = tuple(slice(1, n) if a == c else slice(None) for a in range(field.ndim))
        g[lo] += gc
        g[hi] += gc
    return g


# ---------------------------------------------------------------- constraints

def clamp(field: LevelSetField, floor) -> LevelSetField:
    """Forbid material where ``floor`` > 0 by enforcing Phi >= floor."""
    return field.with_phi(np.maximum(field.phi, floor))


def ball_floor(field: LevelSetField, center, radius) -> np.ndarray:
    d = np.sqrt(sum((m - c) ** 2 for m, c in zip(field.mesh(), center)))
    return radius - d


def halfspace_floor(field: LevelSetField, axis, bound) -> np.ndarray:
    """Positive for coordinate < bound: material is kept at coordinate >= bound."""
    shape = [1] * field.ndim
    shape[axis] = -1
    return (bound - field.coords(axis)).reshape(shape) * np.ones_like(field.phi)


def collar_floor(field: LevelSetField, lo, hi) -> np.ndarray:
    """Positive outside the box [lo, hi]; keeps the contour out of the PML collar."""
    out = np.full(field.phi.shape, -np.inf)
    for a in range(field.ndim):
        shape = [1] * field.ndim
        shape[a] = -1
        x = field.coords(a).reshape(shape)
        out = np.maximum(out, np.maximum(lo[a] - x, x - hi[a]))
    return out


def contour_within(field: LevelSetField, lo, hi) -> bool:
    inside = np.ones(field.phi.shape, bool)
    for a in range(field.ndim):
        shape = [1] * field.ndim
        shape[a] = -1
        x = field.coords(a).reshape(shape)
        inside &= (x >= lo[a]) & (x <= hi[a])
    return not bool((field.phi[~inside] <= 0).any())


# ---------------------------------------------------------------- topology

@dataclass(frozen=True)
class Topology:
    components: int
    holes: int
    axis_clear: bool  # material exists and the atom axis passes through it unobstructed

    def as_tuple(self):
        return (self.components, self.holes)


def _enclosed_voids(solid, conn):
    lab, n = ndimage.label(~solid, structure=conn)
    if n == 0:
        return 0
    border = set()
    for a in range(solid.ndim):
        for idx in (0, -1):
            border.update(np.unique(np.take(lab, idx, axis=a)).tolist())
    border.discard(0)
    return n - len(border)


def topology_stats(field: LevelSetField, axis=0, axis_point=None) -> Topology:
    """Component and hole counts of the structure {Phi < 0}.

    2D: holes are enclosed exterior regions.  3D: holes are tunnels, from the
    Euler characteristic chi = components - tunnels + cavities.
    ``axis_clear`` reports whether the line along ``axis`` through
    ``axis_point`` crosses no material inside the structure's extent.
    """
    from skimage.measure import euler_number

    solid = field.phi < 0
    d = solid.ndim
    full = ndimage.generate_binary_structure(d, d)
    face = ndimage.generate_binary_structure(d, 1)
    _, comps = ndimage.label(solid, structure=full)
    voids = _enclosed_voids(solid, face)
    if d == 2:
        holes = voids
    else:
        chi = euler_number(solid, connectivity=3)
        holes = max(comps + voids - chi, 0)
    clear = False
    if comps:
        pt = np.zeros(d) if axis_point is None else np.asarray(axis_point, float)
        idx = [int(round((pt[a] - field.origin[a]) / field.dx)) for a in range(d)]
        idx[axis] = slice(None)
        clear = not bool(solid[tuple(idx)].any())
    return Topology(int(comps), int(holes), clear)
