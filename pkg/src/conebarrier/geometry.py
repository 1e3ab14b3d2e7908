"""Polygonal domains with exterior-cone data, lattice grids and the
interior/exterior approximation sequences.

All values are immutable after construction and safe to share between
threads; construction itself is single-threaded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import shapely
from shapely.geometry import LineString, Polygon

from .errors import EmptyDomainError, EmptyGridError, GeometryError, InvalidDomainError

AXIS_SWEEP = 4096          # candidate cone-axis directions
_ARC_SAMPLES = 1024        # circle samples when probing Omega inside B(z, rbar)


def _shoelace(verts: np.ndarray) -> float:
    x, y = verts[:, 0], verts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass(frozen=True)
class DomainSpec:
    """Simple polygon with uniform exterior-cone parameters.

    ``psi`` is the cone half-opening in (0, pi) and ``rbar`` the cone
    height; together they assert that near every boundary point the
    domain fits inside an open cone of half-angle psi within radius rbar
    (verifiable with :func:`exterior_cone_check`).
    """

    vertices: np.ndarray
    psi: float
    rbar: float
    _polygon: Polygon = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2 or len(verts) < 3:
            raise InvalidDomainError("need at least 3 vertices of shape (n, 2)")
        if np.allclose(verts[0], verts[-1]):
            verts = verts[:-1]
        edges = np.roll(verts, -1, axis=0) - verts
        lens = np.hypot(edges[:, 0], edges[:, 1])
        scale = float(np.max(np.abs(verts))) + 1.0
        if np.any(lens <= 1e-12 * scale):
            raise InvalidDomainError("degenerate polygon: zero-length edge")
        if _shoelace(verts) < 0:
            verts = verts[::-1].copy()
        poly = Polygon(verts)
        if (not poly.is_valid) or poly.area <= 0.0:
            raise InvalidDomainError("polygon is self-intersecting or has zero area")
        if not (0.0 < self.psi < np.pi):
            raise InvalidDomainError(f"psi must lie in (0, pi), got {self.psi}")
        if not self.rbar > 0.0:
            raise InvalidDomainError(f"rbar must be positive, got {self.rbar}")
        verts.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "_polygon", poly)

    @property
    def polygon(self) -> Polygon:
        return self._polygon

    @property
    def area(self) -> float:
        return float(self._polygon.area)

    @property
    def diameter(self) -> float:
        v = self.vertices
        d2 = np.sum((v[:, None, :] - v[None, :, :]) ** 2, axis=-1)
        return float(np.sqrt(d2.max()))

    @property
    def bbox(self):
        x0, y0, x1, y1 = self._polygon.bounds
        return float(x0), float(y0), float(x1), float(y1)

    def contains_points(self, pts: np.ndarray) -> np.ndarray:
        """Strict-interior test, vectorized."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return shapely.contains_xy(self._polygon, pts[:, 0], pts[:, 1])

    def distance_to_boundary(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        boundary = self._polygon.boundary
        return shapely.distance(boundary, shapely.points(pts[:, 0], pts[:, 1]))

    def boundary_points(self, n: int) -> np.ndarray:
        """n points on the boundary: all vertices first, then arclength-uniform
        fill (deterministic)."""
        verts = self.vertices
        if n <= len(verts):
            return verts[:n].copy()
        ring = self._polygon.exterior
        extra = n - len(verts)
        ts = (np.arange(extra) + 0.5) / extra
        fill = shapely.line_interpolate_point(ring, ts, normalized=True)
        return np.vstack([verts, shapely.get_coordinates(fill)])

    def sample_boundary(self, n: int) -> np.ndarray:
        """Arclength-uniform boundary sampling including all vertices."""
        ring = self._polygon.exterior
        ts = np.arange(n) / n
        pts = shapely.get_coordinates(shapely.line_interpolate_point(ring, ts, normalized=True))
        return np.vstack([self.vertices, pts])


@dataclass
class ConeReport:
    ok: bool
    worst_margin: float
    worst_point: np.ndarray
    required_opening: float

    def as_dict(self):
        return {
            "ok": bool(self.ok),
            "worst_margin": float(self.worst_margin),
            "worst_point": [float(self.worst_point[0]), float(self.worst_point[1])],
            "required_opening": float(self.required_opening),
        }


def _local_angles(domain: DomainSpec, z: np.ndarray, bd_cache: Optional[np.ndarray] = None) -> np.ndarray:
    """Direction angles (from z) of points of Omega inside B(z, rbar).

    The extremes of the angular extent lie on the boundary of
    Omega cap B(z, rbar), so we sample the polygon boundary inside the
    ball, the ball arc inside the polygon, and include the exact edge
    directions leaving z when z sits on a vertex or an edge endpoint.
    """
    poly = domain.polygon
    rbar = domain.rbar
    angles = []

    verts = domain.vertices
    m = len(verts)
    # exact outgoing directions of edges touching z
    for k in range(m):
        a, b = verts[k], verts[(k + 1) % m]
        for p, q in ((a, b), (b, a)):
            if np.hypot(*(p - z)) <= 1e-12 * (1.0 + rbar):
                d = q - p
                angles.append(np.arctan2(d[1], d[0]))

    # polygon boundary points inside the ball
    bd = bd_cache if bd_cache is not None else domain.sample_boundary(4 * _ARC_SAMPLES)
    dv = bd - z[None, :]
    r = np.hypot(dv[:, 0], dv[:, 1])
    keep = (r > 1e-12) & (r < rbar)
    if np.any(keep):
        angles.append(np.arctan2(dv[keep, 1], dv[keep, 0]))

    # ball arc inside the polygon
    ts = 2.0 * np.pi * np.arange(_ARC_SAMPLES) / _ARC_SAMPLES
    arc = z[None, :] + rbar * 0.999999 * np.column_stack([np.cos(ts), np.sin(ts)])
    inside = shapely.contains_xy(poly, arc[:, 0], arc[:, 1])
    if np.any(inside):
        angles.append(ts[inside])

    if not angles:
        return np.empty(0)
    return np.concatenate([np.atleast_1d(a) for a in angles])


@dataclass(frozen=True)
class AxisInfo:
    """Best cone axis at a boundary point.

    ``required`` is the half-opening needed by the quantized axis (the one
    used for constructions); ``required_exact`` is the optimum over all
    axes given the sampled angles and drives the ok verdict.
    """

    axis: np.ndarray
    required: float
    required_exact: float


def best_axis(domain: DomainSpec, z: np.ndarray, _bd_cache: Optional[np.ndarray] = None) -> AxisInfo:
    """Cone axis maximizing clearance at boundary point z.

    The returned axis is snapped to the AXIS_SWEEP grid (taking the better
    of the two adjacent grid directions)."""
    z = np.asarray(z, dtype=float)
    thetas = np.mod(_local_angles(domain, z, _bd_cache), 2.0 * np.pi)
    if thetas.size == 0:
        raise GeometryError(f"no local geometry found at boundary point {z}")
    order = np.sort(thetas)
    gaps = np.diff(np.concatenate([order, order[:1] + 2.0 * np.pi]))
    k = int(np.argmax(gaps))
    gap = gaps[k]
    # covered arc is the complement of the largest gap; axis points at its middle
    mid = order[k] + gap / 2.0 + np.pi
    required_exact = float(np.pi - gap / 2.0)

    def deviation(angle):
        return float(np.max(np.abs(np.mod(thetas - angle + np.pi, 2.0 * np.pi) - np.pi)))

    quantum = 2.0 * np.pi / AXIS_SWEEP
    lo = np.floor(mid / quantum) * quantum
    candidates = (lo, lo + quantum)
    axis_angle = min(candidates, key=deviation)
    n = np.array([np.cos(axis_angle), np.sin(axis_angle)])
    return AxisInfo(axis=n, required=deviation(axis_angle), required_exact=required_exact)


def exterior_cone_check(domain: DomainSpec, samples: int = 256) -> ConeReport:
    """Verify the uniform exterior cone condition by sampling the boundary.

    All vertices are always included; the worst case for a polygon occurs
    there.  ok iff min over sampled z of (psi - required opening) >= 0.
    """
    pts = np.vstack([domain.vertices, domain.boundary_points(max(samples, len(domain.vertices)))])
    pts = np.unique(np.round(pts, 12), axis=0)
    bd_cache = domain.sample_boundary(4 * _ARC_SAMPLES)
    worst = np.inf
    worst_z = pts[0]
    worst_req = 0.0
    for z in pts:
        required = best_axis(domain, z, bd_cache).required_exact
        margin = domain.psi - required
        if margin < worst:
            worst = margin
            worst_z = z
            worst_req = required
    return ConeReport(ok=bool(worst >= 0.0), worst_margin=float(worst),
                      worst_point=worst_z, required_opening=float(worst_req))


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

_BASE_DIRS_8 = np.array([(1, 0), (0, 1), (1, 1), (1, -1)], dtype=np.int64)
_BASE_DIRS_16 = np.array(
    [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (-1, 2), (1, 2), (-2, 1)], dtype=np.int64
)


def stencil_directions(order: int) -> np.ndarray:
    """Signed direction set: base directions interleaved with their negations.

    Consecutive pairs (2k, 2k+1) are antipodal; consecutive base pairs
    (0,1), (2,3), ... form orthogonal frames of equal step length.
    """
    if order == 1:
        base = _BASE_DIRS_8
    elif order == 2:
        base = _BASE_DIRS_16
    else:
        raise ValueError("stencil_order must be 1 or 2")
    signed = np.empty((2 * len(base), 2), dtype=np.int64)
    signed[0::2] = base
    signed[1::2] = -base
    return signed


def _first_crossing(p, q, edge_a, edge_d):
    """Smallest t in [0, 1] with p + t (q - p) on a polygon edge, or None.

    t barely above zero is legitimate: lattice points can land within
    float roundoff of the boundary while still classifying as interior.
    """
    d1 = q - p
    ap = edge_a - p
    denom = d1[0] * edge_d[:, 1] - d1[1] * edge_d[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (ap[:, 0] * edge_d[:, 1] - ap[:, 1] * edge_d[:, 0]) / denom
        s = (ap[:, 0] * d1[1] - ap[:, 1] * d1[0]) / denom
    valid = (np.abs(denom) > 1e-14) & (s >= -1e-9) & (s <= 1.0 + 1e-9) \
        & (t >= -1e-12) & (t <= 1.0 + 1e-9)
    if not np.any(valid):
        return None
    return float(np.min(t[valid]))


@dataclass(frozen=True)
class Grid:
    """Wide-stencil lattice discretization of a domain.

    Solved nodes are the lattice points strictly inside the polygon.  A
    node is *boundary-adjacent* when at least one stencil arm crosses the
    boundary; crossed arms record the cut fraction rho in (0, 1] and the
    exact cut point for Dirichlet interpolation.
    """

    domain: DomainSpec
    h: float
    stencil_order: int
    dirs: np.ndarray          # (D, 2) signed lattice directions
    pos: np.ndarray           # (n, 2) node coordinates
    nbr: np.ndarray           # (n, D) neighbor node id or -1 when the arm is cut
    rho: np.ndarray           # (n, D) cut fraction, 1.0 for full arms
    cutpt: np.ndarray         # (n, D, 2) cut coordinates (NaN on full arms)
    node_index: np.ndarray    # (ny, nx) lattice -> node id or -1
    origin: np.ndarray        # lattice origin
    is_cut: np.ndarray        # (n,) boundary-adjacent flag

    @property
    def n_nodes(self) -> int:
        return len(self.pos)

    @property
    def ell(self) -> np.ndarray:
        """Step length per signed direction."""
        return self.h * np.hypot(self.dirs[:, 0], self.dirs[:, 1])

    def interior_mask(self) -> np.ndarray:
        """Nodes with all stencil arms uncut."""
        return ~self.is_cut

    def interpolate(self, values: np.ndarray, pts: np.ndarray) -> np.ndarray:
        """Bilinear interpolation of nodal values; NaN where any of the four
        surrounding lattice corners is not a solved node."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.full(len(pts), np.nan)
        ny, nx = self.node_index.shape
        fx = (pts[:, 0] - self.origin[0]) / self.h
        fy = (pts[:, 1] - self.origin[1]) / self.h
        ix = np.floor(fx).astype(int)
        iy = np.floor(fy).astype(int)
        ok = (ix >= 0) & (iy >= 0) & (ix + 1 < nx) & (iy + 1 < ny)
        for k in np.nonzero(ok)[0]:
            ids = self.node_index[iy[k]:iy[k] + 2, ix[k]:ix[k] + 2]
            if np.any(ids < 0):
                continue
            tx = fx[k] - ix[k]
            ty = fy[k] - iy[k]
            v = values[ids]
            out[k] = ((1 - tx) * (1 - ty) * v[0, 0] + tx * (1 - ty) * v[0, 1]
                      + (1 - tx) * ty * v[1, 0] + tx * ty * v[1, 1])
        return out


def build_grid(domain: DomainSpec, h: float, stencil_order: int = 1) -> Grid:
    """Classify lattice nodes and record boundary cuts along stencil arms."""
    if not h > 0:
        raise ValueError("grid spacing must be positive")
    if h >= domain.rbar / 4.0:
        raise EmptyGridError(
            f"grid spacing h={h} too coarse for cone height rbar={domain.rbar} (need h < rbar/4)"
        )
    dirs = stencil_directions(stencil_order)
    reach = int(np.max(np.abs(dirs)))
    x0, y0, x1, y1 = domain.bbox
    margin = (reach + 1) * h
    ox = x0 - margin
    oy = y0 - margin
    nx = int(np.ceil((x1 + margin - ox) / h)) + 1
    ny = int(np.ceil((y1 + margin - oy) / h)) + 1

    xs = ox + h * np.arange(nx)
    ys = oy + h * np.arange(ny)
    gx, gy = np.meshgrid(xs, ys)
    inside = shapely.contains_xy(domain.polygon, gx.ravel(), gy.ravel()).reshape(ny, nx)

    node_index = np.full((ny, nx), -1, dtype=np.int64)
    ids = np.nonzero(inside)
    n = len(ids[0])
    if n == 0:
        raise EmptyGridError("no interior lattice node; refine the grid")
    node_index[ids] = np.arange(n)
    pos = np.column_stack([gx[ids], gy[ids]])

    D = len(dirs)
    nbr = np.full((n, D), -1, dtype=np.int64)
    rho = np.ones((n, D), dtype=float)
    cutpt = np.full((n, D, 2), np.nan)

    verts = domain.vertices
    edge_a = verts
    edge_d = np.roll(verts, -1, axis=0) - verts
    boundary = domain.polygon.boundary

    iy_all, ix_all = ids
    for d_idx, (dx, dy) in enumerate(dirs):
        jx = ix_all + dx
        jy = iy_all + dy
        tgt = node_index[jy, jx]
        nbr[:, d_idx] = tgt
        cut = np.nonzero(tgt < 0)[0]
        step = h * float(np.hypot(dx, dy))
        for i in cut:
            p = pos[i]
            q = p + np.array([dx * h, dy * h], dtype=float)
            t = _first_crossing(p, q, edge_a, edge_d)
            if t is None:
                # grazing configuration: fall back to a robust shapely query
                seg = LineString([p, q])
                inter = seg.intersection(boundary)
                if inter.is_empty:
                    t = 1.0
                else:
                    coords = shapely.get_coordinates(inter)
                    dists = np.hypot(coords[:, 0] - p[0], coords[:, 1] - p[1])
                    t = float(dists.min()) / step if len(dists) else 1.0
            # sub-1e-3 cuts are clamped: the boundary shift is far below
            # scheme accuracy and it keeps the cut-cell residual well scaled
            t = min(max(float(t), 1e-3), 1.0)
            rho[i, d_idx] = t
            cutpt[i, d_idx] = p + t * (q - p)

    is_cut = np.any(nbr < 0, axis=1)
    for arr in (dirs, pos, nbr, rho, cutpt, node_index):
        arr.setflags(write=False)
    return Grid(domain=domain, h=float(h), stencil_order=stencil_order, dirs=dirs,
                pos=pos, nbr=nbr, rho=rho, cutpt=cutpt, node_index=node_index,
                origin=np.array([ox, oy]), is_cut=is_cut)


# ---------------------------------------------------------------------------
# exhaustion sequences
# ---------------------------------------------------------------------------

_QUAD_SEGS = 16  # arc sampling: chord deviation well under the d/8 resolution


def _polygon_from_shapely(geom, psi: float, rbar: float) -> DomainSpec:
    if geom.is_empty:
        raise EmptyDomainError("offset emptied the polygon")
    if geom.geom_type == "MultiPolygon":
        geom = max(geom.geoms, key=lambda g: g.area)
    coords = np.asarray(geom.exterior.coords)[:-1]
    keep = [0]
    for k in range(1, len(coords)):
        if np.hypot(*(coords[k] - coords[keep[-1]])) > 1e-11:
            keep.append(k)
    if np.hypot(*(coords[keep[-1]] - coords[keep[0]])) <= 1e-11:
        keep.pop()
    coords = coords[keep]
    if len(coords) < 3:
        raise EmptyDomainError("offset polygon degenerated")
    return DomainSpec(vertices=coords, psi=psi, rbar=rbar)


def interior_exhaustion(domain: DomainSpec, j: int) -> DomainSpec:
    """H_j: erosion by rbar/(2 j) with re-entrant corners rounded by arcs.

    The schedule keeps the H_j strictly nested with union Omega; cone
    parameters are inherited from the parent domain.
    """
    if j < 1:
        raise ValueError("exhaustion index must be >= 1")
    d = domain.rbar / (2.0 * j)
    eroded = domain.polygon.buffer(-d, quad_segs=_QUAD_SEGS, join_style="round")
    return _polygon_from_shapely(eroded, domain.psi, domain.rbar)


def exterior_approximation(domain: DomainSpec, j: int) -> DomainSpec:
    """Omega_j: dilation by rbar/(2 j) with convex corners rounded by arcs."""
    if j < 1:
        raise ValueError("approximation index must be >= 1")
    d = domain.rbar / (2.0 * j)
    fattened = domain.polygon.buffer(d, quad_segs=_QUAD_SEGS, join_style="round")
    return _polygon_from_shapely(fattened, domain.psi, domain.rbar)


# ---------------------------------------------------------------------------
# small constructors used across tests and the CLI
# ---------------------------------------------------------------------------

def unit_square(psi: float = np.pi / 2, rbar: float = 0.5) -> DomainSpec:
    return DomainSpec(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]), psi, rbar)


def l_shape(psi: float = 3 * np.pi / 4, rbar: float = 0.5) -> DomainSpec:
    verts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [0.0, -1.0]])
    return DomainSpec(verts, psi, rbar)


def regular_polygon(n: int, radius: float = 1.0, psi: float = np.pi / 2, rbar: float = 0.5) -> DomainSpec:
    ts = 2.0 * np.pi * np.arange(n) / n
    verts = radius * np.column_stack([np.cos(ts), np.sin(ts)])
    return DomainSpec(verts, psi, rbar)


def load_domain_file(path, psi: float, rbar: float) -> DomainSpec:
    """Read 'x y' vertex pairs, one per line; '#' starts a comment."""
    verts = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise InvalidDomainError(f"bad vertex line in {path!s}: {line!r}")
            verts.append((float(parts[0]), float(parts[1])))
    if len(verts) < 3:
        raise InvalidDomainError(f"domain file {path!s} has fewer than 3 vertices")
    return DomainSpec(np.asarray(verts), psi, rbar)
