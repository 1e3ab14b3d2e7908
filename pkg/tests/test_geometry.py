import numpy as np
import pytest

from conebarrier.errors import EmptyDomainError, EmptyGridError, InvalidDomainError
from conebarrier.geometry import (
    DomainSpec,
    best_axis,
    build_grid,
    exterior_approximation,
    exterior_cone_check,
    interior_exhaustion,
    l_shape,
    regular_polygon,
    stencil_directions,
    unit_square,
)


# -- independent oracles (deliberately not shapely) -------------------------

def ray_cast_inside(verts, pt):
    """Even-odd ray casting; points on the boundary are unreliable and the
    callers keep clear of it."""
    x, y = pt
    inside = False
    n = len(verts)
    for k in range(n):
        x1, y1 = verts[k]
        x2, y2 = verts[(k + 1) % n]
        if (y1 > y) != (y2 > y):
            t = (y - y1) / (y2 - y1)
            if x < x1 + t * (x2 - x1):
                inside = not inside
    return inside


def shoelace_area(verts):
    x, y = verts[:, 0], verts[:, 1]
    return 0.5 * abs(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def sample_inside(domain, n, seed=0):
    rng = np.random.default_rng(seed)
    x0, y0, x1, y1 = domain.bbox
    pts = []
    while len(pts) < n:
        cand = rng.uniform((x0, y0), (x1, y1), size=(4 * n, 2))
        keep = domain.contains_points(cand)
        pts.extend(cand[keep][: n - len(pts)])
    return np.asarray(pts)


class TestDomainSpec:
    def test_validation(self):
        with pytest.raises(InvalidDomainError):
            DomainSpec(np.array([[0, 0], [1, 0], [1, 0], [0, 1]]), np.pi / 2, 0.5)
        with pytest.raises(InvalidDomainError):
            DomainSpec(np.array([[0, 0], [1, 1], [1, 0], [0, 1]]), np.pi / 2, 0.5)  # bowtie
        with pytest.raises(InvalidDomainError):
            unit_square(psi=0.0)
        with pytest.raises(InvalidDomainError):
            unit_square(rbar=0.0)

    def test_orientation_normalized(self):
        cw = DomainSpec(np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]), np.pi / 2, 0.5)
        assert cw.area == pytest.approx(1.0)

    def test_area_against_shoelace(self):
        dom = l_shape()
        assert dom.area == pytest.approx(shoelace_area(dom.vertices), abs=1e-12)


class TestConeCheck:
    def test_unit_square_half_pi(self):
        rep = exterior_cone_check(unit_square(psi=np.pi / 2), samples=64)
        assert rep.ok
        assert rep.worst_margin >= 0.0
        # the binding points are the edges, which need exactly pi/2
        assert rep.worst_margin <= 0.02

    def test_square_corner_needs_quarter_pi(self):
        dom = unit_square(psi=np.pi / 2)
        info = best_axis(dom, np.array([0.0, 0.0]))
        assert info.required == pytest.approx(np.pi / 4, abs=0.01)
        assert info.axis == pytest.approx(np.array([1.0, 1.0]) / np.sqrt(2.0), abs=1e-9)

    def test_l_shape(self):
        ok = exterior_cone_check(l_shape(psi=3 * np.pi / 4, rbar=0.5), samples=64)
        assert ok.ok
        bad = exterior_cone_check(l_shape(psi=np.pi / 2, rbar=0.5), samples=64)
        assert not bad.ok
        assert np.hypot(*bad.worst_point) < 1e-9  # re-entrant corner at the origin
        info = best_axis(l_shape(), np.array([0.0, 0.0]))
        assert info.required == pytest.approx(3 * np.pi / 4, abs=0.01)

    def test_convex_near_pi(self):
        dom = regular_polygon(12, psi=np.pi - 1e-3)
        assert exterior_cone_check(dom, samples=48).ok

    def test_random_convex_polygons_half_pi(self):
        rng = np.random.default_rng(4)
        for trial in range(5):
            pts = rng.standard_normal((20, 2))
            # convex hull, ccw
            from scipy.spatial import ConvexHull

            hull = ConvexHull(pts)
            verts = pts[hull.vertices]
            dom = DomainSpec(verts, psi=np.pi / 2 + 1e-6, rbar=0.3)
            assert exterior_cone_check(dom, samples=32).ok


class TestGrid:
    def test_unit_square_coarse(self):
        grid = build_grid(unit_square(rbar=1.5), h=0.25, stencil_order=1)
        assert grid.n_nodes == 9
        assert len(grid.dirs) == 8

    def test_l_shape_counts(self):
        h = 1.0 / 64
        grid = build_grid(l_shape(), h=h, stencil_order=2)
        assert len(grid.dirs) == 16
        expected = l_shape().area / h ** 2
        perimeter = 8.0
        assert abs(grid.n_nodes - expected) <= 2 * perimeter / h

    def test_too_coarse(self):
        with pytest.raises(EmptyGridError):
            build_grid(unit_square(rbar=40.0), h=5.0)

    def test_stencil_symmetric(self):
        for order in (1, 2):
            dirs = stencil_directions(order)
            assert len(dirs) == 8 * order
            dset = {tuple(d) for d in dirs}
            assert all((-d[0], -d[1]) in dset for d in dirs)
            for axis in [(1, 0), (0, 1), (1, 1), (1, -1)]:
                assert axis in dset

    def test_interior_nodes_have_lattice_neighbors(self):
        grid = build_grid(l_shape(), h=0.1, stencil_order=2)
        ny, nx = grid.node_index.shape
        iy, ix = np.nonzero(grid.node_index >= 0)
        for dx, dy in grid.dirs:
            assert np.all((ix + dx >= 0) & (ix + dx < nx))
            assert np.all((iy + dy >= 0) & (iy + dy < ny))

    def test_cut_fractions(self):
        grid = build_grid(unit_square(rbar=1.5), h=0.25, stencil_order=1)
        # node (0.25, 0.25): west arm exits at x=0 -> rho = 1 exactly (hits
        # the lattice neighbor on the boundary), so boundary value applies there
        i = int(np.nonzero((grid.pos[:, 0] == 0.25) & (grid.pos[:, 1] == 0.25))[0][0])
        w = 1  # signed direction index of (-1, 0)
        assert grid.nbr[i, w] == -1
        assert grid.rho[i, w] == pytest.approx(1.0)
        assert grid.cutpt[i, w] == pytest.approx([0.0, 0.25])

    def test_cut_fraction_interior_crossing(self):
        # h=0.3 lattice on the unit square: nodes at 0.3, 0.6, 0.9; the east
        # arm of x=0.9 exits at x=1 with rho = 1/3
        grid = build_grid(unit_square(rbar=1.5), h=0.3, stencil_order=1)
        i = int(np.nonzero((np.isclose(grid.pos[:, 0], 0.9)) & (np.isclose(grid.pos[:, 1], 0.6)))[0][0])
        assert grid.nbr[i, 0] == -1
        assert grid.rho[i, 0] == pytest.approx(1.0 / 3.0, abs=1e-9)
        assert grid.cutpt[i, 0] == pytest.approx([1.0, 0.6])

    def test_classification_stable_under_refinement(self):
        dom = l_shape()
        g1 = build_grid(dom, h=1.0 / 16)
        g2 = build_grid(dom, h=1.0 / 32)
        dist = dom.distance_to_boundary(g1.pos)
        deep = g1.pos[dist > 2.0 / 16]
        # every deep interior node of the coarse grid is a node of the fine grid
        fine = {(round(x, 9), round(y, 9)) for x, y in g2.pos}
        for x, y in deep:
            assert (round(x, 9), round(y, 9)) in fine

    def test_interpolation(self):
        grid = build_grid(unit_square(rbar=1.5), h=0.1)
        vals = grid.pos[:, 0] + 2.0 * grid.pos[:, 1]
        pts = np.array([[0.43, 0.57], [0.5, 0.5], [0.91, 0.91]])
        out = grid.interpolate(vals, pts)
        assert out[0] == pytest.approx(0.43 + 2 * 0.57, abs=1e-12)
        assert out[1] == pytest.approx(1.5, abs=1e-12)
        assert np.isnan(out[2])  # cell touches the boundary


class TestExhaustion:
    def test_square_erosion_exact(self):
        dom = unit_square()
        h1 = interior_exhaustion(dom, 1)  # d = rbar/2 = 0.25
        got = set(map(tuple, np.round(h1.vertices, 9)))
        assert got == {(0.25, 0.25), (0.75, 0.25), (0.75, 0.75), (0.25, 0.75)}

    def test_nested_interior(self):
        dom = l_shape()
        prev = None
        for j in range(1, 11):
            hj = interior_exhaustion(dom, j)
            if prev is not None:
                pts = prev.vertices
                assert all(ray_cast_inside(hj.vertices, p) for p in pts)
            prev = hj

    def test_union_recovers_domain(self):
        dom = l_shape()
        pts = sample_inside(dom, 200, seed=1)
        dist = dom.distance_to_boundary(pts)
        for j in (2, 5, 10, 20):
            d = dom.rbar / (2 * j)
            sel = dist > 1.5 * d
            hj = interior_exhaustion(dom, j)
            assert all(ray_cast_inside(hj.vertices, p) for p in pts[sel])

    def test_hausdorff_decreases(self):
        dom = l_shape()
        prev = np.inf
        for j in range(1, 8):
            hj = interior_exhaustion(dom, j)
            bd = hj.sample_boundary(256)
            d = float(np.max(dom.distance_to_boundary(bd)))
            assert d <= prev + 1e-9
            prev = d
        assert prev <= dom.rbar / 14 + 0.02

    def test_erosion_empties(self):
        with pytest.raises(EmptyDomainError):
            interior_exhaustion(unit_square(rbar=4.0), 1)  # erosion by 2

    def test_dilation_contains_and_shrinks(self):
        dom = unit_square()
        areas = []
        prev = None
        for j in range(1, 11):
            oj = exterior_approximation(dom, j)
            areas.append(oj.area)
            assert all(ray_cast_inside(oj.vertices, v) for v in dom.vertices * 0.999 + 0.0005)
            if prev is not None:
                for p in oj.vertices:
                    assert ray_cast_inside(prev.vertices, p * (1 - 1e-9) + np.mean(prev.vertices, 0) * 1e-9)
            prev = oj
        assert all(a1 >= a2 - 1e-12 for a1, a2 in zip(areas, areas[1:]))
        assert areas[-1] >= dom.area

    def test_dilated_square_area(self):
        dom = unit_square()
        o1 = exterior_approximation(dom, 1)  # dilation by 0.25
        exact = 1.0 + 4 * 0.25 + np.pi * 0.25 ** 2
        assert o1.area == pytest.approx(exact, abs=5e-3)
        assert shoelace_area(o1.vertices) == pytest.approx(o1.area, abs=1e-12)
        mids = np.array([[-0.249, 0.5], [1.249, 0.5], [0.5, -0.249], [0.5, 1.249]])
        assert all(ray_cast_inside(o1.vertices, p) for p in mids)
