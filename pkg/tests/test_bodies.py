import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mahlerlab.bodies import (
    Ball,
    CappedBody,
    ConedBody,
    ConvexBody,
    Ellipsoid,
    Halfspace,
    HPolytope,
    LinearImage,
    LpBall,
    VPolytope,
    boundary_normal,
    cross_polytope,
    cube,
    hull_with_point,
    intersect_halfspace,
    polar_dual,
    standard_simplex,
)
from mahlerlab.errors import GeometryError, NonUniqueNormalError
from mahlerlab.volume import sphere_directions, volume, volume_rejection

from oracles import circular_segment_area, kite_minus_sector, polygon_polar_vertices, random_rotation


def _dirs(n, m=200, seed=1):
    return sphere_directions(n, m, seed)


def _smooth_bodies():
    return [
        Ball(3),
        Ball(2, 2.5),
        Ellipsoid.from_axes([2.0, 1.0]),
        Ellipsoid.from_axes([1.0, 2.0, 0.5], center=[0.1, -0.2, 0.05]),
        LpBall(3, 3.0),
        LpBall(2, 1.5, 2.0),
        LinearImage(Ball(3), [[1, 0.3, 0], [0, 1, 0.2], [0.1, 0, 2]]),
    ]


# ---------------------------------------------------------------------------
# polarity
# ---------------------------------------------------------------------------


def test_cube_polar_is_cross_polytope():
    P = cube(3).polar()
    got = VPolytope(P.vertices).canonical_vertices()
    want = cross_polytope(3).canonical_vertices()
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_ball_is_self_dual():
    P = Ball(4).polar()
    u = _dirs(4)
    np.testing.assert_allclose(P.support(u), 1.0, atol=1e-14)


def test_triangle_polar_matches_brute_force_enumeration():
    V = np.array([[2.0, 0.0], [0.0, 2.0], [-1.0, -1.0]])
    K = VPolytope(V)
    P = K.polar()
    want = polygon_polar_vertices(V)
    got = np.unique(np.round(P.vertices, 12), axis=0)
    np.testing.assert_allclose(got, want, atol=1e-10)
    back = P.polar()
    np.testing.assert_allclose(
        VPolytope(back.vertices).canonical_vertices(), K.canonical_vertices(), atol=1e-9
    )


def test_polar_at_shifted_point():
    # K^z is the polar of K - z
    K = cube(2)
    z = np.array([0.3, -0.2])
    P = polar_dual(K, z)
    u = _dirs(2)
    np.testing.assert_allclose(P.support(u), (K.translate(-z)).gauge(u), rtol=1e-12)


def test_polar_of_point_outside_or_on_boundary_fails():
    with pytest.raises(GeometryError):
        polar_dual(cube(2), [1.0, 0.0])
    with pytest.raises(GeometryError):
        polar_dual(Ball(2), [2.0, 0.0])


def test_ellipsoid_polar_closed_form_against_support():
    E = Ellipsoid.from_axes([2.0, 1.0, 0.7], center=[0.2, 0.1, -0.1], rotation=random_rotation(np.random.default_rng(3), 3))
    P = E.polar()
    u = _dirs(3, 500)
    # r_{K°}(u) = 1 / h_K(u)
    np.testing.assert_allclose(P.radial(u), 1.0 / E.support(u), rtol=1e-12)


@pytest.mark.parametrize("K", _smooth_bodies() + [cube(3), cross_polytope(2), standard_simplex(2).translate([-0.2, -0.2])])
def test_polar_radial_is_reciprocal_support(K):
    u = sphere_directions(K.dim, 1000, 7)
    rel = np.abs(K.polar().radial(u) * K.support(u) - 1.0)
    assert rel.max() < 1e-10


@st.composite
def symmetric_polytopes(draw):
    n = draw(st.sampled_from([2, 3, 4]))
    m = draw(st.integers(n, 2 * n + 2))
    seed = draw(st.integers(0, 10_000))
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((m, n))
    pts = np.vstack([pts, -pts, np.eye(n), -np.eye(n)])
    return VPolytope(pts)


@given(symmetric_polytopes())
def test_polar_involution(K):
    back = K.polar().polar()
    np.testing.assert_allclose(
        VPolytope(back.vertices).canonical_vertices(), K.canonical_vertices(), atol=1e-9
    )


@given(st.integers(0, 10_000), st.floats(0.3, 0.95))
def test_polarity_reverses_inclusion(seed, shrink):
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((8, 3))
    outer = VPolytope(np.vstack([pts, -pts]))
    inner = VPolytope(shrink * outer.vertices + 0.02 * rng.standard_normal(outer.vertices.shape))
    u = _dirs(3)
    if np.all(inner.support(u) <= outer.support(u)) and inner.is_interior(np.zeros(3)):
        assert np.all(outer.polar().support(u) <= inner.polar().support(u) + 1e-12)


# ---------------------------------------------------------------------------
# halfspace intersection and point hull
# ---------------------------------------------------------------------------


def test_cube_cut_volume():
    K = intersect_halfspace(cube(3), Halfspace(np.array([0.0, 0.0, 1.0]), 0.5))
    assert volume(K).value == pytest.approx(6.0, abs=1e-12)


def test_capped_disk_area_matches_segment_formula():
    delta = 0.01
    K = intersect_halfspace(Ball(2), Halfspace(np.array([0.0, 1.0]), 1 - delta))
    assert isinstance(K, CappedBody)
    assert volume(K).value == pytest.approx(math.pi - circular_segment_area(delta), abs=1e-12)
    # the documented value of the segment
    assert circular_segment_area(delta) == pytest.approx(0.00188279, abs=5e-9)


def test_intersect_with_containing_halfspace_is_identity():
    for K in (cube(3), Ball(3)):
        H = Halfspace(np.array([0.0, 0.0, 1.0]), 5.0)
        L = intersect_halfspace(K, H)
        u = _dirs(3, 100)
        np.testing.assert_allclose(L.support(u), K.support(u), atol=1e-12)
        assert volume(L).value == pytest.approx(volume(K).value, rel=1e-12)


def test_empty_intersection_rejected():
    with pytest.raises(GeometryError):
        intersect_halfspace(cube(2), Halfspace(np.array([0.0, 1.0]), -1.0))
    with pytest.raises(GeometryError):
        intersect_halfspace(Ball(2), Halfspace(np.array([0.0, 1.0]), -1.5))


def test_capped_support():
    K = CappedBody(Ball(2), [Halfspace(np.array([0.0, 1.0]), 0.9)])
    assert K.support(np.array([0.0, 1.0])) == pytest.approx(0.9, abs=1e-12)
    assert K.support(np.array([1.0, 0.0])) == pytest.approx(1.0, abs=1e-12)
    # direction whose maximizer lies on the rim of the cut
    u = np.array([0.2, 1.0]) / math.hypot(0.2, 1.0)
    rim = np.array([math.sqrt(1 - 0.81), 0.9])
    assert K.support(u) == pytest.approx(rim @ u, abs=1e-10)


def test_coned_disk_area_matches_kite_formula():
    delta = 0.1
    K = hull_with_point(Ball(2), [0.0, 1 + delta])
    assert isinstance(K, ConedBody)
    excess = kite_minus_sector(delta)
    assert volume(K).value == pytest.approx(math.pi + excess, abs=1e-12)
    assert excess == pytest.approx(0.0285579, abs=1e-7)


def test_hull_with_interior_point_is_identity():
    K = hull_with_point(cube(3), np.zeros(3))
    assert volume(K).value == pytest.approx(8.0, abs=1e-12)
    B = Ball(2)
    assert hull_with_point(B, [0.2, 0.1]) is B


def test_hull_with_reflected_vertex_against_rejection():
    S = standard_simplex(3)
    p = np.array([1.0, 1.0, 1.0]) * 2 / 3  # reflection of 0 through the far facet
    H = hull_with_point(S, p)
    exact = volume(H).value
    mc = volume_rejection(H, 400_000, seed=5)
    assert abs(exact - mc.value) < 4 * mc.stderr


def test_coned_support_is_max_of_base_and_apex():
    p = np.array([0.0, 0.0, 1.3])
    K = ConedBody(Ball(3), [p])
    u = _dirs(3)
    np.testing.assert_allclose(K.support(u), np.maximum(1.0, u @ p), atol=1e-14)


# ---------------------------------------------------------------------------
# support, radial and normals
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("n", [2, 3, 5])
def test_cube_support_on_diagonal(n):
    assert cube(n).support(np.ones(n)) == pytest.approx(n)


def test_ellipsoid_support_closed_form():
    a = np.array([3.0, 2.0, 0.5])
    E = Ellipsoid.from_axes(a)
    u = _dirs(3)
    np.testing.assert_allclose(E.support(u), np.sqrt(np.sum(a**2 * u**2, axis=1)), rtol=1e-14)


def test_radial_examples():
    assert Ball(3).radial(np.array([0.0, 0.0, 1.0])) == pytest.approx(1.0)
    u = np.array([1.0, 1.0]) / math.sqrt(2)
    assert cube(2).radial(u) == pytest.approx(math.sqrt(2), rel=1e-12)


@pytest.mark.parametrize("K", _smooth_bodies())
def test_smooth_oracle_consistency(K):
    u = _dirs(K.dim, 300)
    c = K.interior_point()
    L = K if np.allclose(c, 0) else K.translate(-c)
    r = L.radial(u)
    pts = r[:, None] * u
    assert np.all(L.contains(pts * (1 - 1e-8), tol=0.0))
    assert not np.any(L.contains(pts * (1 + 1e-8), tol=0.0))


def test_normals():
    x = np.array([0.6, 0.0, 0.8])
    np.testing.assert_allclose(boundary_normal(Ball(3), x), x, atol=1e-9)
    np.testing.assert_allclose(boundary_normal(cube(3), [0.2, -0.3, 1.0]), [0, 0, 1], atol=1e-14)
    np.testing.assert_allclose(boundary_normal(Ellipsoid.from_axes([2.0, 1.0]), [2.0, 0.0]), [1, 0], atol=1e-12)


def test_normal_at_ridge_is_not_unique():
    with pytest.raises(NonUniqueNormalError):
        boundary_normal(cube(3), [1.0, 1.0, 0.0])


def test_normal_requires_boundary_point():
    with pytest.raises(GeometryError):
        boundary_normal(Ball(2), [0.5, 0.0])


@pytest.mark.parametrize("K", _smooth_bodies())
def test_normal_is_support_subgradient(K):
    c = K.interior_point()
    L = K if np.allclose(c, 0) else K.translate(-c)
    for u in _dirs(K.dim, 12, seed=9):
        x = L.radial(u) * u
        N = L.normal(x)
        assert L.support(N) == pytest.approx(x @ N, abs=1e-9)


# ---------------------------------------------------------------------------
# representation invariants
# ---------------------------------------------------------------------------


def test_hpolytope_merges_duplicates_and_finds_vertices():
    A = np.vstack([np.eye(2), -np.eye(2), [[1.0, 0.0]]])
    b = np.array([1.0, 1.0, 1.0, 1.0, 1.0 + 1e-12])
    P = HPolytope(A, b)
    assert len(P.b) == 4
    assert len(P.vertices) == 4


def test_unbounded_hpolytope_rejected():
    with pytest.raises(GeometryError):
        HPolytope(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([1.0, 1.0])).vertices


def test_vpolytope_drops_redundant_points():
    V = np.vstack([cube(2).vertices, [[0.0, 0.0], [0.5, 0.5]]])
    assert len(VPolytope(V).vertices) == 4


def test_lower_dimensional_vpolytope_rejected():
    with pytest.raises(GeometryError):
        VPolytope([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])


def test_dimension_cap():
    with pytest.raises(GeometryError):
        cube(7)


# ---------------------------------------------------------------------------
# equivariance properties
# ---------------------------------------------------------------------------


@given(st.floats(0.1, 10.0), st.integers(0, 1000))
def test_support_is_positively_homogeneous(lam, seed):
    u = sphere_directions(3, 20, seed)
    for K in (cube(3), Ball(3, 1.5), LpBall(3, 4.0)):
        np.testing.assert_allclose(K.support(lam * u), lam * K.support(u), rtol=1e-12)


@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3), st.integers(0, 1000))
def test_support_translation_equivariance(t, seed):
    t = np.array(t)
    u = sphere_directions(3, 20, seed)
    for K in (cube(3), Ellipsoid.from_axes([1.0, 2.0, 3.0]), LpBall(3, 3.0)):
        np.testing.assert_allclose(K.translate(t).support(u), K.support(u) + u @ t, rtol=1e-12, atol=1e-12)


@given(st.integers(0, 10_000))
def test_linear_images_commute_with_rotations(seed):
    rng = np.random.default_rng(seed)
    R = random_rotation(rng, 3)
    u = sphere_directions(3, 50, seed)
    for K in (cube(3), Ellipsoid.from_axes([1.0, 2.0, 0.5]), LpBall(3, 3.0)):
        RK = K.linear_image(R)
        np.testing.assert_allclose(RK.support(u), K.support(u @ R), atol=1e-12)


def test_generic_radial_bisection_matches_closed_form():
    E = Ellipsoid.from_axes([2.0, 1.0, 0.5])
    u = _dirs(3, 100)
    np.testing.assert_allclose(ConvexBody.radial(E, u), E.radial(u), rtol=1e-12)
