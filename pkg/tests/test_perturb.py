import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mahlerlab.bodies import Ball, Ellipsoid, LpBall, cube
from mahlerlab.errors import CertificationError, FlatPointError, GeometryError, InconclusiveError
from mahlerlab.perturb import (
    Perturbation,
    cap_cut,
    cap_modulus,
    cone_add,
    cone_modulus,
    dual_cap_comparator,
    dual_cap_radius,
    dual_cap_sandwich_check,
    dual_cap_threshold,
    dual_of_cap_identity,
    fit_constant,
    fit_power_law,
    prepare_normalized,
    symmetric_cap_cut,
    theorem_inequalities,
    verify_theorem,
)
from mahlerlab.volume import sphere_directions, volume

from oracles import circular_segment_area, kite_minus_sector, random_rotation


def _normalized_ellipsoid():
    a = np.array([2.0, 1.0, 0.7])
    u = np.array([1.0, 1.0, 1.0])
    x = u / math.sqrt(np.sum(u**2 / a**2))
    return prepare_normalized(Ellipsoid.from_axes(a), x, samples=50_000)[:2]


# ---------------------------------------------------------------------------
# the two constructions
# ---------------------------------------------------------------------------


def test_cap_cut_disk():
    K = cap_cut(Ball(2), Perturbation.at(Ball(2), [0.0, 1.0], 0.01, "cap_cut"))
    assert volume(K).value == pytest.approx(math.pi - circular_segment_area(0.01), abs=1e-12)


def test_cap_cut_cube_facet():
    K = cap_cut(cube(3), Perturbation.at(cube(3), [0.0, 0.0, 1.0], 0.5, "cap_cut"))
    assert volume(K).value == pytest.approx(6.0, abs=1e-12)


def test_zero_height_is_identity():
    B = Ball(2)
    assert cap_cut(B, Perturbation.at(B, [0.0, 1.0], 0.0, "cap_cut")) is B
    assert cone_add(B, Perturbation.at(B, [0.0, 1.0], 0.0, "cone_add")) is B


def test_cone_add_disk():
    K = cone_add(Ball(2), Perturbation.at(Ball(2), [0.0, 1.0], 0.1, "cone_add"))
    assert volume(K).value == pytest.approx(math.pi + kite_minus_sector(0.1), abs=1e-12)


def test_cone_add_cube_facet_pyramid():
    K = cone_add(cube(3), Perturbation.at(cube(3), [0.0, 0.0, 1.0], 1.0, "cone_add"))
    # pyramid of height 1 over the 2 x 2 top facet
    assert volume(K).value == pytest.approx(8 + 4 / 3, abs=1e-12)


def test_perturbation_validation():
    with pytest.raises(ValueError):
        Perturbation(np.zeros(2), np.array([0.0, 1.0]), 0.1, "bump")
    with pytest.raises(GeometryError):
        Perturbation(np.zeros(2), np.array([0.0, 1.0]), -0.1, "cap_cut")
    with pytest.raises(GeometryError):
        Perturbation(np.zeros(2), np.array([0.0, 2.0]), 0.1, "cap_cut")
    with pytest.raises(GeometryError):
        Perturbation.at(Ball(2), [0.0, 1.0], 2.5, "cap_cut")
    with pytest.raises(GeometryError):
        Perturbation.at(Ball(2), [0.0, 0.5], 0.1, "cap_cut")
    with pytest.raises(ValueError):
        cap_cut(Ball(2), Perturbation.at(Ball(2), [0.0, 1.0], 0.1, "cone_add"))


@given(st.integers(0, 10_000), st.floats(0.001, 0.3))
def test_perturbations_commute_with_rotations(seed, delta):
    rng = np.random.default_rng(seed)
    R = random_rotation(rng, 3)
    E = Ellipsoid.from_axes([2.0, 1.0, 0.7])
    x = np.array([2.0, 0.0, 0.0])
    RE = E.linear_image(R)
    u = sphere_directions(3, 100, seed)
    for kind, op in (("cap_cut", cap_cut), ("cone_add", cone_add)):
        a = op(E, Perturbation.at(E, x, delta, kind)).linear_image(R)
        b = op(RE, Perturbation.at(RE, R @ x, delta, kind))
        np.testing.assert_allclose(a.support(u), b.support(u), atol=1e-9)


def test_symmetric_caps_keep_symmetry():
    K = symmetric_cap_cut(Ball(3), [0.0, 0.0, 1.0], 0.05)
    u = sphere_directions(3, 200, 3)
    np.testing.assert_allclose(K.support(u), K.support(-u), atol=1e-12)


# ---------------------------------------------------------------------------
# duality identity
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("n", [2, 3, 4])
def test_dual_identity_on_balls(n):
    x = np.zeros(n)
    x[-1] = 1.0
    assert dual_of_cap_identity(Ball(n), x, 0.1) < 1e-9


def test_dual_identity_vanishes_as_height_shrinks():
    vals = [dual_of_cap_identity(Ball(3), [0.0, 0.0, 1.0], d) for d in (0.1, 1e-3, 1e-6, 0.0)]
    assert max(vals) < 1e-9


def test_dual_identity_on_normalized_ellipsoid():
    body, x = _normalized_ellipsoid()
    for d in (0.01, 0.05, 0.1, 0.2):
        assert dual_of_cap_identity(body, x, d) < 1e-6


def test_dual_identity_domain():
    with pytest.raises(GeometryError):
        dual_of_cap_identity(Ball(2), [0.0, 1.0], 1.0)
    with pytest.raises(GeometryError):
        dual_of_cap_identity(Ball(2, 2.0), [0.0, 2.0], 0.1)


# ---------------------------------------------------------------------------
# dual-cap radius law
# ---------------------------------------------------------------------------


def test_dual_cap_radius_plug_in():
    assert dual_cap_radius(1.0, 0.0, 0.02) == pytest.approx(math.sqrt(0.04 - 0.0004), rel=1e-15)
    for d in (1e-6, 1e-3, 0.02, 0.3):
        assert dual_cap_radius(1.0, 0.0, d) == pytest.approx(dual_cap_comparator(1.0, 0.0, d), rel=1e-15)


def test_dual_cap_radius_equals_polar_slice_of_a_ball():
    # the polar of the ball of radius r internally tangent to the unit sphere
    # at e_n is an ellipsoid; its slice at depth D below e_n has this radius
    from mahlerlab.curvature import slice_radii, tangent_frame

    for r in (0.6, 0.8, 1.5):
        K = Ball(2, r, center=[0.0, 1 - r])
        P = K.polar()
        N = np.array([0.0, 1.0])
        for d in (1e-3, 1e-2, 0.05):
            got = slice_radii(P, N, N, tangent_frame(N), d, np.array([[1.0]]))[0]
            assert got == pytest.approx(dual_cap_radius(r, 0.0, d), rel=1e-9)


@pytest.mark.parametrize("r,eps", [(1.0, 0.05), (2.0, 0.1), (0.7, 0.2)])
def test_threshold_is_admissible(r, eps):
    th = dual_cap_threshold(r, eps)
    for d in np.linspace(th / 1000, th, 1000):
        assert dual_cap_radius(r, eps, d) <= dual_cap_comparator(r, eps, d)


def test_eps_precondition():
    with pytest.raises(GeometryError):
        dual_cap_radius(2.0, 0.6, 0.01)
    with pytest.raises(GeometryError):
        dual_cap_sandwich_check(Ball(2), [0.0, 1.0], 1.0, 1.0)


def test_sandwich_check_on_ball_is_generous():
    d = dual_cap_sandwich_check(Ball(2), [0.0, 1.0], 1.0, 0.05)
    assert d == pytest.approx(0.5 * 0.95)


def test_sandwich_check_on_normalized_ellipsoid():
    body, x = _normalized_ellipsoid()
    d = dual_cap_sandwich_check(body, x, 1.0, 0.05)
    assert d > 0


def test_sandwich_check_fails_for_wrong_radius():
    # the unit ball does not have curvature radius 3 anywhere
    with pytest.raises(CertificationError):
        dual_cap_sandwich_check(Ball(2), [0.0, 1.0], 3.0, 0.05, delta_min=1e-3)


# ---------------------------------------------------------------------------
# inequalities and the experiment
# ---------------------------------------------------------------------------


def test_inequalities_ball_three_dimensions():
    v = 4 * math.pi / 3
    row = theorem_inequalities(v, v, 1.0, 1e-3, 1e-4, 3)
    # bracket with unit moduli: 4 (1 + e)^2 - 3 (1 - e)^2 at e = 1e-3
    assert row.ineq1_lhs / v == pytest.approx(4 * 1.001**2 - 3 * 0.999**2, rel=1e-12)
    assert row.ineq1_rhs == pytest.approx(3 * v, rel=1e-2)
    assert row.winner == "both"
    assert row.contradiction_flag is False


def test_inequalities_planar_limit():
    row = theorem_inequalities(math.pi, math.pi, 1.0, 0.0, 0.0, 2)
    assert row.ineq1_lhs == pytest.approx(math.pi)
    assert row.ineq1_rhs == pytest.approx(2 * math.pi)
    assert row.winner == "both"
    # in the plane the closing bound 4 >= n^2 holds with equality
    assert row.contradiction_flag is True


def test_power_law_fit_recovers_exponent():
    d = np.array([1e-2, 1e-3, 1e-4])
    assert fit_power_law(d, 3.0 * d**1.5) == pytest.approx(1.5)
    assert fit_constant(d, 3.0 * d**1.5, 1.5) == pytest.approx(3.0)


def test_theorem_on_disk():
    D = verify_theorem(Ball(2), [0.0, 1.0], [1e-2, 1e-3, 1e-4])
    assert D.method == "exact"
    assert D.vp_base == pytest.approx(math.pi**2, rel=1e-14)
    assert D.winner == ["both"] * 3
    assert abs(D.exponent - 1.5) < 0.1
    assert D.constant == pytest.approx(2 * math.sqrt(2) * math.pi / 3, rel=0.05)
    assert all(v <= D.vp_base for v in D.vp_cap)


def test_theorem_symmetric_caps_on_ball():
    D = verify_theorem(Ball(3), [0.0, 0.0, 1.0], [1e-2, 1e-3], symmetric=True)
    assert all(D.strict_decrease)


def test_theorem_rejects_flat_point():
    with pytest.raises(FlatPointError):
        verify_theorem(cube(3), [0.0, 0.0, 1.0], [1e-2, 1e-3])


def test_theorem_grid_validation():
    with pytest.raises(ValueError):
        verify_theorem(Ball(2), [0.0, 1.0], [1e-3, 1e-2])


def test_unresolvable_noise_is_inconclusive():
    with pytest.raises(InconclusiveError):
        verify_theorem(Ball(2), [0.0, 1.0], [1e-9, 1e-10], method="mc", samples=2000)


def test_theorem_csv_is_deterministic():
    a = verify_theorem(LpBall(2, 3.0), [2 ** (-1 / 3), 2 ** (-1 / 3)], [1e-2, 1e-3], samples=50_000, seed=4)
    b = verify_theorem(LpBall(2, 3.0), [2 ** (-1 / 3), 2 ** (-1 / 3)], [1e-2, 1e-3], samples=50_000, seed=4, jobs=2)
    assert a.csv_text() == b.csv_text()
    assert all(a.strict_decrease)


def test_moduli_on_ball_and_lp_ball():
    g = cap_modulus(Ball(2), [0.0, 1.0], [1e-2, 1e-3, 1e-4])
    h = cone_modulus(Ball(2), [0.0, 1.0], [1e-2, 1e-3, 1e-4])
    assert 0.97 <= g.ratios()[-1] <= 1.03
    assert 0.97 <= h.ratios()[-1] <= 1.03
    x = np.full(2, 2 ** (-1 / 4))
    g4 = cap_modulus(LpBall(2, 4.0), x, [1e-1, 1e-2, 1e-3])
    gaps = np.abs(g4.ratios() - 1)
    assert gaps[-1] < gaps[0]
