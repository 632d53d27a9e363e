import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flatmod.delaunay import (circumradius, cone_closed_geodesic, delaunay, diameter_bounds,
                              diameter_constants, find_cylinder, incircle_excess, is_delaunay,
                              metric_report, relative_diameter, relative_systole,
                              shortest_saddle_connection_between_distinct, systole)
from flatmod.errors import PreconditionError
from flatmod.surface import hexagon_torus, lattice_torus, rectangle_torus, regular_hexagon_sides
from flatmod.surgeries import s1, s4_kite, s5_cylinder

PI = math.pi


def torus_diameter_grid(tau, k=200):
    """Largest distance from the origin on C/(Z + tau Z), by brute force over a k x k grid."""
    s = np.linspace(0, 1, k, endpoint=False)
    X = s[:, None] + tau * s[None, :]
    best = np.full(X.shape, np.inf)
    for m in (-1, 0, 1):
        for n in (-1, 0, 1):
            best = np.minimum(best, np.abs(X + m + n * tau))
    return float(best.max())


@pytest.fixture(scope="module")
def corpus(square, sphere, quad_sphere, torus_3pi_pi, thurston2):
    return {
        "square": square,
        "rect12": rectangle_torus(1, 2),
        "skew": lattice_torus(0.3 + 1.1j),
        "hex1": hexagon_torus(1, regular_hexagon_sides()),
        "hex3": hexagon_torus(3, regular_hexagon_sides()),
        "sphere": sphere,
        "quad": quad_sphere,
        "devil": torus_3pi_pi,
        "thurston": thurston2.surface,
        "kite": s4_kite(1j, 0.15 + 0.05j, [(3, 2), (3, 4), (3, 4)]).surface,
        "cylinder": s5_cylinder(quad_sphere, 0, 1, 0.3 + 0.7j).surface,
    }


def test_square_torus_delaunay(square):
    D = delaunay(square)
    assert sorted(D.edge_lengths()) == pytest.approx([1, 1, math.sqrt(2)])
    # the diagonal is cocircular: the incircle test is tied
    ex = sorted(incircle_excess(D, t, e) for t, e in D.edges())
    assert ex[:2] == pytest.approx([-PI / 2, -PI / 2])
    assert abs(ex[2]) < 1e-9


def test_rectangle_shortest_edge():
    assert min(delaunay(rectangle_torus(1, 2)).edge_lengths()) == pytest.approx(1.0)


def test_square_torus_values(square):
    rep = metric_report(square)
    assert rep.systole == pytest.approx(1.0)
    assert rep.diameter == pytest.approx(math.sqrt(2) / 2, rel=0.02)
    assert torus_diameter_grid(1j) == pytest.approx(math.sqrt(2) / 2, rel=0.02)


@pytest.mark.parametrize("tau", [1j, 0.5 + 0.9j, 0.2 + 1.7j])
def test_diameter_bracket_against_grid(tau):
    lo, hi = diameter_bounds(lattice_torus(tau))
    D = torus_diameter_grid(tau)
    spacing = (1 + abs(tau)) / 200   # the grid can miss the farthest point by this much
    assert lo <= D + spacing and D <= hi + 1e-6
    assert lo == pytest.approx(D, rel=0.02)


def test_diameter_bounds_scale(torus_3pi_pi):
    lo, hi = diameter_bounds(torus_3pi_pi)
    lo2, hi2 = diameter_bounds(torus_3pi_pi.scaled(3.0))
    assert lo2 == pytest.approx(3 * lo, rel=1e-6)
    assert hi2 == pytest.approx(3 * hi, rel=1e-6)


def test_systole_rectangles():
    assert systole(rectangle_torus(1, 3))[0] == pytest.approx(1.0)
    with pytest.raises(PreconditionError):
        systole(rectangle_torus(1, 3), length_cap=0.5)


def test_cone_closed_geodesic():
    assert cone_closed_geodesic(PI / 2, 1) == pytest.approx((math.sqrt(2), PI / 2))
    assert cone_closed_geodesic(2 * PI / 3, 2)[0] == pytest.approx(2 * math.sqrt(3))
    assert cone_closed_geodesic(1.0, 1e-9)[0] < 1e-8
    with pytest.raises(PreconditionError):
        cone_closed_geodesic(PI, 1)


def test_diameter_constants():
    K1, K2 = diameter_constants(2, 4)
    assert K1 == pytest.approx(8 / math.sqrt(PI))
    assert K2 == pytest.approx(math.sqrt(3) / 4)
    assert diameter_constants(2, 3)[0] == pytest.approx(8 / math.sqrt(PI))
    assert diameter_constants(2, 6)[1] == diameter_constants(2, 3)[1]


def test_cylinders(square, torus_3pi_pi, quad_sphere):
    c = find_cylinder(square)
    assert (c.width, c.length) == pytest.approx((1.0, 1.0))
    # the systole through the 3pi point has both sectors larger than pi
    assert find_cylinder(torus_3pi_pi) is None
    res = s5_cylinder(quad_sphere, 0, 1, 0.3 + 3j)
    c = find_cylinder(res.surface)
    L = res.data["L"]
    assert c.width == pytest.approx(L)
    assert c.length >= 3 * L - 1e-9


def test_long_cylinder_diameter_diverges(quad_sphere):
    sig, D = [], []
    for h in (2.0, 4.0, 8.0):
        S = s5_cylinder(quad_sphere, 0, 1, 1j * h).surface
        sig.append(systole(S)[0])
        D.append(diameter_bounds(S)[0])
    assert sig == pytest.approx([sig[0]] * 3)
    assert D[0] < D[1] < D[2]


def test_relative_systole_after_s1(sphere):
    res = s1(sphere, 2, (5, 8), 0.01 + 0.005j)
    N = res.surface.normalized()
    delta, _ = relative_systole(N)
    assert delta == pytest.approx(res.width, rel=1e-9)
    assert delta == pytest.approx(shortest_saddle_connection_between_distinct(N, 3 * delta), rel=1e-9)


def test_relative_systole_needs_two_points(square):
    with pytest.raises(PreconditionError):
        relative_systole(square)


def test_prop_compare_and_delaunay_on_corpus(corpus):
    for name, S in corpus.items():
        rep = metric_report(S)
        assert all(rep.inequalities().values()), name
        D = delaunay(S.normalized())
        assert is_delaunay(D), name
        assert max(D.edge_lengths()) <= 2 * rep.diameter_upper + 1e-9, name
        again = delaunay(D)
        assert np.allclose(again.tri, D.tri) and np.array_equal(again.adj, D.adj), name
        if S.n_points >= 2:
            delta, _ = relative_systole(D)
            brute = shortest_saddle_connection_between_distinct(D, 2 * delta + 1e-9)
            assert delta == pytest.approx(brute, rel=1e-9), name


def test_relative_diameter_is_max_circumradius(square):
    D = delaunay(square)
    assert relative_diameter(square) == pytest.approx(max(circumradius(*r) for r in D.tri))
    assert relative_diameter(square) == pytest.approx(math.sqrt(2) / 2)


@settings(max_examples=15, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(0.5, 2.0))
def test_lattice_torus_properties(re, im):
    S = lattice_torus(complex(re, im))
    rep = metric_report(S)
    assert all(rep.inequalities().values())
    assert rep.diameter <= rep.diameter_upper
    assert is_delaunay(delaunay(S))
