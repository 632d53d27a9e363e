import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flatmod.errors import InputError
from flatmod.surface import build_from_polygon, doubled_polygon, regular_polygon_sphere, square_torus
from flatmod.surgeries import s4_kite
from flatmod.veech import (HermitianForm, extend_with_surgery, in_ring, is_gaussian_integer_matrix,
                           signature, surface_form, transition_map)


def random_perturbation_error(S, rng, count=20, scale=0.01):
    H, par = surface_form(S)
    worst = 0.0
    for _ in range(count):
        v = par.base + scale * (rng.normal(size=par.dim) + 1j * rng.normal(size=par.dim))
        worst = max(worst, abs(build_from_polygon(par.model_at(v)).area() - H(v)))
    return worst


@pytest.fixture(scope="module")
def kite_torus():
    return s4_kite(1j, 0.15 + 0.05j, [(3, 2), (3, 4), (3, 4)]).surface


def test_three_point_sphere_form(sphere):
    H, par = surface_form(sphere)
    assert H.dim == 1 and H.H[0, 0].real > 0
    assert H(par.base) == pytest.approx(sphere.area())


def test_form_matches_area_under_perturbation(sphere, torus_3pi_pi, kite_torus):
    rng = np.random.default_rng(1)
    for S in (sphere, torus_3pi_pi, kite_torus, regular_polygon_sphere(5)):
        assert random_perturbation_error(S, rng) < 1e-8


def test_signatures(torus_3pi_pi, kite_torus, quad_sphere):
    assert signature(surface_form(torus_3pi_pi)[0]).pair() == (1, 1)
    assert signature(surface_form(kite_torus)[0]).pair() == (1, 2)
    assert signature(surface_form(quad_sphere)[0]).pair() == (1, 1)
    assert signature(np.eye(3)).pair() == (3, 0)
    assert signature(np.diag([1.0, 0.0])).degenerate


@pytest.mark.parametrize("n", [4, 5, 6, 7])
def test_sphere_signature(n):
    pts = [complex(math.cos(2 * math.pi * k / n), 1.3 * math.sin(2 * math.pi * k / n)) for k in range(n)]
    assert signature(surface_form(doubled_polygon(pts))[0]).pair() == (1, n - 3)


def test_extend_with_surgery():
    H = HermitianForm(np.diag([1.0, -1.0]))
    E = extend_with_surgery(H, 0.3)
    assert E(np.array([1, 0, 0.5])) == pytest.approx(1 - 0.3 * 0.25)
    assert signature(E).pair() == (1, 2)
    with pytest.raises(InputError):
        extend_with_surgery(H, 0.0)


def test_non_hermitian_rejected():
    with pytest.raises(InputError):
        HermitianForm([[1, 1], [0, 1]])


def test_transition_maps(square, kite_torus):
    HA, pA = surface_form(square, 0)
    assert np.allclose(transition_map(pA, pA), np.eye(pA.dim))
    HB, pB = surface_form(square, 1)
    g = transition_map(pA, pB)
    assert np.allclose(g.conj().T @ HA.H @ g, HB.H, atol=1e-8)
    assert is_gaussian_integer_matrix(g) and abs(abs(np.linalg.det(g)) - 1) < 1e-9
    HA, pA = surface_form(kite_torus, 0)
    for b in range(1, 6):
        HB, pB = surface_form(kite_torus, b)
        g = transition_map(pA, pB)
        assert np.allclose(g.conj().T @ HA.H @ g, HB.H, atol=1e-8)
        assert in_ring(g, 4)


def test_ring_membership():
    w = np.exp(2j * math.pi / 3)
    assert in_ring([[2 + 3 * w]], 3) and in_ring([[1 - w]], 6)
    assert not in_ring([[0.5]], 4)
    with pytest.raises(InputError):
        in_ring([[1]], 5)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.6, 1.4), min_size=5, max_size=5))
def test_pentagon_spheres(radii):
    pts = [r * complex(math.cos(2 * math.pi * k / 5), math.sin(2 * math.pi * k / 5)) for k, r in enumerate(radii)]
    S = doubled_polygon(pts)
    H, par = surface_form(S)
    assert signature(H).pair() == (1, 2)
    assert H(par.base) == pytest.approx(S.area(), rel=1e-9)
