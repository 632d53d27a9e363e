import math

import pytest
from hypothesis import given, settings, strategies as st

from flatmod.delaunay import isometric
from flatmod.errors import InputError, PreconditionError
from flatmod.surface import FlatSurface, square_torus
from flatmod.surgeries import (SurgerySpec, _insert_connection, _shortest_connection, apply, kite_lengths,
                               reverse, reverse_s2, s1, s2, s2_extension_length, s3_branches, s4_kite,
                               s5_cylinder, stratum_cone_angle)

from conftest import PI, labels_with_angle


def check_round_trip(before, result, tol=1e-6):
    back = reverse(result)
    assert back is not None
    assert isometric(back.surface, before, tol=tol)
    assert back.surface.area() == pytest.approx(before.area(), abs=1e-9)
    assert before.area() - result.surface.area() == pytest.approx(result.defect, abs=1e-9)
    return back


@pytest.mark.parametrize("z0", [0.05 + 0.02j, 0.02, 0.01j, -0.03 + 0.03j])
def test_s1_round_trip(sphere, z0):
    p = labels_with_angle(sphere, PI / 2)[0]
    r = s1(sphere, p, (3, 8), z0)
    angles = sorted(r.surface.cone_angles().values())
    assert angles == pytest.approx(sorted([PI / 2, PI, 3 * PI / 4, 7 * PI / 4]))
    # mu = sin(theta'/2) sin(theta/2) / sin(theta''/2)
    assert r.mu == pytest.approx(math.sin(3 * PI / 8) * math.sin(PI / 4) / math.sin(7 * PI / 8))
    assert r.defect == pytest.approx(r.mu * abs(z0) ** 2)
    assert r.width == pytest.approx(r.data["seam"] / math.sqrt(r.surface.area()))
    check_round_trip(sphere, r)


def test_s1_witness_divides(sphere):
    r = s1(sphere, labels_with_angle(sphere, PI / 2)[0], (3, 8), 0.02)
    w = r.witness
    assert (w.parent.q, w.child.q) == (8, 4)
    assert w.parent.q % w.child.q == 0


def test_s2_round_trip_and_lengths(torus_3pi_pi, thurston2):
    th = thurston2.data
    assert th["L"] / th["l"] == pytest.approx(math.sqrt(2) / 2)
    assert sorted(thurston2.surface.cone_angles().values()) == pytest.approx([PI, 3 * PI / 2, 7 * PI / 2])
    back = check_round_trip(torus_3pi_pi, thurston2)
    assert back.data["L"] == pytest.approx(th["L"])


def test_s2_extension_ratio():
    assert s2_extension_length(7 * PI / 2, 3 * PI / 2, 1.0) == pytest.approx(math.sqrt(2) / 2)
    assert s2_extension_length(23 * PI / 6, PI / 2, 1.0) == pytest.approx(math.sqrt(2))


def test_s2_reverse_blocked_by_marked_point(thurston2):
    S, P = thurston2.surface, thurston2.new_points
    q, p = P["p1''"], P["p1'"]
    c = _shortest_connection(S, q, p)
    m = S.to_mesh()
    _, end_ref, back = _insert_connection(m, c)
    L = s2_extension_length(S.cone_angle(p), S.cone_angle(q), c.length)
    ch, _, _ = m.insert_segment(end_ref, back + S.cone_angle(p) / 2, L / 2)
    X = m.end_label(m.expand(ch)[-1])
    blocked, order = FlatSurface.from_mesh_mapped(m, {X, q, p})
    assert blocked.cone_angle(order[X]) == pytest.approx(2 * PI)
    res, why = reverse_s2(blocked, order[q], order[p], explain=True)
    assert res is None and "extension" in why
    assert reverse_s2(S, q, p, explain=True)[1] == "ok"


def test_s3_round_trip(sphere, devil):
    assert sorted(devil.surface.cone_angles().values()) == pytest.approx([PI, 3 * PI])
    assert devil.surface.genus == 1
    check_round_trip(sphere, devil)


def test_s3_branches():
    assert s3_branches(2 * PI / 3, 4 * PI / 3) == (3, 1, 2, 1)
    assert s3_branches(2 * PI / 3, 4 * PI / 3, M=2) == (6, 2, 4, 2)
    with pytest.raises(PreconditionError):
        s3_branches(math.sqrt(2), 1.0)


def test_s4_kite(square):
    z0 = 0.15 + 0.05j
    k = s4_kite(1j, z0, [(3, 2), (3, 4), (3, 4)])
    l2, l3 = kite_lengths(abs(z0), 3 * PI, 3 * PI / 2, 3 * PI / 2)
    assert l2 == pytest.approx(abs(z0) * math.sqrt(2) / 2) and l3 == pytest.approx(l2)
    assert (k.data["l2"], k.data["l3"]) == pytest.approx((l2, l3))
    assert k.defect == pytest.approx(abs(z0) ** 2 / 2)
    back = reverse(k)
    assert isometric(back.surface, square, tol=1e-6)
    assert back.data["z0"] == pytest.approx(abs(z0))
    # the kite is centrally symmetric: z0 and -z0 give the same surface
    assert isometric(k.surface, s4_kite(1j, -z0, [(3, 2), (3, 4), (3, 4)]).surface, tol=1e-6)


def test_s5_round_trip(thurston2):
    S, P = thurston2.surface, thurston2.new_points
    r = s5_cylinder(S, P["p1'"], P["p1''"], 0.3 + 0.5j)
    assert r.surface.genus == 2
    assert r.surface.area() - S.area() == pytest.approx(r.data["L"] ** 2 * 0.5)
    check_round_trip(S, r)


def test_stratum_cone_angles():
    assert str(stratum_cone_angle("S3", (1, 10), (4, 10))) == "2/5"
    assert str(stratum_cone_angle("S4")) == "1/2"
    assert str(stratum_cone_angle("S1", (3, 4))) == "3/4"
    with pytest.raises(PreconditionError):
        stratum_cone_angle("S5")
    with pytest.raises(InputError):
        stratum_cone_angle("S7")


def test_invalid_splits(sphere, square):
    pi_point = labels_with_angle(sphere, PI)[0]
    with pytest.raises(PreconditionError):
        s1(sphere, pi_point, (1, 8), 0.02)          # the other angle would exceed 2pi
    with pytest.raises(PreconditionError):
        s2(sphere, pi_point, (5, 4), 0.02)          # S2 needs an angle above 2pi
    with pytest.raises(PreconditionError):
        SurgerySpec("S4", split=[(3, 2), (3, 4), (1, 2)])
    with pytest.raises(InputError):
        SurgerySpec("S1", target=0, split=[(1, 2), (1, 2)])
    with pytest.raises(PreconditionError):
        s4_kite(1j, 1.2, [(3, 2), (3, 4), (3, 4)])  # longer than the lattice
    with pytest.raises(InputError):
        apply(SurgerySpec("S1", target=0, split=[(3, 8)], z0=0.02))


def test_spec_json_round_trip():
    spec = SurgerySpec("S4", split=[(3, 2), (3, 4), (3, 4)], z0=0.15 + 0.05j, tau=1j)
    again = SurgerySpec.from_json(spec.to_json())
    assert again == spec
    with pytest.raises(InputError):
        SurgerySpec.from_json({"split": []})


@settings(max_examples=15, deadline=None)
@given(st.floats(0.005, 0.06), st.floats(0, 2 * math.pi), st.sampled_from([(5, 16), (3, 8), (7, 16)]))
def test_s1_small_parameters(sphere, r, phi, split):
    z0 = r * complex(math.cos(phi), math.sin(phi))
    res = s1(sphere, labels_with_angle(sphere, PI / 2)[0], split, z0)
    assert res.surface.n_points == 4
    assert sphere.area() - res.surface.area() == pytest.approx(res.defect, abs=1e-10)
    assert isometric(reverse(res).surface, sphere, tol=1e-6)


# directions along or just off triangulation edges used to leave slivers or leaky chains
@pytest.mark.parametrize("phi", [0.0, 1e-9, 1e-6, 1e-5])
def test_s1_grazing_directions(sphere, phi):
    res = s1(sphere, labels_with_angle(sphere, PI / 2)[0], (5, 16), 0.0356 * complex(math.cos(phi), math.sin(phi)))
    assert res.surface.n_points == 4
    assert isometric(reverse(res).surface, sphere, tol=1e-6)


@pytest.mark.parametrize("phi", [1e-6, 1e-5])
def test_s2_grazing_directions(torus_3pi_pi, phi):
    p = labels_with_angle(torus_3pi_pi, 3 * PI)[0]
    res = s2(torus_3pi_pi, p, (7, 4), 0.02 * complex(math.cos(phi), math.sin(phi)))
    assert isometric(reverse(res).surface, torus_3pi_pi, tol=1e-6)


@pytest.mark.parametrize("tau", [1j, 0.3 + 1.1j, complex(0.5, math.sqrt(3) / 2)])
@pytest.mark.parametrize("phi", [0.0, 1e-9, PI / 4, PI / 2 + 1e-7])
def test_s4_lattice_aligned(tau, phi):
    from flatmod.surface import lattice_torus
    res = s4_kite(tau, 0.1 * complex(math.cos(phi), math.sin(phi)), [(3, 2), (3, 4), (3, 4)])
    assert res.surface.n_points == 3
    assert isometric(reverse(res).surface, lattice_torus(tau), tol=1e-6)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.02, 0.3), st.floats(0, 2 * math.pi))
def test_s4_round_trip_property(square, r, phi):
    res = s4_kite(1j, r * complex(math.cos(phi), math.sin(phi)), [(3, 2), (3, 4), (3, 4)])
    assert 1 - res.surface.area() == pytest.approx(res.defect, abs=1e-10)
    assert isometric(reverse(res).surface, square, tol=1e-6)
