import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles as o
from phtorus import holonomy as hol
from phtorus import perturbation as pt
from phtorus import torus_dynamics as td

X0 = np.array([0.2, 0.7, 0.3, 0.4])
XT = np.array([0.3, 0.6, 0.5, 0.5])   # inside the twist ball


@pytest.fixture(scope="module")
def twisted(cat_rot90):
    tw = pt.build_twist([0.3, 0.6, 0.5, 0.5], 0.2, 0.4, 2, cat_rot90.center_plane)
    return pt.perturbed_system(cat_rot90, tw)


def test_partner_follows_stable_eigenvector(cat_std01):
    y = hol.stable_partner(cat_std01, X0, 0.1)
    expected = td.as_point(X0[:2] + 0.1 * np.array(o.CAT_STABLE_VECTOR))
    assert np.allclose(y[:2], expected, atol=1e-15)
    assert np.array_equal(y[2:], X0[2:])
    u = hol.unstable_partner(cat_std01, X0, -0.05)
    assert np.allclose(u[:2], td.as_point(X0[:2] - 0.05 * np.array(o.CAT_UNSTABLE_VECTOR)), atol=1e-15)


def test_partner_offset_limits(cat_std01):
    with pytest.raises(ValueError, match="leaf radius"):
        hol.stable_partner(cat_std01, X0, 0.3)
    with pytest.raises(ValueError, match="leaf coordinates"):
        hol.stable_partner(cat_std01, X0, [0.1, 0.1])
    with pytest.raises(ValueError, match="leaf kind"):
        hol._partner(cat_std01, X0, 0.1, "center")


def test_leaf_contraction(cat_std01):
    y = hol.stable_partner(cat_std01, X0, 0.1)
    chk = hol.leaf_contraction_check(cat_std01, X0, y, "stable", 20)
    assert chk.passed
    assert math.isclose(chk.final_distance, 0.1 * o.CAT_STABLE_EIGENVALUE ** 20, rel_tol=1e-6)
    u = hol.unstable_partner(cat_std01, X0, 0.1)
    assert hol.leaf_contraction_check(cat_std01, X0, u, "unstable", 20).passed


def test_partner_on_twisted_system_stays_on_leaf(twisted):
    x = np.array([0.3, 0.6, 0.5, 0.45])
    y = hol.stable_partner(twisted, x, 0.1)
    xs, ys = hol.pair_orbits(twisted, x, y, "stable", 40)
    d = [td.torus_distance(a, b) for a, b in zip(xs, ys)]
    assert d[-1] < 1e-12
    assert hol.leaf_contraction_check(twisted, x, y, "stable", 20).passed


def test_off_leaf_pair_rejected(cat_std01):
    y = X0.copy()
    y[0] += 0.01
    with pytest.raises(ValueError, match="common stable leaf"):
        hol.pair_orbits(cat_std01, X0, y, "stable", 5)


@pytest.mark.parametrize("fixture", ["cat_std0", "cat_rot90"])
def test_constant_center_holonomy_is_identity(fixture, request):
    system = request.getfixturevalue(fixture)
    y = hol.stable_partner(system, X0, 0.15)
    for n in (0, 1, 5, 30):
        assert np.array_equal(hol.holonomy_A_n(system, X0, y, n), np.eye(2))
    h = hol.stable_holonomy(system, X0, y)
    assert np.array_equal(h.matrix, np.eye(2))


def test_holonomy_from_a_point_to_itself(cat_std01):
    h = hol.stable_holonomy(cat_std01, X0, X0)
    assert np.array_equal(h.matrix, np.eye(2))
    assert hol.unstable_holonomy(cat_std01, X0, X0).norm == 1.0


def test_product_holonomy_is_trivial(cat_std01):
    # leaf partners share center coordinates and the center factor ignores the base
    y = hol.stable_partner(cat_std01, X0, 0.2)
    h = hol.stable_holonomy(cat_std01, X0, y)
    assert np.array_equal(h.matrix, np.eye(2)) and not np.any(h.history)


def test_holonomy_converges_geometrically(twisted):
    y = hol.stable_partner(twisted, XT, 0.2)
    h = hol.stable_holonomy(twisted, XT, y)
    assert h.residual < hol.DEFAULT_TOL and h.n_used < hol.MAX_STEPS
    fit = hol.fit_decay([h.history])
    assert fit.ratio < 1
    assert not np.allclose(h.matrix, np.eye(2))


def test_convergence_failure_carries_history(twisted):
    y = hol.stable_partner(twisted, XT, 0.2)
    with pytest.raises(hol.HolonomyConvergenceError) as err:
        hol.stable_holonomy(twisted, XT, y, tol=1e-300, n_max=10)
    assert err.value.history.shape == (10,)
    with pytest.raises(ValueError, match="tol"):
        hol.stable_holonomy(twisted, XT, y, tol=0.0)


def test_groupoid_and_reversal(twisted):
    y = hol.stable_partner(twisted, XT, 0.1)
    z = hol.stable_partner(twisted, XT, 0.2)
    assert hol.groupoid_residual(twisted, XT, y, z) < 1e-10
    forward = hol.stable_holonomy(twisted, XT, z)
    back = hol.stable_holonomy(twisted, z, XT)
    assert np.linalg.norm(back.matrix @ forward.matrix - np.eye(2), 2) < 1e-7
    u = hol.unstable_partner(twisted, XT, 0.1)
    w = hol.unstable_partner(twisted, XT, -0.1)
    assert hol.groupoid_residual(twisted, u, XT, w, "unstable") < 1e-10


_TWISTED = pt.perturbed_system(
    td.make_product(td.make_linear_anosov([[2, 1], [1, 1]]), td.make_linear_automorphism([[0, -1], [1, 0]])),
    pt.build_twist([0.3, 0.6, 0.5, 0.5], 0.2, 0.4, 2, (2, 3)))


@given(st.floats(0.15, 0.45), st.floats(0.45, 0.75), st.floats(-0.12, 0.12), st.floats(-0.12, 0.12),
       st.sampled_from(hol.LEAF_KINDS))
def test_groupoid_property(a, b, s, t, kind):
    x = np.array([a, b, 0.5, 0.5])
    y = hol._partner(_TWISTED, x, s, kind)
    z = hol._partner(_TWISTED, y, t, kind)
    assert hol.groupoid_residual(_TWISTED, x, y, z, kind) < 1e-9


def test_equivariance(twisted):
    for kind in hol.LEAF_KINDS:
        y = hol._partner(twisted, XT, 0.15, kind)
        assert hol.equivariance_residual(twisted, XT, y, kind) < 1e-10


def test_leg_subdivision_matches_direct(twisted):
    y = hol.stable_partner(twisted, XT, 0.1)
    z = hol.stable_partner(twisted, y, 0.1)
    direct = hol.stable_holonomy(twisted, XT, z)
    split = hol.leg_holonomy(twisted, XT, z, "stable", max_length=0.1 + 1e-9)
    assert len(split.legs) == 2
    assert np.linalg.norm(direct.matrix - split.matrix, 2) < 1e-10


def test_path_validation():
    p = np.zeros(4)
    with pytest.raises(ValueError, match="leg types"):
        hol.SuPath((p, p), ())
    with pytest.raises(ValueError, match="'stable' or 'unstable'"):
        hol.SuPath((p, p), ("center",))
    path = hol.SuPath((p, p + 0.1, p + 0.2), ("stable", "unstable"))
    first, second = path.split(1)
    assert len(first) == 2 and second.leg_types == ("unstable",)
    assert path.reversed().leg_types == ("unstable", "stable")


def test_trivial_path_holonomy(cat_std01):
    h = hol.compose_along_path(cat_std01, hol.SuPath((X0,), ()))
    assert np.array_equal(h.matrix, np.eye(2))


def test_homoclinic_point_on_cat(cat):
    path = hol.find_homoclinic_su_path(cat, 2)
    assert np.allclose(path.z, o.HOMOCLINIC_Z, atol=1e-12)
    assert path.lattice_vector == (1, 0)
    a, b = path.first_coordinate_coefficients(cat)
    assert math.isclose(a, o.HOMOCLINIC_A, rel_tol=1e-12)
    assert math.isclose(b, o.HOMOCLINIC_B, rel_tol=1e-12)
    assert np.array_equal(path.nodes[0], path.p) and np.allclose(path.nodes[-1], 0)
    assert max(path.leg_lengths()) <= hol.LEAF_RADIUS + 1e-12
    assert all(c.passed for c in hol.verify_path(cat, path))


def test_homoclinic_on_product(homoclinic, cat_std01):
    assert np.allclose(homoclinic.z[:2], o.HOMOCLINIC_Z, atol=1e-12)
    assert np.array_equal(homoclinic.z[2:], [0.0, 0.0])
    zeta1, zeta2 = homoclinic.zetas()
    assert set(zeta1.leg_types) == {"stable"} and set(zeta2.leg_types) == {"unstable"}
    assert hol.verify_path(cat_std01, homoclinic)


def test_homoclinic_lattice_window(cat):
    with pytest.raises(ValueError, match="no solution"):
        hol.find_homoclinic_su_path(cat, 0)
    with pytest.raises(ValueError, match="no solution"):
        hol.find_homoclinic_su_path(cat, 2, lattice_vector=(0, 0))
    with pytest.raises(ValueError, match="linear Anosov"):
        hol.find_homoclinic_su_path(td.make_standard_map(0.1), 2)


def test_recurrence_constant(cat):
    path = hol.find_homoclinic_su_path(cat, 2)
    rec = path.recurrence
    assert rec.c > 0 and rec.stable
    wider = hol.recurrence_constant(cat, path, j_split=40)
    assert abs(wider.c - rec.c) <= 0.1 * rec.c
    rows = hol.recurrence_table(cat, path, 5)
    assert min(r[2] for r in rows) >= rec.c - 1e-12


def test_varsigma_fit():
    nu, alpha = 0.38, 0.8
    assert hol.fit_varsigma(nu ** alpha, alpha, nu).clipped == pytest.approx(0.0, abs=1e-12)
    assert hol.fit_varsigma(1.0, alpha, nu).clipped == 1.0
    fast = hol.fit_varsigma(nu ** (2 * alpha), alpha, nu)
    assert fast.raw < 0 and fast.clipped == 0.0
    half = hol.fit_varsigma(nu ** (0.5 * alpha), alpha, nu)
    assert half.clipped == pytest.approx(0.5)


def test_decay_fit_on_exact_geometric_history():
    hist = [2.0 * 0.3 ** np.arange(20)]
    fit = hol.fit_decay(hist)
    assert fit.ratio == pytest.approx(0.3) and fit.r_squared == pytest.approx(1.0)
    with pytest.raises(ValueError, match="not enough"):
        hol.fit_decay([np.zeros(10)])


def test_norm_constant(twisted, cat_std01, rng):
    hs = []
    for _ in range(10):
        x = np.array([*rng.uniform(0.2, 0.4, 2), 0.5, 0.5])
        hs.append(hol.stable_holonomy(twisted, x, hol.stable_partner(twisted, x, rng.uniform(-0.2, 0.2))))
    fit = hol.fit_norm_constant(hs, 0.5)
    assert all(h.norm <= 1 + fit.c_hat * h.distance ** 0.5 + 1e-12 for h in hs)
    with pytest.raises(ValueError):
        hol.fit_norm_constant([hol.stable_holonomy(cat_std01, X0, X0)], 0.5)


def test_compare_holonomies_same_map(cat_std01, homoclinic):
    cmp = hol.compare_holonomies(cat_std01, cat_std01, homoclinic, homoclinic, beta=0.0)
    assert cmp.total == 0.0 and cmp.compensated == 0.0
    with pytest.raises(ValueError, match="mismatched"):
        hol.compare_holonomies(cat_std01, cat_std01, homoclinic, homoclinic.reversed())
