import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

import oracles as o
from phtorus import lyapunov as ly
from phtorus import perturbation as pt
from phtorus import projective_lab as pl
from phtorus import torus_dynamics as td

PI = math.pi
CAT_BLOCK = [[2, 1], [1, 1]]


def _lp_wasserstein(mu, nu):
    """Circle W1 as a transport linear program (independent of the CDF route)."""
    d = np.abs(mu.angles[:, None] - nu.angles[None, :])
    cost = np.minimum(d, PI - d).ravel()
    m, n = mu.angles.size, nu.angles.size
    rows = [np.kron(np.eye(m)[i], np.ones(n)) for i in range(m)]
    cols = [np.kron(np.ones(m), np.eye(n)[j]) for j in range(n)]
    res = linprog(cost, A_eq=np.vstack(rows + cols), b_eq=np.concatenate([mu.weights, nu.weights]),
                  bounds=(0, None), method="highs")
    return res.fun


def _random_measure(rng, size):
    return pl.FiberMeasure(rng.uniform(0, PI, size), rng.random(size) ** 4 + 1e-3)


def test_project_action_examples():
    assert pl.project_action(CAT_BLOCK, 0.0) == pytest.approx(math.atan(0.5))
    assert pl.project_action([[4, 0], [1, 1]], 0.0) == pytest.approx(math.atan(1 / 4))
    assert pl.project_action(np.eye(2), PI - 1e-3) == pytest.approx(PI - 1e-3)
    p = pl.project_action([[0, -1], [1, 0]], pl.ProjectivePoint(0.2, frame="x"))
    assert p.angle == pytest.approx(0.2 + PI / 2) and p.frame == "x"
    assert np.allclose(p.direction, [math.cos(p.angle), math.sin(p.angle)])
    with pytest.raises(ValueError, match="singular"):
        pl.project_action([[1, 2], [2, 4]], 0.3)
    with pytest.raises(ValueError, match="2x2"):
        pl.project_action(np.eye(3), 0.3)


@given(st.floats(0, PI, exclude_max=True), st.integers(0, 2 ** 32 - 1))
def test_projective_action_is_a_group_action(theta, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(2, 2, 2))
    if min(abs(np.linalg.det(a)), abs(np.linalg.det(b))) < 1e-3:
        return
    lhs = pl.project_action(a @ b, theta)
    rhs = pl.project_action(a, pl.project_action(b, theta))
    assert pl.projective_distance(lhs, rhs) < 1e-9
    assert pl.projective_distance(pl.project_action(np.linalg.inv(a), pl.project_action(a, theta)), theta) < 1e-9


def test_reduce_and_distance():
    assert pl.reduce_angle(PI) == 0.0 and pl.reduce_angle(-0.1) == pytest.approx(PI - 0.1)
    assert pl.projective_distance(0.05, PI - 0.05) == pytest.approx(0.1)
    assert pl.projective_distance(0.0, PI / 2) == pytest.approx(PI / 2)


def test_pinching_block_converges_to_expanding_line():
    fd = pl.fiber_dynamics(CAT_BLOCK, 0.1, n=200)
    assert fd.classification == "pinching"
    assert fd.limit_angle == pytest.approx(o.PINCHING_ANGLE, abs=1e-12)
    assert fd.observed_ratio == pytest.approx(o.CAT_STABLE_EIGENVALUE ** 2, rel=1e-3)
    assert fd.steps_to(o.PINCHING_ANGLE, 1e-6) <= 10


def test_pinching_limit_from_many_starts():
    starts = (np.arange(64) + 0.5) * PI / 64
    stable = pl.eigendirections(CAT_BLOCK)["contracting"]
    starts = starts[pl.projective_distance(starts, stable) > 1e-3]
    for t in starts:
        assert pl.fiber_dynamics(CAT_BLOCK, t, n=200).limit_angle == pytest.approx(o.PINCHING_ANGLE, abs=1e-6)


def test_classification_of_other_blocks():
    c, s = math.cos(math.sqrt(2)), math.sin(math.sqrt(2))
    ell = pl.fiber_dynamics([[c, -s], [s, c]], 0.3)
    assert ell.classification == "elliptic" and ell.flatness < pl.FLATNESS_MAX
    assert pl.fiber_dynamics([[1, 1], [0, 1]], 0.3).classification == "parabolic"
    with pytest.raises(ValueError, match="iterate"):
        pl.fiber_dynamics(CAT_BLOCK, 0.1, n=0)


def test_periodic_point_block(cat_std01):
    fd = pl.periodic_fiber_dynamics(cat_std01, np.zeros(4), 1, 0.2, n=500)
    assert np.allclose(fd.period_block, o.STD01_JACOBIAN_AT_ORIGIN, atol=1e-14)
    assert np.allclose(fd.eigenvalues, o.STD01_EIGENVALUES, rtol=1e-12)
    assert fd.classification == "pinching"
    ratio = o.STD01_EIGENVALUES[1] / o.STD01_EIGENVALUES[0]
    assert abs(fd.observed_ratio / ratio - 1) < 0.1
    with pytest.raises(ValueError, match="not periodic"):
        pl.period_block(cat_std01, np.array([0.1, 0.2, 0.3, 0.4]), 1)


def test_wasserstein_examples():
    assert pl.circle_wasserstein(pl.FiberMeasure.point_mass(0.2), pl.FiberMeasure.point_mass(0.3)) == pytest.approx(0.1)
    # closer the other way round the circle
    assert pl.circle_wasserstein(pl.FiberMeasure.point_mass(0.05), pl.FiberMeasure.point_mass(3.1)) == pytest.approx(
        0.05 + PI - 3.1)
    u = pl.FiberMeasure.uniform(64)
    assert pl.circle_wasserstein(u, u) == 0.0
    # mass 1 at 0 against the uniform measure: average circle distance pi/4
    assert pl.circle_wasserstein(pl.FiberMeasure.point_mass(0.0), pl.FiberMeasure.uniform(4096)) == pytest.approx(
        PI / 4, rel=1e-6)


def test_wasserstein_matches_transport_lp(rng):
    for _ in range(20):
        mu, nu = _random_measure(rng, 7), _random_measure(rng, 5)
        assert pl.circle_wasserstein(mu, nu) == pytest.approx(_lp_wasserstein(mu, nu), abs=1e-9)


@given(st.integers(0, 2 ** 32 - 1))
def test_wasserstein_is_a_metric(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (_random_measure(rng, rng.integers(1, 12)) for _ in range(3))
    ab, ba = pl.circle_wasserstein(a, b), pl.circle_wasserstein(b, a)
    assert ab >= 0 and abs(ab - ba) < 1e-12
    assert ab <= pl.circle_wasserstein(a, c) + pl.circle_wasserstein(c, b) + 1e-12
    assert pl.circle_wasserstein(a, a) == 0.0


@given(st.floats(-1, 1))
def test_wasserstein_rotation_invariant(shift):
    rng = np.random.default_rng(7)
    mu, nu = _random_measure(rng, 6), _random_measure(rng, 6)
    rot = lambda m: pl.FiberMeasure(m.angles + shift, m.weights)
    assert abs(pl.circle_wasserstein(rot(mu), rot(nu)) - pl.circle_wasserstein(mu, nu)) < 1e-12


def test_fiber_measure_validation():
    m = pl.FiberMeasure([0.1, 0.2, 0.3], [1, 2, 3])
    assert m.weights.sum() == pytest.approx(1.0)
    with pytest.raises(ValueError, match="nonnegative"):
        pl.FiberMeasure([0.1], [-1.0])
    with pytest.raises(ValueError, match="zero mass"):
        pl.FiberMeasure([0.1, 0.2], [0.0, 0.0])
    with pytest.raises(ValueError, match="shape"):
        pl.FiberMeasure([0.1, 0.2], [1.0])
    assert pl.FiberMeasure.uniform(8).total_variation_to_uniform(8) == pytest.approx(0.0, abs=1e-15)


def test_transport_of_point_masses():
    mu = pl.transport(pl.FiberMeasure.point_mass(0.0), CAT_BLOCK)
    assert mu.angles[0] == pytest.approx(math.atan(0.5))
    h = pl.transport_histogram(np.eye(16)[3], np.eye(2))
    assert np.array_equal(h, np.eye(16)[3])


def test_pinching_transport_collapses_measures():
    u = pl.FiberMeasure.uniform(256)
    pushed = u
    for _ in range(20):
        pushed = pl.transport(pushed, CAT_BLOCK)
    target = pl.FiberMeasure.point_mass(o.PINCHING_ANGLE)
    assert pl.circle_wasserstein(pushed, target) < 1e-3 < pl.circle_wasserstein(u, target)


def test_elliptic_rotation_spreads_a_point_mass():
    c, s = math.cos(math.sqrt(2)), math.sin(math.sqrt(2))
    fd = pl.fiber_dynamics([[c, -s], [s, c]], 0.0, n=20_000)
    early = pl.FiberMeasure(fd.trajectory[:200], np.ones(200)).total_variation_to_uniform(32)
    late = pl.FiberMeasure(fd.trajectory, np.ones(fd.trajectory.size)).total_variation_to_uniform(32)
    assert late < early


def test_empirical_measure_and_residual(cat_std01):
    field = pl.empirical_invariant_measure(cat_std01, [0.1, 0.2, 0.3, 0.4], n_orbit=20_000, bins=32, grid=4)
    assert field.counts.shape == (4, 4, 32)
    assert field.aggregate().weights.sum() == pytest.approx(1.0)
    rows = field.rows()
    assert rows and all(0 <= r[3] <= 1 for r in rows)
    res = pl.invariance_residual(cat_std01, field, n_pairs=30, max_offset=0.02)
    assert res.pairs_used + res.skipped_empty + res.skipped_holonomy == 30
    assert res.mean is not None and 0 <= res.mean < PI / 2
    with pytest.raises(ValueError, match="10\\^4"):
        pl.empirical_invariant_measure(cat_std01, np.zeros(4), n_orbit=100)


def test_residual_shrinks_with_orbit_length(cat_std01):
    means = []
    for n in (10_000, 100_000):
        f = pl.empirical_invariant_measure(cat_std01, [0.1, 0.2, 0.3, 0.4], n_orbit=n)
        means.append(pl.invariance_residual(cat_std01, f, n_pairs=60).mean)
    assert means[1] < means[0]


def test_projective_exponent_constant_blocks(cat):
    rot = td.make_product(cat, td.make_linear_automorphism([[0, -1], [1, 0]]))
    assert pl.projective_exponent(rot, np.full(4, 0.1), 0.3, n=2000) == pytest.approx(0.0, abs=1e-12)
    hyp = td.make_product(cat, td.make_linear_automorphism(CAT_BLOCK))
    assert pl.projective_exponent(hyp, np.full(4, 0.1), 0.3, n=5000) == pytest.approx(
        -2 * o.CAT_EXPONENT, abs=1e-2)


def test_projective_exponent_bounded_by_center_gap(cat_std01):
    x0 = np.array([0.1, 0.2, 0.3, 0.4])
    lam_plus, lam_minus = ly.center_exponents(cat_std01, x0, n_iter=100_000)
    e = pl.projective_exponent(cat_std01, x0, 0.3, n=100_000)
    assert abs(e) <= lam_plus - lam_minus + 0.01


def test_separation_null_case(cat_std01, homoclinic):
    s = pt.zero_schedule(pt.schedule(homoclinic.recurrence.c))
    rep = pl.separation_witness(cat_std01, s, [3, 4], homoclinic)
    assert all(r.ok and r.witness == 0.0 and r.ratio is None for r in rep.rows)
    assert rep.a == pytest.approx(pl.eigendirections(o.STD01_JACOBIAN_AT_ORIGIN)["expanding"])


def test_separation_default_schedule(cat_std01, homoclinic):
    s = pt.schedule(homoclinic.recurrence.c)
    rep = pl.separation_witness(cat_std01, s, [3, 5], homoclinic)
    for r in rep.rows:
        assert r.ok and r.witness > 0 and r.ratio < 0.5
        assert r.witness >= r.lower_bound
    assert rep.witness_positive_after_threshold() and rep.witness_bound_holds()
    assert rep.rows[0].to_dict()["k"] == 3


def test_separation_needs_pinching_point(cat_rot90, homoclinic):
    with pytest.raises(ValueError, match="pinching"):
        pl.separation_witness(cat_rot90, pt.schedule(0.13), [3], homoclinic)
