import math

import numpy as np
import pytest
from scipy.stats import ortho_group

import oracles as o
from phtorus import lyapunov as ly
from phtorus import torus_dynamics as td


def test_cat_spectrum(cat):
    res = ly.full_spectrum(cat, [0.1234, 0.5678], 100_000)
    assert np.allclose(res.exponents, [o.CAT_EXPONENT, -o.CAT_EXPONENT], atol=1e-3)
    assert res.exponents[0] >= res.exponents[1]
    assert res.iterations == 100_000 and res.qr_period == 1


def test_parabolic_shear_has_zero_exponents():
    res = ly.full_spectrum(td.make_standard_map(0.0), [0.3, 0.2], 100_000)
    assert np.all(np.abs(res.exponents) < 5e-3)


def test_product_is_union_of_factor_spectra(cat_std0):
    res = ly.full_spectrum(cat_std0, [0.1, 0.2, 0.3, 0.4], 100_000)
    assert np.allclose(res.exponents, [o.CAT_EXPONENT, 0, 0, -o.CAT_EXPONENT], atol=5e-3)


def test_center_exponents_of_shear_center(cat_std0):
    l1, l2 = ly.center_exponents(cat_std0, [0.1, 0.2, 0.3, 0.4], 100_000)
    assert abs(l1) < 5e-3 and abs(l2) < 5e-3 and l1 >= l2


def test_center_exponents_symmetric_and_reproducible(cat_std01):
    x0 = [0.11, 0.52, 0.33, 0.47]
    a = ly.center_spectrum(cat_std01, x0, 100_000)
    b = ly.center_spectrum(cat_std01, x0, 100_000)
    assert np.array_equal(a.exponents, b.exponents)
    assert a.exponents[0] >= 0 and abs(a.exponents.sum()) < 1e-3


def test_center_exponent_ensemble_reports_modes(cat_std01):
    ens = ly.center_exponent_ensemble(cat_std01, [0, 1, 2], 50_000)
    assert ens.exponents.shape == (3, 2)
    assert np.all(np.abs(ens.exponents.sum(axis=1)) < 1e-3)
    assert isinstance(ens.multimodal, bool)


def test_center_exponents_match_full_spectrum_middle(cat_std01):
    x0 = [0.21, 0.75, 0.13, 0.61]
    full = ly.full_spectrum(cat_std01, x0, 100_000)
    c1, c2 = ly.center_exponents(cat_std01, x0, 100_000)
    assert abs(full.exponents[1] - c1) < 2e-3 and abs(full.exponents[2] - c2) < 2e-3


def test_linear_spectrum_is_log_moduli():
    a = [[2, 1, 0, 0], [1, 1, 0, 0], [0, 0, 3, 2], [0, 0, 1, 1]]
    system = td.make_linear_anosov(a)
    expect = np.sort(np.log(np.abs(np.linalg.eigvals(np.array(a, float)))))[::-1]
    for x0 in ([0.1, 0.2, 0.3, 0.4], [0.9, 0.05, 0.6, 0.31]):
        res = ly.full_spectrum(system, x0, 100_000)
        assert np.max(np.abs(res.exponents - expect)) < 1e-6


def test_exponent_sum_vanishes_at_checkpoints(cat_std01):
    res = ly.full_spectrum(cat_std01, [0.3, 0.1, 0.4, 0.15], 100_000)
    rows = res.convergence_series[res.convergence_series[:, 0] > 1e4]
    assert rows.shape[0] > 0
    assert np.max(np.abs(rows[:, 1:].sum(axis=1))) < 1e-6
    assert res.convergence_series[-1, 0] == res.iterations


def test_frame_and_period_invariance(cat_std01):
    for seed in range(10):
        rng = np.random.default_rng(seed)
        x0 = rng.random(4)
        ref = ly.full_spectrum(cat_std01, x0, 20_000)
        for period in (5, 10):
            frame = ortho_group.rvs(4, random_state=seed)
            alt = ly.full_spectrum(cat_std01, x0, 20_000, qr_period=period, frame=frame)
            tol = 2 * np.hypot(ref.standard_errors, alt.standard_errors) + 1e-12
            assert np.all(np.abs(ref.exponents - alt.exponents) <= tol), (seed, period)


@pytest.mark.parametrize("spec, expect", [
    ([0.96, 0.0, 0.0, -0.96], 0.0),
    ([0.96, 0.01, -0.02, -0.96], 0.01),
])
def test_symmetry_residual_examples(spec, expect):
    assert math.isclose(ly.symmetry_residual(spec), expect, abs_tol=1e-15)


def test_symmetry_residual_odd_length():
    with pytest.raises(ValueError, match="even"):
        ly.symmetry_residual([0.5, 0.0, -0.5])


@pytest.mark.parametrize("kw, msg", [({"n_iter": 999}, "n_iter"), ({"qr_period": 0}, "qr_period"),
                                     ({"qr_period": 21}, "qr_period")])
def test_parameter_ranges(cat, kw, msg):
    args = {"n_iter": 1000, "qr_period": 1}
    args.update(kw)
    with pytest.raises(ValueError, match=msg):
        ly.full_spectrum(cat, [0.1, 0.2], **args)


def test_nonfinite_orbit_names_iterate(cat):
    with pytest.raises(ly.NonFiniteOrbitError) as info:
        ly.full_spectrum(cat, [float("nan"), 0.2], 1000)
    assert info.value.iterate == 0 and "iterate 0" in str(info.value)


def test_center_spectrum_needs_splitting(cat):
    with pytest.raises(ValueError, match="center"):
        ly.center_spectrum(cat, [0.1, 0.2], 1000)
