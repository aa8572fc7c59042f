"""Ambit fields over a stable basis: geometry, exponent bundle, coupling.

Oracles:

  * cone + constant kernel + constant sigma gives the zeroth quadrature
    in closed form c_A eps^2, so its slope is exactly 2;
  * constant-kernel slab field is a pure stable integral over a region of
    Lebesgue measure 2t, checked against the exact stable CF;
  * constant sigma and b make the frozen-coefficient approximation exact
    for every eps, including eps = t;
  * erasing the record after t - eps cannot change the surrogate part.
"""

import dataclasses

import numpy as np
import pytest

import ambitlab.ambit as am
import ambitlab.levy as lv
from ambitlab.montecarlo import empirical_cf, path_rng


EPS = np.geomspace(1e-3, 0.5, 10)


@pytest.fixture(scope="module")
def model():
    return lv.make_levy_model(1.2, 0.5, 0.5, T=1.0, domain=((-1.0, 1.0),))


@pytest.fixture(scope="module")
def cone_spec():
    return am.make_ambit_spec(ambit_set=am.make_cone(1.0, 1.0),
                              kernel_g=am.constant_kernel(1.0),
                              sigma=am.constant_field(1.0),
                              b=am.constant_field(0.0))


@pytest.fixture(scope="module")
def reference_spec():
    return am.make_ambit_spec(ambit_set=am.make_cone(1.0, 1.0),
                              kernel_g=am.power_kernel(0.5),
                              sigma=am.weierstrass_field(delta1=0.5,
                                                         delta2=0.5),
                              b=am.constant_field(0.0))


# ---------------------------------------------------------------------------
# geometry and field primitives
# ---------------------------------------------------------------------------


def test_cone_geometry():
    cone = am.make_cone(2.0, 0.5)
    assert cone.half_width(0.04) == pytest.approx(2.0 * 0.04**0.5)
    assert cone.max_half_width(1.0) == pytest.approx(2.0)
    with np.errstate(invalid="ignore"):
        ind = cone.indicator(1.0, 0.0, np.array([0.99, 0.99, 1.5]),
                             np.array([0.1, 0.5, 0.0]))
    assert ind.tolist() == [1.0, 0.0, 0.0]
    with pytest.raises(ValueError, match="aperture"):
        am.make_cone(-1.0)
    with pytest.raises(ValueError, match="zeta"):
        am.make_cone(1.0, -0.5)


def test_slab_geometry():
    slab = am.make_slab(1.5)
    assert slab.half_width(0.7) == 1.5
    assert slab.indicator(1.0, 0.0, np.array([0.5]),
                          np.array([1.4]))[0] == 1.0


def test_kernel_families():
    g = am.power_kernel(0.5, 2.0)
    assert g(1.0, np.array([0.75]), 0.0, np.array([0.0]))[0] \
        == pytest.approx(2.0 * 0.25 ** -0.5)
    assert g.time_power == pytest.approx(-0.5)
    bump = am.bump_kernel(0.7, 1.5)
    assert bump.time_power == 0.0
    assert bump(1.0, np.array([0.5]), 0.0, np.array([0.0]))[0] \
        == pytest.approx(1.5)
    # smooth bump profile: negligible several widths out
    assert bump(1.0, np.array([0.5]), 0.0, np.array([5.0]))[0] < 1e-10
    with pytest.raises(ValueError, match="theta"):
        am.power_kernel(0.0)
    with pytest.raises(ValueError, match="width"):
        am.bump_kernel(-1.0)


def test_field_specs():
    assert am.constant_field(2.0).is_constant
    w = am.weierstrass_field(delta1=0.5, delta2=0.5)
    assert not w.is_constant
    with pytest.raises(ValueError, match="(0, 1)|lie in"):
        am.weierstrass_field(delta1=1.5)
    with pytest.raises(ValueError, match="levels"):
        am.weierstrass_field(levels=1)
    with pytest.raises(ValueError, match="constant"):
        am.field_holder_fit(am.constant_field(1.0),
                            np.geomspace(1e-3, 1e-2, 4), 8,
                            path_rng(0, "h", 0))


def test_default_beta_gamma_ordering():
    for a in (0.3, 0.8, 1.0, 1.2, 1.7, 1.95):
        beta, gamma = am.default_beta_gamma(a)
        assert 0 < beta < a < gamma <= 2.0


# ---------------------------------------------------------------------------
# exponent bundle
# ---------------------------------------------------------------------------


def test_cone_quadrature_closed_form(model, cone_spec):
    bundle = am.exponent_conditions(cone_spec, model, EPS, t=1.0)
    assert bundle.gamma0.slope == pytest.approx(2.0, abs=1e-8)
    assert np.allclose(bundle.integrals["gamma0"], EPS**2, rtol=1e-12)
    assert bundle.gammabar == float("inf")
    assert bundle.verdict


def test_reference_spec_remark_rules(model, reference_spec):
    b2 = am.exponent_conditions(reference_spec, model, EPS,
                                beta=0.8, gamma=2.0, t=1.0)
    # gammabar1 = (1 + zeta - theta gamma)/gamma = 0.5 here, so
    # gamma1 = gammabar1 + delta1 and gamma2 = gammabar1 + delta2 * zeta
    assert b2.gamma1.slope == pytest.approx(1.0, abs=1e-6)
    assert b2.gamma2.slope == pytest.approx(1.0, abs=1e-6)
    assert b2.gamma0.slope == pytest.approx(1.4, abs=1e-6)
    assert b2.gammabar == pytest.approx(1.0, abs=1e-6)
    assert b2.gamma3.flag == "degenerate"
    assert b2.gamma4.flag == "degenerate"
    assert not b2.verdict  # 1.0 / 1.4 < 1 / alpha = 1 / 1.2


def test_five_condition_bundle(model):
    spec5 = am.make_ambit_spec(
        ambit_set=am.make_cone(1.0, 1.0),
        kernel_g=am.bump_kernel(0.7),
        kernel_h=am.power_kernel(0.3),
        sigma=am.weierstrass_field(delta1=0.4, delta2=0.6),
        b=am.weierstrass_field(delta1=0.3, delta2=0.7))
    b5 = am.exponent_conditions(spec5, model, EPS, t=1.0)
    for name in ("gamma1", "gamma2", "gamma3", "gamma4"):
        assert getattr(b5, name).flag == "ok"
    assert b5.gamma3.slope == pytest.approx(2.0, abs=1e-6)
    assert b5.gamma4.slope == pytest.approx(2.4, abs=1e-6)


def test_cone_aperture_homogeneity(model, cone_spec):
    wide = am.make_ambit_spec(ambit_set=am.make_cone(2.0, 1.0),
                              kernel_g=am.constant_kernel(1.0),
                              sigma=am.constant_field(1.0),
                              b=am.constant_field(0.0))
    b1 = am.exponent_conditions(cone_spec, model, EPS, t=1.0)
    b2 = am.exponent_conditions(wide, model, EPS, t=1.0)
    assert np.allclose(b2.integrals["gamma0"] / b1.integrals["gamma0"],
                       2.0, rtol=1e-12)
    assert b2.gamma0.slope == pytest.approx(b1.gamma0.slope, abs=1e-10)


def test_divergent_kernel_names_the_condition(model):
    hot = am.make_ambit_spec(ambit_set=am.make_slab(1.0),
                             kernel_g=am.power_kernel(0.9),
                             sigma=am.constant_field(1.0),
                             b=am.constant_field(0.0))
    with pytest.raises(ValueError, match="gamma0"):
        am.exponent_conditions(hot, model, EPS, t=1.0)


def test_exponent_validation(model, cone_spec):
    with pytest.raises(ValueError, match=">= 4"):
        am.exponent_conditions(cone_spec, model, EPS[:3], t=1.0)
    with pytest.raises(ValueError, match="in \\(0, t\\]"):
        am.exponent_conditions(cone_spec, model, np.geomspace(0.01, 2.0, 6),
                               t=1.0)
    with pytest.raises(ValueError, match="beta"):
        am.exponent_conditions(cone_spec, model, EPS, beta=1.3, gamma=2.0,
                               t=1.0)
    weighted = lv.make_levy_model(1.2, 0.5, 0.5,
                                  weight=lambda s, y: np.ones_like(s),
                                  weight_bound=1.0)
    with pytest.raises(ValueError, match="weight"):
        am.exponent_conditions(cone_spec, weighted, EPS, t=1.0)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def test_zero_fields_return_start_value(model):
    spec = am.make_ambit_spec(ambit_set=am.make_slab(1.0),
                              sigma=am.constant_field(0.0),
                              b=am.constant_field(0.0), x0=3.25)
    assert am.evaluate(spec, model, 1.0, 0.0, path_rng(1, "v", 0)) == 3.25


def test_pure_drift_integrates_the_set(model):
    # g = 0, h = 1, b = 1 on [0, t] x [x-1, x+1]: X = x0 + 2t
    spec = am.make_ambit_spec(ambit_set=am.make_slab(1.0),
                              kernel_g=am.constant_kernel(0.0),
                              kernel_h=am.constant_kernel(1.0),
                              sigma=am.constant_field(1.0),
                              b=am.constant_field(1.0), x0=0.5)
    v = am.evaluate(spec, model, 1.0, 0.0, path_rng(1, "v", 1))
    assert v == pytest.approx(2.5, rel=1e-8)


def test_sampling_is_one_dimensional_only():
    m2 = lv.make_levy_model(1.2, 0.5, 0.5,
                            domain=((-1.0, 1.0), (-1.0, 1.0)))
    spec = am.make_ambit_spec(ambit_set=am.make_slab(1.0))
    with pytest.raises(ValueError, match="d = 1"):
        am.make_discretization(spec, m2, 1.0, 0.0)


def test_slab_field_matches_stable_cf(model):
    """Constant-kernel slab value is stable(alpha) with A = c_sum K 2t."""
    lite = lv.make_levy_model(1.2, 1 / 60, 1 / 60, T=1.0,
                              domain=((-1.0, 1.0),))
    spec = am.make_ambit_spec(ambit_set=am.make_slab(1.0),
                              kernel_g=am.constant_kernel(1.0),
                              sigma=am.constant_field(1.0),
                              b=am.constant_field(0.0))
    disc = am.make_discretization(spec, lite, 1.0, 0.0)
    vals = lv.sample_integral(disc.box_model, lambda s, y: np.ones_like(s),
                              path_rng(7, "cfx", 0), n_draws=40_000,
                              tau=disc.tau, cells=disc.cells)
    A = lite.c_sum * lv.kappa_alpha(lite.alpha) * 2.0
    for xi in (0.5, 1.0, 2.0, 8.0):
        phi, se = empirical_cf(vals, np.array([xi]))
        assert abs(abs(phi[0]) - np.exp(-A * xi**lite.alpha)) < 5.0 * se[0]


# ---------------------------------------------------------------------------
# frozen-coefficient coupling
# ---------------------------------------------------------------------------


def test_constant_coefficients_freeze_exactly(model):
    spec = am.make_ambit_spec(ambit_set=am.make_cone(1.0, 1.0),
                              kernel_g=am.power_kernel(0.5),
                              sigma=am.constant_field(1.3),
                              b=am.constant_field(0.7), x0=0.2)
    grid = (0.125, 0.25, 0.5, 1.0)
    disc = am.make_discretization(spec, model, 1.0, 0.0, eps_grid=grid)
    for i in range(5):
        path = am.make_path(spec, model, 1.0, 0.0, path_rng(3, "c", i),
                            disc=disc)
        for e in grid:  # includes eps = t
            parts = am.approx_parts(path, e)
            assert parts.value == pytest.approx(path.value, abs=1e-10,
                                                rel=1e-10)


def test_approx_parts_validation(model, reference_spec):
    disc = am.make_discretization(reference_spec, model, 1.0, 0.0,
                                  eps_grid=(0.25,))
    path = am.make_path(reference_spec, model, 1.0, 0.0,
                        path_rng(4, "w", 5), disc=disc)
    with pytest.raises(ValueError, match="eps"):
        am.approx_parts(path, 2.0)
    with pytest.raises(ValueError, match="eps_grid"):
        am.approx_parts(path, 0.17)


def test_erased_record_keeps_surrogate(model):
    """U^eps is measurable before the cut: erasing the slab leaves it."""
    spec = am.make_ambit_spec(ambit_set=am.make_cone(1.0, 1.0),
                              kernel_g=am.power_kernel(0.5),
                              sigma=am.weierstrass_field(),
                              b=am.weierstrass_field(base=0.3))
    disc = am.make_discretization(spec, model, 1.0, 0.0, eps_grid=(0.25,))
    path = am.make_path(spec, model, 1.0, 0.0, path_rng(4, "w", 0),
                        disc=disc)
    parts = am.approx_parts(path, 0.25)
    erased = dataclasses.replace(path,
                                 record=path.record.erase_after(0.75))
    parts_e = am.approx_parts(erased, 0.25)
    assert parts.u_eps == parts_e.u_eps
    assert parts_e.slab_noise == 0.0
    # u_eps already folds in the frozen drift; the slab adds the noise term
    assert parts.value == pytest.approx(parts.u_eps
                                        + parts.sigma_frozen
                                        * parts.slab_noise, rel=1e-12)


def test_coupling_triangle_replay(model):
    """|X - X^eps| decomposes as a replayed gap integral plus a drift gap."""
    spec = am.make_ambit_spec(ambit_set=am.make_cone(1.0, 1.0),
                              kernel_g=am.power_kernel(0.5),
                              sigma=am.weierstrass_field(),
                              b=am.weierstrass_field(base=0.3))
    disc = am.make_discretization(spec, model, 1.0, 0.0, eps_grid=(0.25,))
    for i in range(10):
        path = am.make_path(spec, model, 1.0, 0.0, path_rng(5, "tri", i),
                            disc=disc)
        parts = am.approx_parts(path, 0.25)
        lhs = abs(path.value - parts.value)

        def gap_int(s, y):
            sig = path.sigma_mid[disc.cell_index(s, y)]
            space = am._space(y)
            ind = spec.ambit_set.indicator(1.0, 0.0, s, space)
            gv = spec.kernel_g(1.0, s, 0.0, space)
            return ind * gv * (sig - parts.sigma_frozen) * (s > 0.75 + 1e-15)

        gap = lv.replay_integral(disc.box_model, path.record, gap_int)[0]
        slab = path.record.cells.s_mid > 0.75 + 1e-15
        drift_gap = float(np.sum(path.drift_cell[slab] * path.b_mid[slab])) \
            - parts.drift_frozen
        assert lhs == pytest.approx(abs(gap + drift_gap), abs=1e-10,
                                    rel=1e-8)


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def test_error_decay_reference_spec(model, reference_spec):
    dec = am.error_decay(reference_spec, model, 1.0, 0.0, 0.8,
                         np.geomspace(0.02, 0.4, 6), 400, master_seed=11,
                         gamma=2.0)
    assert dec.gammabar == pytest.approx(1.0, abs=1e-9)
    # target rate beta (1/alpha + gammabar) - 1
    assert dec.target_rate == pytest.approx(0.8 * (1 / 1.2 + 1.0) - 1.0,
                                            abs=1e-9)
    assert dec.flag == "ok"
    assert dec.passed
    assert dec.fit.slope >= dec.target_rate - 0.15


def test_error_decay_degenerate_for_constant_fields(model):
    spec = am.make_ambit_spec(ambit_set=am.make_cone(1.0, 1.0),
                              kernel_g=am.power_kernel(0.5),
                              sigma=am.constant_field(1.3),
                              b=am.constant_field(0.7), x0=0.2)
    dc = am.error_decay(spec, model, 1.0, 0.0, 0.8,
                        np.geomspace(0.05, 0.4, 4), 50, master_seed=11)
    assert dc.flag == "degenerate"
    assert dc.passed


def test_density_criterion_dirac_control(model):
    dirac = am.make_ambit_spec(ambit_set=am.make_slab(1.0),
                               kernel_g=am.constant_kernel(0.0),
                               sigma=am.constant_field(1.0),
                               b=am.constant_field(0.0))
    rep = am.density_criterion_experiment(dirac, model, 1.0, 0.0, n=0,
                                          n_paths=2000, master_seed=7)
    assert not rep.verdict


def test_weierstrass_holder_fit():
    fit = am.field_holder_fit(am.weierstrass_field(delta1=0.5, delta2=0.5),
                              np.geomspace(1e-4, 1e-2, 8), 400,
                              path_rng(6, "h2", 0), p=2.0, axis="time")
    # E|f(t+h)-f(t)|^2 ~ h^{2 delta1}: slope 1 in the lag
    assert fit.slope == pytest.approx(1.0, abs=0.2)
