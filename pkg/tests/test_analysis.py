import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from lingrowth.analysis import (EllipticityEstimator, ExponentSet, exponent_admissibility,
                                fit_full_ellipticity, fit_scalar_ellipticity, lemma1_probe,
                                thm18_witness, trace_level_curve)
from lingrowth.densities import (Atoms, NearlyLinear, Quadratic, RadialDensity, Softplus,
                                 SplittingDensity, minimal_surface, phi_mu)

from .oracles import circle_radius_phi2


@pytest.mark.parametrize("mu", [1.2, 1.5, 2.0, 3.0])
def test_scalar_fit_recovers_phi_exponent(mu):
    rep = fit_scalar_ellipticity(phi_mu(mu))
    assert rep.mu_fit == pytest.approx(mu, abs=1e-6)
    assert rep.c1 == pytest.approx(mu - 1, rel=1e-6)
    assert rep.lower_bound_holds and rep.linear_growth
    t = np.geomspace(1, 1e3, 300)
    assert rep.lower_certificate(t, phi_mu(mu).log_second(t))


def test_scalar_fit_quadratic_has_no_decay():
    rep = fit_scalar_ellipticity(Quadratic())
    assert rep.mu_fit == pytest.approx(0.0, abs=1e-9)
    assert rep.kappa_fit == pytest.approx(0.0, abs=1e-9)
    assert not rep.linear_growth
    assert any("linear growth" in n for n in rep.notes)


def test_minimal_surface_decay_three():
    assert fit_scalar_ellipticity(minimal_surface(2)).mu_fit == pytest.approx(3.0, abs=0.02)


def test_softplus_has_no_power_lower_bound():
    rep = fit_scalar_ellipticity(Softplus())
    assert not rep.lower_bound_holds
    assert rep.c1 == 0.0


def test_nearly_linear_flagged():
    rep = fit_scalar_ellipticity(NearlyLinear())
    assert rep.linear_growth is False


def test_atoms_floor_controls_lower_exponent():
    rep = fit_scalar_ellipticity(Atoms())
    assert rep.mu_fit == pytest.approx(2.0, abs=0.05)


@pytest.mark.parametrize("range_,samples", [((0, 50), 1000), ((1, 1e3), 1000), ((0, 1e3), 50)])
def test_scalar_fit_rejects_bad_sampling(range_, samples):
    with pytest.raises(ValueError):
        fit_scalar_ellipticity(phi_mu(2), range_, samples)


def test_full_fit_splitting():
    rep = fit_full_ellipticity(SplittingDensity([phi_mu(1.5), phi_mu(3)]))
    assert rep.mu_fit == pytest.approx(3.0, abs=1e-3)
    assert abs(rep.kappa_fit) <= 0.05
    assert rep.c2 == pytest.approx(2.0, rel=1e-6)
    assert "splitting: upper bound is constant" in rep.notes


def test_full_fit_radial():
    rep = fit_full_ellipticity(RadialDensity(phi_mu(2)))
    assert rep.mu_fit == pytest.approx(2.0, abs=1e-3)
    assert rep.kappa_fit == pytest.approx(1.0, abs=1e-2)


def test_full_fit_requires_axis_angles():
    with pytest.raises(ValueError, match="multiple of 4"):
        fit_full_ellipticity(RadialDensity(phi_mu(2)), n_theta=30)


def test_estimator_interface():
    est = EllipticityEstimator(samples=200).fit(phi_mu(1.5))
    assert est.mu_ == pytest.approx(1.5, abs=1e-6)
    assert est.get_params()["samples"] == 200
    est2 = EllipticityEstimator(n_theta=16).fit(RadialDensity(phi_mu(2)))
    assert est2.kappa_ == pytest.approx(1.0, abs=1e-2)


# ---------------------------------------------------------------- exponents


def test_thm14_window():
    assert exponent_admissibility(ExponentSet(mu1=1.5))["thm14"] is True
    assert exponent_admissibility(ExponentSet(mu1=2.0))["thm14"] is False
    assert exponent_admissibility(ExponentSet(mu1=1.5, mu2=50.0))["thm14"] is True


def test_cor15_needs_both_below_two():
    assert exponent_admissibility(ExponentSet(mu1=1.5, mu2=1.9))["cor15"] is True
    assert exponent_admissibility(ExponentSet(mu1=1.5, mu2=3.0))["cor15"] is False
    assert exponent_admissibility(ExponentSet(mu1=1.5))["cor15"] is None


@pytest.mark.parametrize("mu,kappa,ok", [(2.5, 0.6, True), (2.5, 0.5, False), (1.5, -0.4, True),
                                         (1.5, -0.6, False), (2.0, 1.0, True), (2.0, 1.2, False)])
def test_cor16_constraint(mu, kappa, ok):
    assert exponent_admissibility(ExponentSet(mu=mu, kappa=kappa))["cor16"] is ok


def test_cor17_varkappa_window():
    assert exponent_admissibility(ExponentSet(mu1=1.5, varkappa=0.4))["cor17"] is True
    assert exponent_admissibility(ExponentSet(mu1=1.5, varkappa=0.5))["cor17"] is False


@pytest.mark.parametrize("gamma,ok", [(0.0, True), (0.2, True), (0.33, True), (0.34, False), (0.4, False)])
def test_thm18_gamma_bound(gamma, ok):
    out = exponent_admissibility(ExponentSet(mu1=1.5, gamma=gamma))
    assert out["thm18_gamma_bound"] == pytest.approx(1 / 3)
    assert out["thm18"] is ok


def test_integrability_bookkeeping():
    out = exponent_admissibility(ExponentSet(mu1=1.5, chi=4.0))
    b = out["bookkeeping"]["prop22"]
    assert b["s"] == 1.0
    assert b["eps_hat"] == 0.25
    assert b["alpha"] == 0.875
    assert b["rhs_exponent"] == pytest.approx(1.875)
    assert b["rhs_exponent"] < b["lhs_exponent"]


def test_missing_exponents_give_none():
    out = exponent_admissibility(ExponentSet())
    assert all(out[k] is None for k in ("thm14", "cor15", "cor16", "cor17", "thm18"))


@pytest.mark.parametrize("kw", [{"mu1": 1.0}, {"mu2": 0.5}, {"chi": 2.0}])
def test_exponent_set_validation(kw):
    with pytest.raises(ValueError):
        ExponentSet(**kw)


@settings(max_examples=200, deadline=None)
@given(st.floats(1.01, 1.99), st.floats(0.0, 1.0))
def test_thm18_witness_exists_exactly_below_bound(mu1, frac):
    bound = (2 - mu1) / (3 - mu1)
    gamma = frac * bound * 0.999
    w = thm18_witness(mu1, gamma)
    assert w is not None
    ts, ta = w
    eps0 = 1 - mu1 / 2
    assert 0 < ta < ts < eps0
    assert gamma < 2 * (ts - ta) / (1 + 2 * ts)
    assert thm18_witness(mu1, bound * 1.001) is None


@settings(max_examples=100, deadline=None)
@given(st.floats(1.01, 1.99), st.floats(1.01, 1.99))
def test_thm14_monotone_in_mu1(a, b):
    lo, hi = sorted((a, b))
    v_lo = exponent_admissibility(ExponentSet(mu1=lo))["thm14"]
    v_hi = exponent_admissibility(ExponentSet(mu1=hi))["thm14"]
    # admissibility can only be lost as mu1 grows
    assert v_lo or not v_hi


@settings(max_examples=100, deadline=None)
@given(st.floats(1.01, 3.5), st.floats(-0.99, 1.0), st.floats(2.01, 12.0))
def test_cor16_bookkeeping_conditions_hold(mu, kappa, chi):
    # a window narrower than rounding cannot hold a strict midpoint
    assume(2 + kappa - mu > 1e-9)
    out = exponent_admissibility(ExponentSet(mu=mu, kappa=kappa, chi=chi))
    if out["cor16"]:
        assert all(out["bookkeeping"]["cor16"]["conditions"])


# ---------------------------------------------------------------- level curves


@pytest.mark.parametrize("c", [5.0, 20.0])
def test_radial_level_curve_is_circle(c):
    f = RadialDensity(phi_mu(2))
    pts, h, gap = trace_level_curve(f, c)
    r = np.hypot(pts[:, 0], pts[:, 1])
    np.testing.assert_allclose(r, circle_radius_phi2(c), rtol=1e-9)
    assert gap < h


def test_radial_probe_curvature_times_radius():
    probe = lemma1_probe(RadialDensity(phi_mu(2)), 1.0, [5, 10, 20, 50])
    for rec in probe.records:
        assert rec.ok
        assert rec.curvature * rec.radius == pytest.approx(1.0, abs=1e-6)
        assert rec.radius == pytest.approx(circle_radius_phi2(rec.level), rel=1e-9)
        # |Df| = Phi'(r) = r/(1+r) on the circle
        assert rec.grad_norm == pytest.approx(rec.radius / (1 + rec.radius), rel=1e-9)
    assert probe.verdict == "consistent"


def test_radial_probe_kappa_above_one_decays():
    probe = lemma1_probe(RadialDensity(phi_mu(2)), 1.5, [5, 10, 20, 50])
    ratios = [rec.ratio for rec in probe.records]
    assert all(np.diff(ratios) < 0)
    assert probe.verdict == "violated"
    assert probe.ratio_slope == pytest.approx(-0.5, abs=0.1)


def test_splitting_probe_contact_curvature():
    f = SplittingDensity([phi_mu(1.5), phi_mu(3)])
    probe = lemma1_probe(f, 1.0, [5, 10, 20])
    for rec in probe.records:
        assert rec.ok
        assert rec.curvature == pytest.approx(rec.curvature_implicit, rel=1e-3)
        # the circumscribed circle dominates the curve, so |gamma''| >= 1/r
        assert rec.curvature * rec.radius >= 1 - 1e-3


def test_probe_inapplicable_without_linear_growth():
    probe = lemma1_probe(SplittingDensity([Quadratic(), Quadratic()]), 1.0, [1, 2])
    assert probe.verdict == "inapplicable"


def test_probe_rejects_bad_levels():
    with pytest.raises(ValueError, match="increasing"):
        lemma1_probe(RadialDensity(phi_mu(2)), 1.0, [5, 2])
