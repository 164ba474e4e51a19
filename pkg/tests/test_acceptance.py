"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line with its measured
statistic (run with ``-s`` to see them) and then asserts the verdict.
Runtime budgets are part of the verdict.
"""
import itertools
import time

import numpy as np
import pytest

from lingrowth.analysis import (ExponentSet, exponent_admissibility, fit_full_ellipticity,
                                fit_scalar_ellipticity, lemma1_probe)
from lingrowth.cli import load_config, shipped_presets
from lingrowth.config import build_density, build_grid
from lingrowth.densities import RadialDensity, SplittingDensity, phi_mu, regularize
from lingrowth.experiments import (DEFAULT_SCHEDULE, THIRD_SCHEDULE, ExperimentParams,
                                   boundary_field, caccioppoli_check, integrability_scan,
                                   maximum_principle, run_path, stress_analysis,
                                   uniqueness_check, viscosity_table)
from lingrowth.solver import (DiscreteField, Grid, discrete_energy, energy_gradient,
                              energy_hessian, euler_residual, minimize)

from .oracles import phi_mu_quadrature


def verdict(n, ok, detail):
    print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
    assert ok, detail


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


VV_SPLIT = SplittingDensity([phi_mu(1.5), phi_mu(3)])


@pytest.fixture(scope="module")
def vv_paths():
    """Sinusoidal data on 65^2 with both schedules, timed."""
    grid = Grid(65, 65)
    data = boundary_field(grid, "sinusoidal")
    with Timer() as ta:
        a = run_path(VV_SPLIT, data, DEFAULT_SCHEDULE)
    with Timer() as tb:
        b = run_path(VV_SPLIT, data, THIRD_SCHEDULE)
    return a, b, ta.elapsed, tb.elapsed


def test_criterion_01_phi_closed_form_vs_quadrature():
    with Timer() as t:
        ts = np.linspace(0, 50, 100)
        err = max(abs(float(phi_mu(mu).value(x)) - phi_mu_quadrature(mu, x))
                  for mu in (1.5, 2.0, 3.0) for x in ts)
    verdict(1, err <= 1e-8 and t.elapsed < 5,
            f"max |closed form - quadrature| = {err:.2e} (<= 1e-8), {t.elapsed:.2f} s (< 5 s)")


def test_criterion_02_ellipticity_fit():
    with Timer() as t:
        errs = {mu: abs(fit_scalar_ellipticity(phi_mu(mu), (0, 1e3)).mu_fit - mu)
                for mu in (1.2, 1.5, 2.0, 3.0)}
        full = fit_full_ellipticity(VV_SPLIT)
    ok = (max(errs.values()) <= 0.05 and abs(full.mu_fit - 3) <= 0.1 and full.upper_bounded
          and t.elapsed < 10)
    verdict(2, ok, f"scalar |mu_fit - mu| max {max(errs.values()):.2e}; splitting mu_fit "
                   f"{full.mu_fit:.4f}, kappa_fit {full.kappa_fit:.3g}, upper bounded "
                   f"{full.upper_bounded}; {t.elapsed:.2f} s")


def test_criterion_03_level_curve_probe():
    f = RadialDensity(phi_mu(2))
    levels = [5, 10, 20, 50]
    with Timer() as t:
        p1 = lemma1_probe(f, 1.0, levels)
        p15 = lemma1_probe(f, 1.5, levels)
    r1 = [r.ratio for r in p1.records]
    r15 = [r.ratio for r in p15.records]
    decay = r15[0] / r15[-1]
    curv = max(abs(r.curvature * r.radius - 1) for r in p1.records)
    ok = min(r1) >= 0.5 and decay > 10 and curv <= 1e-3 and t.elapsed < 30
    verdict(3, ok, f"kappa=1 min ratio {min(r1):.3f} (>= 0.5); kappa=1.5 decay factor "
                   f"{decay:.2f} (> 10, radii {p15.records[0].radius:.1f}..{p15.records[-1].radius:.1f}); "
                   f"max |curvature r - 1| {curv:.1e}; {t.elapsed:.2f} s")


def test_criterion_04_solver_exactness():
    with Timer() as t:
        g = Grid(33, 33)
        ell = DiscreteField.from_function(g, lambda x, y: 0.4 + 1.3 * x - 0.7 * y)
        fd = regularize(SplittingDensity([phi_mu(2), phi_mu(2)]), 1e-2)
        start = ell.values.copy()
        start[1:-1, 1:-1] = 0.0
        u, rep = minimize(fd, ell, u_init=start, tol=1e-12)
        dev = float(np.max(np.abs(u.values - ell.values)))
        res = euler_residual(fd, u)
        h = Grid(65, 65, -1, 1, -1, 1)
        harm = DiscreteField.from_function(h, lambda x, y: x**2 - y**2)
        start = harm.values.copy()
        start[1:-1, 1:-1] = 0.0
        v, _ = minimize(regularize(None, 1.0), harm, u_init=start, tol=1e-12)
        herr = float(np.max(np.abs(v.values - harm.values)))
    ok = dev <= 1e-6 and res <= 1e-9 and herr <= 1e-6 and t.elapsed < 30
    verdict(4, ok, f"affine deviation {dev:.1e}, Euler residual {res:.1e}, harmonic error "
                   f"{herr:.1e}; {t.elapsed:.2f} s")


def test_criterion_05_gradient_hessian_consistency():
    g = Grid(9, 8)
    rng = np.random.default_rng(5)
    fd = regularize(VV_SPLIT, 1e-2)
    worst_g = worst_h = 0.0
    with Timer() as t:
        for _ in range(5):
            u = rng.normal(size=g.shape)
            grad = energy_gradient(fd, u, g)
            H = energy_hessian(fd, u, g).toarray()
            inner = np.flatnonzero(~g.boundary_mask.ravel())
            for col, k in enumerate(inner):
                e = np.zeros(g.nx * g.ny)
                h = 1e-6 * max(1.0, abs(u.ravel()[k]))
                e[k] = h
                up, dn = (u.ravel() + e).reshape(g.shape), (u.ravel() - e).reshape(g.shape)
                dE = (discrete_energy(fd, up, g) - discrete_energy(fd, dn, g)) / (2 * h)
                worst_g = max(worst_g, abs(dE - grad.ravel()[k]) / max(abs(grad.ravel()[k]), 1e-3))
                dG = ((energy_gradient(fd, up, g) - energy_gradient(fd, dn, g)) / (2 * h)).ravel()[inner]
                worst_h = max(worst_h, np.max(np.abs(dG - H[:, col])) / np.max(np.abs(H[:, col])))
    ok = worst_g <= 1e-5 and worst_h <= 1e-3 and t.elapsed < 10
    verdict(5, ok, f"gradient rel err {worst_g:.1e} (<= 1e-5), Hessian rel err {worst_h:.1e} "
                   f"(<= 1e-3); {t.elapsed:.2f} s")


def test_criterion_06_maximum_principle_on_presets():
    worst, bad = 0.0, []
    for name in shipped_presets():
        cfg = load_config(None, name, [])
        density = build_density(cfg)
        data = boundary_field(build_grid(cfg), cfg.preset, **cfg.preset_params)
        for sched in (cfg.deltas, cfg.deltas_b):
            path = run_path(density, data, sched, scheme=cfg.scheme,
                            scheme_params=cfg.scheme_params)
            mp = maximum_principle(path, atol=1e-8)
            worst = max(worst, mp["excess"])
            if not (mp["holds"] and path.converged):
                bad.append(name)
    verdict(6, not bad, f"max excess over boundary range {worst:.1e} across "
                        f"{len(shipped_presets())} presets x 2 schedules; failing: {bad or 'none'}")


def test_criterion_07_vanishing_viscosity(vv_paths):
    a, _, ta, _ = vv_paths
    visc = viscosity_table(a)
    v = [r["viscosity"] for r in visc["rows"]]
    ok = a.converged and visc["monotone"] and v[-1] <= 0.1 * v[0] and ta < 120
    verdict(7, ok, f"viscosity {' > '.join(f'{x:.2e}' for x in v)}; final/initial "
                   f"{visc['decay']:.2e} (<= 0.1); path {ta:.1f} s")


def test_criterion_08_caccioppoli_stability(vv_paths):
    a = vv_paths[0]
    out = caccioppoli_check(a, ExperimentParams(l=3), alphas=[0.0, 1.0, 2.0])
    spreads = {k: v["spread"] for k, v in out["alphas"].items()}
    ok = all(v["finite"] for v in out["alphas"].values()) and max(spreads.values()) < 1e2
    verdict(8, ok, "LHS/RHS spread per alpha " + ", ".join(f"{k:g}: {s:.3f}" for k, s in spreads.items())
            + " (< 1e2)")


def test_criterion_09_higher_integrability(vv_paths):
    a = vv_paths[0]
    out = integrability_scan(a, ExperimentParams(), chis=[3.0, 4.0, 6.0, 8.0])
    trends = {c: b["trend"] for c, b in out["gamma1"].items()}
    sat = any(any(b["saturated"]) for b in out["gamma1"].values())
    ok = max(trends.values()) <= 2 and not sat
    verdict(9, ok, "Gamma1 max successive moment ratio per chi "
            + ", ".join(f"{c:g}: {r:.3f}" for c, r in trends.items()) + " (<= 2)")


def test_criterion_10_stress_uniqueness(vv_paths):
    a, b, ta, tb = vv_paths
    out = stress_analysis(a, b, margin=0.05)
    ok = (a.converged and b.converged and out["cross_sup"] <= 1e-3
          and out["containment_margin"] > 0 and ta + tb < 180)
    verdict(10, ok, f"interior stress sup difference {out['cross_sup']:.2e} (<= 1e-3) at deltas "
                    f"{out['cross_deltas'][0]:.2e}/{out['cross_deltas'][1]:.2e}; containment margin "
                    f"{out['containment_margin']:.2e} (> 0); {ta + tb:.1f} s")


def test_criterion_11_uniqueness_up_to_constants():
    f = SplittingDensity([phi_mu(1.5), phi_mu(1.5)])
    devs = {}
    with Timer() as t:
        for n in (65, 129):
            data = boundary_field(Grid(n, n), "sinusoidal")
            a = run_path(f, data, DEFAULT_SCHEDULE)
            b = run_path(f, data, THIRD_SCHEDULE)
            assert a.converged and b.converged
            devs[n] = uniqueness_check(a.final, b.final, 0.05, f)["deviation"]
    ok = devs[65] <= 1e-3 and devs[129] < devs[65] and t.elapsed < 240
    verdict(11, ok, f"mean-removed deviation 65^2 {devs[65]:.3e} (<= 1e-3), 129^2 {devs[129]:.3e} "
                    f"(must shrink); {t.elapsed:.1f} s")


def test_criterion_12_exponent_lattice():
    mus = np.linspace(1.05, 2.95, 10)
    kappas = np.linspace(-0.95, 1.0, 10)
    fracs = np.linspace(0.0, 1.8, 10)
    mu1s = np.linspace(1.02, 2.2, 10)
    mismatches, witness_fail, admissible18 = 0, 0, 0
    with Timer() as t:
        for mu, kappa, frac, mu1 in itertools.product(mus, kappas, fracs, mu1s):
            varkappa = frac * max(2 - mu1, 0.05)
            gbound = (2 - mu1) / (1 + (2 - mu1))
            gamma = frac * max(gbound, 0.05) / 1.2
            out = exponent_admissibility(ExponentSet(mu1=mu1, mu=mu, kappa=kappa,
                                                     varkappa=varkappa, gamma=gamma))
            direct16 = mu > 1 and -1 < kappa <= 1 and mu < 2 + kappa
            direct17 = 1 < mu1 and 0 <= varkappa < 2 - mu1
            direct18 = 1 < mu1 < 2 and 0 <= gamma < gbound
            mismatches += (out["cor16"] != direct16) + (out["cor17"] != direct17) + (out["thm18"] != direct18)
            if direct18:
                admissible18 += 1
                w = out["bookkeeping"].get("thm18")
                if w is None:
                    witness_fail += 1
                    continue
                ts, ta = w["tau_s"], w["tau_alpha"]
                if not (ta < ts and gamma < 2 * (ts - ta) / (1 + 2 * ts) and ts - ta < 1 - mu1 / 2
                        and ta > 0):
                    witness_fail += 1
    ok = mismatches == 0 and witness_fail == 0 and t.elapsed < 5
    verdict(12, ok, f"10^4 lattice points: {mismatches} verdict mismatches, {admissible18} admissible "
                    f"thm18 points, {witness_fail} without a valid witness; {t.elapsed:.2f} s")
