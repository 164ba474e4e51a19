"""Command-line front end.

Every subcommand reads a configuration (``--config FILE``, ``--preset NAME``
for a shipped preset, and ``--set KEY=VALUE`` overrides, applied in that
order), runs its pipeline and writes artifacts under
``<output root>/<run id>/``:

``manifest.json``
    command, canonical config text, package versions, density descriptor.
``report.json``
    sections, verdicts and flags of every selected check.
``*.csv``
    one table per check (one row per ``delta`` or per level).
``field*.bin`` / ``field*.csv``
    solved fields, see :mod:`lingrowth.fieldio` for the binary layout.

The output root is ``--output-root``, else ``$LINGROWTH_OUTPUT_ROOT``,
else ``./lingrowth-runs``. The run id is the ``output`` config key, else a
hash of command and config, so identical runs overwrite identical files.

Exit status: 0 when every verdict passes, 1 when any check fails, 2 on
configuration or usage errors.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import platform
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import ExponentSet, exponent_admissibility, fit_scalar_ellipticity, lemma1_probe
from .config import (EXPERIMENTS, ConfigError, RunConfig, build_density, build_grid, emit_config,
                     parse_config)
from .densities import RadialDensity, SplittingDensity, check_growth, growth_constants, recession
from .densities import regularize
from .experiments import (ExperimentParams, ExperimentReport, boundary_field, caccioppoli_check,
                          integrability_scan, maximum_principle, path_tables, run_path,
                          second_derivative_bounds, stress_analysis, uniqueness_check,
                          viscosity_table)
from .fieldio import write_field_binary, write_field_csv, write_table
from .solver import minimize

logger = logging.getLogger("lingrowth")

ENV_ROOT = "LINGROWTH_OUTPUT_ROOT"
COMMANDS = ("check-density", "lemma1", "admissible", "solve", "path", "full")

# recorded baselines
VISCOSITY_DECAY = 0.1
CACCIOPPOLI_SPREAD = 1e2
MOMENT_TREND = 2.0
STRESS_TOL = 1e-3
UNIQUENESS_TOL = 1e-3
PERTURBED_TOL = 1e-6
FD_RTOL = 1e-5


def shipped_presets():
    root = resources.files("lingrowth") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def preset_text(name: str) -> str:
    path = resources.files("lingrowth") / "presets" / f"{name}.cfg"
    if not path.is_file():
        raise ConfigError(f"unknown preset config {name!r}; shipped: {', '.join(shipped_presets())}")
    return path.read_text()


def load_config(config_file=None, preset=None, overrides=()) -> RunConfig:
    """Combine preset, file and ``KEY=VALUE`` overrides; later sources win per key."""
    parts = []
    if preset:
        parts.append(preset_text(preset))
    if config_file:
        parts.append(Path(config_file).read_text())
    merged: dict = {}
    order = []
    for text in parts + ["\n".join(overrides)]:
        for line in text.splitlines():
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ConfigError(f"expected 'key = value', got {body!r}")
            k = body.split("=", 1)[0].strip()
            k = {"mu": "density.mu", "k": "density.k"}.get(k, k)
            if k not in merged:
                order.append(k)
            merged[k] = body.split("=", 1)[1].strip()
    return parse_config("\n".join(f"{k} = {merged[k]}" for k in order))


# ----------------------------------------------------------------------------
# pipelines; each returns (section, verdicts, tables)


def _components(density):
    if isinstance(density, SplittingDensity):
        return density.components
    if isinstance(density, RadialDensity):
        return [density.profile]
    raise TypeError(density)


def _scalar_invariants(f, t_max=1e3):
    t = np.linspace(-t_max, t_max, 4001)
    h = f.fd_step(t)
    d_fd = (f.value(t + h) - f.value(t - h)) / (2 * h)
    s_fd = (f.deriv(t + h) - f.deriv(t - h)) / (2 * h)
    err1 = float(np.max(np.abs(f.deriv(t) - d_fd) / (1 + np.abs(f.deriv(t)))))
    err2 = float(np.max(np.abs(f.second(t) - s_fd) / (1 + np.abs(f.second(t)))))
    return {"convex": bool(np.all(f.log_second(t) > -np.inf)), "deriv_error": err1, "second_error": err2}


def pipeline_check_density(cfg: RunConfig):
    density = build_density(cfg)
    rows, section, verdicts = [], {}, {}
    seen = set()
    for i, f in enumerate(_components(density)):
        key = repr(f)
        if key in seen:
            continue
        seen.add(key)
        name = f"{f.label}[{i + 1}]"
        inv = _scalar_invariants(f)
        gc = growth_constants(f)
        grow = check_growth(f, gc.as_tuple(), np.linspace(0, gc.range[1], 2001))
        rec = recession(f, [1.0])
        ell = fit_scalar_ellipticity(f, (0.0, cfg.ellipticity_t_max), cfg.ellipticity_samples)
        section[name] = {"invariants": inv, "growth": gc.__dict__, "growth_holds": grow,
                         "recession": {"value": rec.value, "error": rec.error,
                                       "converged": rec.converged},
                         "ellipticity": ell.to_dict(), "closed_form": f.closed_form}
        verdicts[f"{name}.convex_c2"] = (inv["convex"] and inv["deriv_error"] <= FD_RTOL
                                         and inv["second_error"] <= FD_RTOL)
        verdicts[f"{name}.linear_growth"] = bool(gc.linear_growth and grow)
        verdicts[f"{name}.ellipticity_lower"] = ell.lower_bound_holds
        rows.append([name, ell.mu_fit, ell.kappa_fit, ell.c1, ell.c2, gc.a1, gc.a2, gc.a3, gc.a4,
                     rec.value, rec.converged, gc.linear_growth])
    header = ["component", "mu_fit", "kappa_fit", "c1", "c2", "a1", "a2", "a3", "a4",
              "recession", "recession_converged", "linear_growth"]
    return section, verdicts, {"density": (header, rows)}


def pipeline_lemma1(cfg: RunConfig):
    density = build_density(cfg)
    probe = lemma1_probe(density, cfg.lemma1_kappa, cfg.lemma1_levels)
    rows = [[r.level, r.radius, r.curvature, r.grad_norm, r.product, r.ratio]
            for r in probe.records]
    expected = "violated" if cfg.lemma1_kappa > 1 else "consistent"
    ok = probe.verdict in (expected, "inapplicable") and all(r.ok for r in probe.records)
    section = probe.to_dict()
    section["expected"] = expected
    return section, {"lemma1": ok}, {"lemma1": (list(probe.CSV_HEADER), rows)}


def exponents_for(cfg: RunConfig, density) -> ExponentSet:
    vals = {}
    comps = density.components if isinstance(density, SplittingDensity) else []
    for i, f in enumerate(comps[:2]):
        if "mu" in f.params:
            vals[f"mu{i + 1}"] = f.params["mu"]
    if isinstance(density, RadialDensity) and "mu" in density.profile.params:
        vals["mu"] = density.profile.params["mu"]
    sp = cfg.scheme_params
    if cfg.scheme == "qpower" and "kappa" in sp:
        vals["kappa"] = sp["kappa"]
    if cfg.scheme == "mixed":
        vals["varkappa"] = sp.get("varkappa")
    if cfg.scheme == "thm18":
        vals["gamma"] = sp.get("gamma")
    vals["chi"] = max(cfg.chi)
    vals.update(cfg.exponents)
    return ExponentSet(**{k: v for k, v in vals.items() if v is not None})


TARGET = {"quadratic": "thm14", "qpower": "cor16", "mixed": "cor17", "thm18": "thm18"}


def pipeline_admissible(cfg: RunConfig):
    density = build_density(cfg)
    e = exponents_for(cfg, density)
    res = exponent_admissibility(e)
    target = TARGET[cfg.scheme]
    section = {"exponents": {k: v for k, v in e.__dict__.items() if v is not None},
               "verdicts": res, "target": target}
    verdicts = {}
    if res.get(target) is not None:
        verdicts[f"admissible.{target}"] = bool(res[target])
    rows = [[k, v] for k, v in res.items() if k.startswith(("thm", "cor"))
            and not k.endswith("bound")]
    return section, verdicts, {"admissibility": (["statement", "admissible"], rows)}


def _experiment_params(cfg, alpha=None):
    kw = dict(alpha=cfg.alpha[0] if alpha is None else alpha, l=cfg.l, chi=cfg.chi,
              mu1=cfg.mu1, margin=cfg.margin, tau_s=cfg.tau_s, tau_alpha=cfg.tau_alpha)
    if cfg.scheme == "thm18":
        kw.update(mode="thm18", gamma=cfg.scheme_params.get("gamma", 0.0))
    return ExperimentParams(**kw)


def _solve_kw(cfg):
    return dict(scheme=cfg.scheme, scheme_params=cfg.scheme_params, tol=cfg.tol,
                max_iter=cfg.max_iter)


def pipeline_solve(cfg: RunConfig, outdir: Path):
    density = build_density(cfg)
    grid = build_grid(cfg)
    bd = boundary_field(grid, cfg.preset, **cfg.preset_params)
    delta = cfg.delta if cfg.delta is not None else cfg.deltas[-1]
    fd = regularize(density, delta, cfg.scheme, **cfg.scheme_params)
    u, rep = minimize(fd, bd, tol=cfg.tol, max_iter=cfg.max_iter)
    write_field_binary(outdir / "field.bin", u)
    write_field_csv(outdir / "field.csv", u)
    b = bd.values[grid.boundary_mask]
    excess = max(float(np.max(u.values - b.max())), float(np.max(b.min() - u.values)))
    section = {"delta": delta, "solve": rep.to_dict(), "max_principle_excess": excess}
    verdicts = {"solve.converged": rep.converged, "max_principle": excess <= 1e-8}
    header = ["iteration", "energy", "residual"]
    rows = [[i, e, r] for i, (e, r) in enumerate(zip(rep.energies, rep.residuals))]
    return section, verdicts, {"solve": (header, rows)}


class _PathCache:
    def __init__(self, cfg):
        self.cfg = cfg
        self.density = build_density(cfg)
        self.grid = build_grid(cfg)
        self.boundary = boundary_field(self.grid, cfg.preset, **cfg.preset_params)
        self._a = self._b = None

    @property
    def a(self):
        if self._a is None:
            self._a = run_path(self.density, self.boundary, self.cfg.deltas, **_solve_kw(self.cfg))
        return self._a

    @property
    def b(self):
        if self._b is None:
            self._b = run_path(self.density, self.boundary, self.cfg.deltas_b,
                               **_solve_kw(self.cfg))
        return self._b


def pipeline_path(cache: _PathCache, outdir: Path):
    p = cache.a
    visc = viscosity_table(p)
    mp = maximum_principle(p)
    for k, u in enumerate(p.fields):
        write_field_binary(outdir / f"field_{k}.bin", u)
    section = {"viscosity": visc, "max_principle": mp, "converged": p.converged,
               "message": p.message, "solves": [r.to_dict() for r in p.reports]}
    v = visc["rows"][0]["viscosity"] if visc["rows"] else 0.0
    verdicts = {"path.converged": p.converged, "max_principle": mp["holds"],
                "viscosity.monotone": visc["monotone"],
                "viscosity.decay": v == 0.0 or visc["decay"] <= VISCOSITY_DECAY}
    return section, verdicts, {"path": path_tables(p, visc)["path"]}


def pipeline_caccioppoli(cache, outdir):
    res = caccioppoli_check(cache.a, _experiment_params(cache.cfg), cache.cfg.alpha)
    verdicts = {f"caccioppoli.alpha{a:g}": b["finite"] and b["spread"] < CACCIOPPOLI_SPREAD
                for a, b in res["alphas"].items()}
    return res, verdicts, {"caccioppoli": path_tables(cache.a, {"rows": []}, cacc=res)["caccioppoli"]}


def pipeline_integrability(cache, outdir):
    params = _experiment_params(cache.cfg).with_density(cache.density)
    res = integrability_scan(cache.a, params)
    # outside mu1 < 2 nothing is claimed: trends are recorded without verdicts
    res["verdict_applies"] = params.mu1 < 2
    verdicts = {}
    if res["verdict_applies"]:
        verdicts = {f"integrability.chi{c:g}": (not any(b["saturated"]) and b["trend"] <= MOMENT_TREND)
                    for c, b in res["gamma1"].items()}
    return res, verdicts, {"moments": path_tables(cache.a, {"rows": []}, integ=res)["moments"]}


def pipeline_second(cache, outdir):
    res = second_derivative_bounds(cache.a, cache.cfg.alpha1, cache.cfg.alpha2, cache.cfg.margin)
    header = ["delta", "weighted_1", "weighted_2", "hessian_l2", "grad_sup"]
    rows = [[r[h] for h in header] for r in res["rows"]]
    finite = all(math.isfinite(x) for r in rows for x in r)
    return res, {"second_derivatives.finite": finite}, {"second_derivatives": (header, rows)}


def pipeline_stress(cache, outdir):
    res = stress_analysis(cache.a, cache.b, cache.cfg.margin)
    verdicts = {"stress.containment": res["contained"],
                "stress.cross_path": res["cross_sup"] <= STRESS_TOL}
    return res, verdicts, {"stress": path_tables(cache.a, {"rows": []}, stress=res)["stress"]}


def pipeline_uniqueness(cache, outdir):
    cfg = cache.cfg
    a, b = cache.a, cache.b
    res = {"paths": uniqueness_check(a.final, b.final, cfg.margin, cache.density),
           "final_deltas": (a.deltas[-1], b.deltas[-1])}
    # same delta, perturbed interior start
    rng = np.random.default_rng(cfg.seed)
    fd = a.densities[-1]
    noise = a.final.values + 1e-2 * rng.standard_normal(a.final.values.shape)
    u2, rep = minimize(fd, cache.boundary, tol=cfg.tol, max_iter=cfg.max_iter, u_init=noise)
    res["perturbed"] = uniqueness_check(a.final, u2, cfg.margin)
    res["perturbed"]["converged"] = rep.converged
    verdicts = {"uniqueness.perturbed": rep.converged
                and res["perturbed"]["deviation"] <= PERTURBED_TOL}
    if res["paths"]["verdict_applies"]:
        verdicts["uniqueness.paths"] = res["paths"]["deviation"] <= UNIQUENESS_TOL
    header = ["comparison", "deviation", "mean_shift"]
    rows = [[k, res[k]["deviation"], res[k]["mean_shift"]] for k in ("paths", "perturbed")]
    return res, verdicts, {"uniqueness": (header, rows)}


PATH_EXPERIMENTS = {"caccioppoli": pipeline_caccioppoli, "integrability": pipeline_integrability,
                    "second_derivatives": pipeline_second, "stress": pipeline_stress,
                    "uniqueness": pipeline_uniqueness}


# ----------------------------------------------------------------------------
# driver


def run_id(cfg: RunConfig, command: str) -> str:
    if cfg.output:
        return cfg.output
    digest = hashlib.sha256(f"{command}\n{emit_config(cfg)}".encode()).hexdigest()[:12]
    return f"{command}-{digest}"


def _versions():
    import scipy
    import sklearn
    return {"lingrowth": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "scikit-learn": sklearn.__version__, "python": platform.python_version()}


def _selected(cfg, command):
    if command == "full":
        return list(cfg.experiments) or list(EXPERIMENTS)
    if command == "path":
        return [e for e in cfg.experiments if e in PATH_EXPERIMENTS]
    return []


def run(cfg: RunConfig, command: str, output_root=None) -> tuple[int, Path, ExperimentReport]:
    """Execute one subcommand; returns exit status, run directory and report."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    root = Path(output_root or os.environ.get(ENV_ROOT) or "lingrowth-runs")
    outdir = root / run_id(cfg, command)
    outdir.mkdir(parents=True, exist_ok=True)
    density = build_density(cfg)
    report = ExperimentReport(provenance={"command": command, "density": density.to_dict(),
                                          "grid": build_grid(cfg).to_dict(), "seed": cfg.seed,
                                          "scheme": cfg.scheme,
                                          "scheme_params": cfg.scheme_params})
    manifest = {"command": command, "run_id": outdir.name, "config": emit_config(cfg),
                "versions": _versions(), "density": density.to_dict(), "seed": cfg.seed}

    def record(name, fn, *args):
        try:
            section, verdicts, tables = fn(*args)
        except Exception as exc:  # isolate: one failing check never stops the others
            logger.exception("%s failed", name)
            report.sections[name] = {"error": f"{type(exc).__name__}: {exc}"}
            report.verdicts[f"{name}.error"] = False
            return
        report.sections[name] = section
        report.verdicts.update(verdicts)
        for tname, (header, rows) in tables.items():
            write_table(outdir / f"{tname}.csv", header, rows)

    selected = _selected(cfg, command)
    if command == "check-density" or "ellipticity" in selected:
        record("density", pipeline_check_density, cfg)
    if command == "lemma1" or "lemma1" in selected:
        record("lemma1", pipeline_lemma1, cfg)
    solving = command in ("solve", "path", "full")
    gate_ok = True
    if command == "admissible" or "admissibility" in selected or (solving and cfg.scheme == "thm18"):
        record("admissibility", pipeline_admissible, cfg)
        if cfg.scheme == "thm18" and not report.verdicts.get("admissible.thm18", True):
            gate_ok = cfg.override
            report.flags.append("gamma violates the thm18 admissibility bound"
                                + ("; proceeding on override" if cfg.override
                                   else "; solves skipped (set override = true to proceed)"))
    if solving and gate_ok:
        if command == "solve":
            record("solve", pipeline_solve, cfg, outdir)
        else:
            cache = _PathCache(cfg)
            record("path", pipeline_path, cache, outdir)
            if cache.a.truncated:
                report.flags.append(f"path truncated: {cache.a.message}")
            for name in selected:
                if name in PATH_EXPERIMENTS:
                    record(name, PATH_EXPERIMENTS[name], cache, outdir)
    manifest["files"] = sorted(p.name for p in outdir.iterdir()
                               if p.name not in ("manifest.json", "report.json"))
    (outdir / "report.json").write_text(report.to_json() + "\n")
    (outdir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return (0 if report.passed else 1), outdir, report


def build_parser():
    parser = argparse.ArgumentParser(prog="lingrowth", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {"check-density": "invariants, growth constants and ellipticity fit of the density",
             "lemma1": "level-curve curvature probe",
             "admissible": "exponent admissibility verdicts",
             "solve": "one regularized solve",
             "path": "delta path with the selected path experiments",
             "full": "every selected experiment (all when none are selected)"}
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="configuration file (key = value lines)")
        p.add_argument("--preset", help="shipped preset configuration name")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key (repeatable)")
        p.add_argument("--output-root", help=f"output root (default ${ENV_ROOT} or ./lingrowth-runs)")
        p.add_argument("--emit-config", action="store_true",
                       help="print the fully defaulted config and exit")
        p.add_argument("-q", "--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, args.preset, args.set)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.emit_config:
        sys.stdout.write(emit_config(cfg))
        return 0
    code, outdir, report = run(cfg, args.command, args.output_root)
    if not args.quiet:
        for k in sorted(report.verdicts):
            print(f"{'PASS' if report.verdicts[k] else 'FAIL'} {k}")
        for f in report.flags:
            print(f"FLAG {f}")
    print(str(outdir))
    if code:
        print("failed: " + ", ".join(report.failures()), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
