"""Run configuration: a small ``key = value`` format.

Grammar, one entry per line::

    # comment (also after a value)
    key = value
    section.key = value
    list.key = 1e-1, 1e-2, 1e-3

Blank lines are ignored, keys are case-sensitive and may not repeat.
Lists are comma separated. Booleans are ``true``/``false``. Keys that are
not in the schema are rejected with a suggestion.

Density parameters go under ``density.<name>`` (``mu`` and ``k`` are
accepted as top-level shorthands), component densities of a splitting
under ``f1``/``f2`` with ``f1.<name>``/``f2.<name>``, and boundary-data
parameters under ``preset.<name>``. Parameter names are checked against
the constructor of the selected catalog entry.

See ``emit_config`` for the canonical, fully defaulted form.
"""
from __future__ import annotations

import difflib
import inspect
from dataclasses import dataclass, field, fields, replace

from ._validation import check_schedule
from .densities import SCALAR_CATALOG, RadialDensity, SplittingDensity, make_scalar, regularize
from .experiments import DEFAULT_SCHEDULE, THIRD_SCHEDULE, U0_PRESETS
from .solver import Grid

__all__ = ["RunConfig", "ConfigError", "parse_config", "emit_config", "EXPERIMENTS",
           "build_density", "build_grid"]

EXPERIMENTS = ("ellipticity", "lemma1", "admissibility", "caccioppoli", "integrability",
               "second_derivatives", "stress", "uniqueness")
SCHEMES = ("quadratic", "qpower", "mixed", "thm18")
SCHEME_KEYS = ("q", "kappa", "varkappa", "gamma")
LAYOUTS = ("splitting", "radial")
EXPONENT_KEYS = ("mu1", "mu2", "mu", "kappa", "varkappa", "gamma", "chi")


class ConfigError(ValueError):
    """Malformed or inconsistent configuration; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


@dataclass
class RunConfig:
    density: str = "phi_mu"
    density_params: dict = field(default_factory=lambda: {"mu": 2.0})
    layout: str = "splitting"
    f1: str = "phi_mu"
    f1_params: dict = field(default_factory=lambda: {"mu": 1.5})
    f2: str = "phi_mu"
    f2_params: dict = field(default_factory=lambda: {"mu": 3.0})
    scheme: str = "quadratic"
    scheme_params: dict = field(default_factory=dict)
    deltas: tuple = DEFAULT_SCHEDULE
    deltas_b: tuple = THIRD_SCHEDULE
    delta: float | None = None
    nx: int = 65
    ny: int = 65
    xmin: float = 0.0
    xmax: float = 1.0
    ymin: float = 0.0
    ymax: float = 1.0
    preset: str = "sinusoidal"
    preset_params: dict = field(default_factory=dict)
    experiments: tuple = ()
    alpha: tuple = (1.0,)
    l: int = 3
    chi: tuple = (3.0, 4.0, 6.0, 8.0)
    margin: float = 0.05
    mu1: float | None = None
    tau_s: float | None = None
    tau_alpha: float | None = None
    alpha1: float = 0.0
    alpha2: float = 0.0
    lemma1_kappa: float = 1.0
    lemma1_levels: tuple = (5.0, 10.0, 20.0, 50.0)
    ellipticity_t_max: float = 1000.0
    ellipticity_samples: int = 1000
    exponents: dict = field(default_factory=dict)
    tol: float = 1e-9
    max_iter: int = 200
    output: str | None = None
    seed: int = 0
    override: bool = False


# key -> (attribute, kind)
_STATIC = {
    "density": ("density", "str"),
    "layout": ("layout", "str"),
    "f1": ("f1", "str"),
    "f2": ("f2", "str"),
    "scheme": ("scheme", "str"),
    "deltas": ("deltas", "floats"),
    "deltas_b": ("deltas_b", "floats"),
    "delta": ("delta", "float?"),
    "grid.nx": ("nx", "int"),
    "grid.ny": ("ny", "int"),
    "grid.xmin": ("xmin", "float"),
    "grid.xmax": ("xmax", "float"),
    "grid.ymin": ("ymin", "float"),
    "grid.ymax": ("ymax", "float"),
    "preset": ("preset", "str"),
    "experiments": ("experiments", "strs"),
    "params.alpha": ("alpha", "floats"),
    "params.l": ("l", "int"),
    "params.chi": ("chi", "floats"),
    "params.margin": ("margin", "float"),
    "params.mu1": ("mu1", "float?"),
    "params.tau_s": ("tau_s", "float?"),
    "params.tau_alpha": ("tau_alpha", "float?"),
    "second.alpha1": ("alpha1", "float"),
    "second.alpha2": ("alpha2", "float"),
    "lemma1.kappa": ("lemma1_kappa", "float"),
    "lemma1.levels": ("lemma1_levels", "floats"),
    "ellipticity.t_max": ("ellipticity_t_max", "float"),
    "ellipticity.samples": ("ellipticity_samples", "int"),
    "solver.tol": ("tol", "float"),
    "solver.max_iter": ("max_iter", "int"),
    "output": ("output", "str?"),
    "seed": ("seed", "int"),
    "override": ("override", "bool"),
}
_SHORTHAND = {"mu": "density.mu", "k": "density.k"}
_DYNAMIC = {"density": "density_params", "f1": "f1_params", "f2": "f2_params",
            "preset": "preset_params", "scheme": "scheme_params", "exponents": "exponents"}


def _catalog_params(key):
    factory = SCALAR_CATALOG.get(key)
    if factory is None:
        return None
    sig = inspect.signature(factory)
    return {n: p.default for n, p in sig.parameters.items() if n not in ("self", "params")}


def _preset_params(key):
    factory = U0_PRESETS.get(key)
    if factory is None:
        return None
    return {n: p.default for n, p in inspect.signature(factory).parameters.items()}


def _convert(kind, raw, key, line):
    raw = raw.strip()
    try:
        if kind.endswith("?") and raw.lower() in ("none", ""):
            return None
        base = kind.rstrip("?")
        if base == "str":
            if not raw:
                raise ValueError("empty value")
            return raw
        if base == "int":
            v = float(raw)
            if v != int(v):
                raise ValueError(f"{raw!r} is not an integer")
            return int(v)
        if base == "float":
            return float(raw)
        if base == "bool":
            low = raw.lower()
            if low not in ("true", "false"):
                raise ValueError(f"{raw!r} is not true/false")
            return low == "true"
        if base == "floats":
            return tuple(float(x) for x in raw.split(",") if x.strip())
        if base == "strs":
            return tuple(x.strip() for x in raw.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}", line) from None
    raise AssertionError(kind)


def _param_value(raw, default, key, line):
    raw = raw.strip()
    if "," in raw:
        return _convert("floats", raw, key, line)
    if isinstance(default, bool):
        return _convert("bool", raw, key, line)
    if isinstance(default, int) and default is not None:
        return _convert("int", raw, key, line)
    return _convert("float", raw, key, line)


def _known_keys():
    keys = list(_STATIC) + list(_SHORTHAND)
    keys += [f"scheme.{k}" for k in SCHEME_KEYS] + [f"exponents.{k}" for k in EXPONENT_KEYS]
    return keys


def _suggest(key):
    keys = _known_keys()
    best = difflib.get_close_matches(key, keys, n=1, cutoff=0.5)
    if not best:
        tails = {k.split(".")[-1]: k for k in keys}
        stem = key.split(".")[-1].rstrip("_0123456789") or key
        hit = difflib.get_close_matches(stem, list(tails), n=1, cutoff=0.6)
        best = [tails[hit[0]]] if hit else []
    return f" (did you mean {best[0]!r}?)" if best else ""


def _tokenize(text):
    seen = {}
    for n, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {body!r}", n)
        key, value = (s.strip() for s in body.split("=", 1))
        if not key:
            raise ConfigError("empty key", n)
        if key in _SHORTHAND:
            key = _SHORTHAND[key]
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first on line {seen[key][0]})", n)
        seen[key] = (n, value)
    return seen


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration document into a defaulted :class:`RunConfig`."""
    entries = _tokenize(text)
    cfg = RunConfig()
    updates = {}
    dynamic = {attr: None for attr in _DYNAMIC.values()}
    for key, (n, raw) in entries.items():
        if key in _STATIC:
            attr, kind = _STATIC[key]
            updates[attr] = _convert(kind, raw, key, n)
            continue
        head, _, tail = key.partition(".")
        if head in _DYNAMIC and tail:
            dynamic_attr = _DYNAMIC[head]
            if dynamic[dynamic_attr] is None:
                dynamic[dynamic_attr] = {}
            dynamic[dynamic_attr][tail] = (n, raw)
            continue
        raise ConfigError(f"unknown key {key!r}{_suggest(key)}", n)

    cfg = replace(cfg, **updates)
    # parameter blocks: an explicit block replaces the default one
    for prefix, attr in _DYNAMIC.items():
        given = dynamic[attr]
        selected = {"density": cfg.density, "f1": cfg.f1, "f2": cfg.f2,
                    "preset": cfg.preset}.get(prefix)
        if prefix in ("density", "f1", "f2"):
            allowed = _catalog_params(selected) if selected in SCALAR_CATALOG else {}
        elif prefix == "preset":
            allowed = _preset_params(selected) or {}
        elif prefix == "scheme":
            allowed = {k: 0.0 for k in SCHEME_KEYS}
        else:
            allowed = {k: 0.0 for k in EXPONENT_KEYS}
        if given is None:
            default = getattr(RunConfig(), attr)
            changed = (prefix in ("density", "f1", "f2", "preset")
                       and selected != getattr(RunConfig(), prefix))
            setattr(cfg, attr, {} if changed else dict(default))
            continue
        block = {}
        for name, (n, raw) in given.items():
            if name not in allowed:
                hit = difflib.get_close_matches(name, list(allowed), n=1, cutoff=0.5)
                hint = f" (did you mean '{prefix}.{hit[0]}'?)" if hit else ""
                raise ConfigError(f"unknown key '{prefix}.{name}' for {selected or prefix}{hint}", n)
            block[name] = _param_value(raw, allowed[name], f"{prefix}.{name}", n)
        setattr(cfg, attr, block)
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> RunConfig:
    """Static checks; raises :class:`ConfigError` naming the violated constraint."""
    try:
        build_density(cfg)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"density: {exc}") from None
    if cfg.layout not in LAYOUTS:
        raise ConfigError(f"layout must be one of {LAYOUTS} (got {cfg.layout!r})")
    if cfg.scheme not in SCHEMES:
        raise ConfigError(f"scheme must be one of {SCHEMES} (got {cfg.scheme!r})")
    try:
        check_schedule(cfg.deltas)
        check_schedule(cfg.deltas_b)
        if cfg.delta is not None:
            check_schedule([cfg.delta])
        regularize(None, cfg.deltas[-1], cfg.scheme, **cfg.scheme_params)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    if cfg.preset not in U0_PRESETS:
        raise ConfigError(f"unknown preset {cfg.preset!r}; known: {sorted(U0_PRESETS)}")
    bad = [e for e in cfg.experiments if e not in EXPERIMENTS]
    if bad:
        raise ConfigError(f"unknown experiment {bad[0]!r}; known: {', '.join(EXPERIMENTS)}")
    try:
        build_grid(cfg)
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None
    if cfg.l < 1:
        raise ConfigError(f"params.l >= 1 required (got {cfg.l})")
    if any(c <= 2 for c in cfg.chi):
        raise ConfigError(f"params.chi > 2 required (got {cfg.chi})")
    if not cfg.margin > 0:
        raise ConfigError(f"params.margin > 0 required (got {cfg.margin})")
    if cfg.mu1 is not None and not cfg.mu1 > 1:
        raise ConfigError(f"μ > 1 required (got params.mu1={cfg.mu1})")
    if cfg.alpha1 < 0 or cfg.alpha2 < 0:
        raise ConfigError("second.alpha1 and second.alpha2 must be >= 0")
    lv = cfg.lemma1_levels
    if len(lv) < 2 or any(b <= a for a, b in zip(lv, lv[1:])):
        raise ConfigError("lemma1.levels must be increasing with at least two entries")
    if cfg.tol <= 0 or cfg.max_iter < 1:
        raise ConfigError("solver.tol > 0 and solver.max_iter >= 1 required")
    if cfg.ellipticity_samples < 100 or cfg.ellipticity_t_max < 100:
        raise ConfigError("ellipticity.samples >= 100 and ellipticity.t_max >= 100 required")
    return cfg


def _fmt(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def emit_config(cfg: RunConfig) -> str:
    """Canonical text form; ``parse_config(emit_config(c)) == c``."""
    attr_to_key = {attr: key for key, (attr, _) in _STATIC.items()}
    lines = []
    prefix_of = {v: k for k, v in _DYNAMIC.items()}
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        if f.name in prefix_of:
            for name in sorted(v):
                lines.append(f"{prefix_of[f.name]}.{name} = {_fmt(v[name])}")
            continue
        if f.name == "experiments" and not v:
            continue
        lines.append(f"{attr_to_key[f.name]} = {_fmt(v)}")
    return "\n".join(lines) + "\n"


def build_scalar(key, params):
    return make_scalar(key, **params)


def build_density(cfg: RunConfig):
    """The two-dimensional base density described by the config."""
    if cfg.density == "splitting":
        return SplittingDensity([build_scalar(cfg.f1, cfg.f1_params),
                                 build_scalar(cfg.f2, cfg.f2_params)])
    f = build_scalar(cfg.density, cfg.density_params)
    if cfg.layout == "radial":
        return RadialDensity(f)
    return SplittingDensity([f, f])


def build_grid(cfg: RunConfig) -> Grid:
    return Grid(cfg.nx, cfg.ny, cfg.xmin, cfg.xmax, cfg.ymin, cfg.ymax)
