"""Vanishing-viscosity paths and the quantities checked along them.

A path solves the regularized problem for a decreasing schedule of
``delta`` values, warm-starting each solve from the previous one. The
check functions take a finished :class:`RegularizationPath` and return
plain dictionaries of per-``delta`` numbers; :class:`ExperimentReport`
collects them with provenance for JSON/CSV output.

Quadrature conventions: path-level energies use the corner-gradient rule
of the solver; the local quantities (moments, Caccioppoli sides, second
derivatives) use centered differences at interior nodes with weight
``hx * hy``, which is exact trapezoidal quadrature since ``eta`` vanishes
near the boundary.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator

from ._validation import check_schedule
from .analysis import thm18_witness
from .densities import RadialDensity, SplittingDensity, recession, regularize
from .solver import (CutoffField, DiscreteField, Grid, SolveReport, directional_derivatives,
                     minimize)

__all__ = [
    "U0_PRESETS",
    "make_u0",
    "boundary_field",
    "interior_mask",
    "ExperimentParams",
    "RegularizationPath",
    "ExperimentReport",
    "PathRunner",
    "run_path",
    "viscosity_table",
    "maximum_principle",
    "stress_fields",
    "path_tables",
    "caccioppoli_check",
    "integrability_scan",
    "second_derivative_bounds",
    "stress_analysis",
    "uniqueness_check",
    "compare_paths",
    "DEFAULT_SCHEDULE",
    "THIRD_SCHEDULE",
]

DEFAULT_SCHEDULE = (1e-1, 1e-2, 1e-3, 1e-4)
# 1/3 decay over the same range: 0.1 * 3**-k, k = 0..6 (ends at 1.37e-4)
THIRD_SCHEDULE = tuple(0.1 * 3.0 ** -k for k in range(7))

LOG_MAX = math.log(np.finfo(float).max)


# ----------------------------------------------------------------------------
# boundary data presets


def _affine(a=0.0, b=1.0, c=0.5):
    return lambda x, y: a + b * x + c * y


def _sinusoidal(freq=2.0):
    return lambda x, y: np.sin(freq * np.pi * x) * y


def _kink(eps=0.05):
    # smoothed |2x - 1|
    return lambda x, y: np.sqrt((2 * x - 1) ** 2 + eps**2)


def _zero():
    return lambda x, y: np.zeros_like(x)


U0_PRESETS: dict[str, Callable[..., Callable]] = {
    "affine": _affine,
    "sinusoidal": _sinusoidal,
    "kink": _kink,
    "zero": _zero,
}


def make_u0(key: str, **params) -> Callable:
    try:
        return U0_PRESETS[key](**params)
    except KeyError:
        raise ValueError(f"unknown u0 preset {key!r}; known: {sorted(U0_PRESETS)}") from None


def boundary_field(grid: Grid, key: str = "sinusoidal", **params) -> DiscreteField:
    """Preset evaluated at every node; solvers read only the boundary."""
    return DiscreteField.from_function(grid, make_u0(key, **params))


def interior_mask(grid: Grid, margin: float = 0.05) -> np.ndarray:
    """Nodes at distance at least ``margin`` from the boundary."""
    X, Y = grid.mesh()
    eps = 1e-12
    return ((X >= grid.xmin + margin - eps) & (X <= grid.xmax - margin + eps)
            & (Y >= grid.ymin + margin - eps) & (Y <= grid.ymax - margin + eps))


def _corner_points(grid: Grid):
    """Coordinates of the corner-gradient samples, ordered as in the solver."""
    x0, x1 = grid.x[:-1], grid.x[1:]
    y0, y1 = grid.y[:-1], grid.y[1:]
    X0, Y0 = np.meshgrid(x0, y0)
    X1, Y1 = np.meshgrid(x1, y1)
    xs = np.stack([X0, X1, X0, X1], axis=-1).reshape(-1)
    ys = np.stack([Y0, Y0, Y1, Y1], axis=-1).reshape(-1)
    return xs, ys


# ----------------------------------------------------------------------------
# parameters


@dataclass
class ExperimentParams:
    """Exponents and cutoff for the local checks.

    ``mode`` is ``standard`` (``alpha >= 0``) or ``thm18`` (``alpha > -1/2``,
    with ``gamma`` and the ``tau`` pair). ``mu1`` defaults to the first
    component's ``mu`` parameter when the density has one.
    """

    alpha: float = 1.0
    l: int = 3
    chi: tuple = (3.0, 4.0, 6.0, 8.0)
    mu1: float | None = None
    margin: float = 0.05
    mode: str = "standard"
    gamma: float = 0.0
    tau_s: float | None = None
    tau_alpha: float | None = None

    def __post_init__(self):
        self.chi = tuple(float(c) for c in self.chi)
        if self.mode not in ("standard", "thm18"):
            raise ValueError(f"mode must be 'standard' or 'thm18' (got {self.mode!r})")
        if int(self.l) != self.l or self.l < 1:
            raise ValueError(f"l must be an integer >= 1 (got {self.l})")
        self.l = int(self.l)
        if self.mode == "standard" and self.alpha < 0:
            raise ValueError(f"alpha >= 0 required in standard mode (got {self.alpha})")
        if self.mode == "thm18" and not self.alpha > -0.5:
            raise ValueError(f"alpha > -1/2 required in thm18 mode (got {self.alpha})")
        if any(c <= 2 for c in self.chi):
            raise ValueError(f"chi > 2 required (got {self.chi})")
        if self.mu1 is not None and not self.mu1 > 1:
            raise ValueError(f"mu1 > 1 required (got {self.mu1})")
        if not 0 <= self.gamma < 1:
            raise ValueError(f"gamma must lie in [0, 1) (got {self.gamma})")

    def with_density(self, density):
        """Copy with ``mu1`` filled in from the density when missing."""
        if self.mu1 is not None:
            return self
        mu1 = _infer_mu1(density)
        if mu1 is None:
            raise ValueError("mu1 is required for densities without a 'mu' parameter")
        out = ExperimentParams(**{**asdict(self), "mu1": mu1})
        return out

    @property
    def eps_hat(self):
        return 1.0 - self.mu1 / 2.0

    def bookkeeping(self, chi):
        """Integrability exponents for one ``chi``: ``s``, ``eps_hat``, ``alpha``."""
        s = chi / 2.0 - 1.0
        return {"s": s, "eps_hat": self.eps_hat, "alpha": s - self.eps_hat / 2.0}

    def taus(self):
        """``(tau_s, tau_alpha)`` for thm18 mode, from the fields or the default recipe."""
        if self.tau_s is not None and self.tau_alpha is not None:
            return self.tau_s, self.tau_alpha
        return thm18_witness(self.mu1, self.gamma)


def _infer_mu1(density):
    base = getattr(density, "base", density)
    if isinstance(base, SplittingDensity):
        return base.components[0].params.get("mu")
    if isinstance(base, RadialDensity):
        return base.profile.params.get("mu")
    return None


# ----------------------------------------------------------------------------
# paths


@dataclass
class RegularizationPath:
    density: object
    grid: Grid
    boundary: DiscreteField
    deltas: list = field(default_factory=list)
    fields: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    densities: list = field(default_factory=list)
    schedule: tuple = ()
    truncated: bool = False
    message: str = ""

    def __len__(self):
        return len(self.deltas)

    @property
    def final(self) -> DiscreteField:
        return self.fields[-1]

    @property
    def converged(self):
        return not self.truncated and all(r.converged for r in self.reports)


def run_path(density, boundary: DiscreteField, deltas: Sequence[float] = DEFAULT_SCHEDULE, *,
             scheme="quadratic", scheme_params=None, tol=1e-9, max_iter=200, u_init=None,
             linear_solver="direct") -> RegularizationPath:
    """Warm-started solves along a strictly decreasing ``delta`` schedule.

    A failed solve truncates the path: the failed step is dropped and
    ``truncated`` is set with the solver message.
    """
    schedule = check_schedule(deltas)
    path = RegularizationPath(density, boundary.grid, boundary, schedule=tuple(schedule))
    u = u_init
    for d in schedule:
        f_delta = regularize(density, float(d), scheme, **(scheme_params or {}))
        try:
            u_new, rep = minimize(f_delta, boundary, tol=tol, max_iter=max_iter, u_init=u,
                                  linear_solver=linear_solver)
        except FloatingPointError as exc:
            u_new, rep = None, SolveReport(status="failed", message=str(exc))
        if not rep.converged:
            path.truncated = True
            path.message = f"delta={d:g}: {rep.status}: {rep.message}"
            break
        path.deltas.append(float(d))
        path.fields.append(u_new)
        path.reports.append(rep)
        path.densities.append(f_delta)
        u = u_new
    return path


class PathRunner(BaseEstimator):
    """Estimator form of :func:`run_path`; ``fit`` takes the boundary field."""

    def __init__(self, density=None, deltas=DEFAULT_SCHEDULE, scheme="quadratic",
                 scheme_params=None, tol=1e-9, max_iter=200):
        self.density = density
        self.deltas = deltas
        self.scheme = scheme
        self.scheme_params = scheme_params
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y=None):
        self.path_ = run_path(self.density, X, self.deltas, scheme=self.scheme,
                              scheme_params=self.scheme_params, tol=self.tol,
                              max_iter=self.max_iter)
        self.viscosity_ = viscosity_table(self.path_)
        return self


def _trapezoid_weights(grid: Grid):
    wx = np.full(grid.nx, grid.hx)
    wx[[0, -1]] *= 0.5
    wy = np.full(grid.ny, grid.hy)
    wy[[0, -1]] *= 0.5
    return np.outer(wy, wx)


def viscosity_table(path: RegularizationPath) -> dict:
    """Per-step ``delta * int |grad u|^2``, sup norm and L1 increments.

    ``monotone`` is False when the viscosity energy increases anywhere
    along the path.
    """
    op = path.grid._operators
    W = _trapezoid_weights(path.grid)
    rows = []
    prev = None
    for d, u, rep in zip(path.deltas, path.fields, path.reports):
        G = op.gradients(u.values)
        visc = d * op.weight * float(np.sum(G**2))
        l1 = math.nan if prev is None else float(np.sum(W * np.abs(u.values - prev)))
        rows.append({"delta": d, "viscosity": visc, "sup_norm": float(np.max(np.abs(u.values))),
                     "l1_increment": l1, "energy": rep.energy, "iterations": rep.iterations,
                     "residual": rep.residual})
        prev = u.values
    v = [r["viscosity"] for r in rows]
    monotone = all(b <= a * (1 + 1e-12) + 1e-300 for a, b in zip(v, v[1:]))
    decay = v[-1] / v[0] if v and v[0] > 0 else math.nan
    return {"rows": rows, "monotone": monotone, "decay": decay}


def maximum_principle(path: RegularizationPath, atol: float = 1e-8) -> dict:
    b = path.boundary.values[path.grid.boundary_mask]
    lo, hi = float(b.min()), float(b.max())
    worst = 0.0
    for u in path.fields:
        worst = max(worst, float(np.max(u.values - hi)), float(np.max(lo - u.values)))
    return {"lower": lo, "upper": hi, "excess": worst, "holds": worst <= atol}


# ----------------------------------------------------------------------------
# local quantities


def _log_integral(log_integrand, weight):
    """``log(weight * sum exp(log_integrand))`` ignoring ``-inf`` entries."""
    finite = np.isfinite(log_integrand)
    if not np.any(finite):
        return -math.inf
    return float(logsumexp(log_integrand[finite]) + math.log(weight))


def _integral(log_integrand, weight):
    """Value and saturation flag of a log-domain quadrature."""
    L = _log_integral(log_integrand, weight)
    if L > LOG_MAX:
        return math.inf, True
    return (math.exp(L) if L > -math.inf else 0.0), False


def _local(path_grid, margin):
    eta = CutoffField(path_grid, margin)
    E = eta.values[1:-1, 1:-1]
    gE = eta.gradient[:, 1:-1, 1:-1]
    with np.errstate(divide="ignore"):
        logE = np.log(E)
    return E, logE, (gE**2).sum(axis=0), gE


def _log_or_neginf(a):
    with np.errstate(divide="ignore"):
        return np.log(a)


def caccioppoli_check(path: RegularizationPath, params: ExperimentParams,
                      alphas: Sequence[float] | None = None) -> dict:
    """Both sides of the second-derivative Caccioppoli inequality per ``delta``.

    LHS ``int eta^2l G1^(alpha - mu1/2) |d11 u|^2``; RHS
    ``int |grad eta|^2 eta^(2l-2) G1^(alpha+1)``. In ``thm18`` mode the RHS
    is ``1 + RHS + int |grad eta|^2 eta^(2l-2) G1^((alpha+1)/(1-gamma))``.
    The weighted form with ``D^2 f_delta`` on both sides is reported as
    ``weighted_lhs``/``weighted_rhs``. Per ``alpha`` the statistic is the
    max/min spread of LHS/RHS across the path.
    """
    params = params.with_density(path.density)
    alphas = [params.alpha] if alphas is None else list(alphas)
    for a in alphas:
        ExperimentParams(**{**asdict(params), "alpha": a})
    grid = path.grid
    w = grid.hx * grid.hy
    E, logE, gn2, gE = _local(grid, params.margin)
    l = params.l
    log_gn2 = _log_or_neginf(gn2)
    out = {}
    for a in alphas:
        rows = []
        for d, u, fd in zip(path.deltas, path.fields, path.densities):
            D = directional_derivatives(u)
            logG1 = np.log(D.gamma1)
            lhs, sat1 = _integral(2 * l * logE + (a - params.mu1 / 2) * logG1
                                  + _log_or_neginf(D.d11**2), w)
            rhs, sat2 = _integral(log_gn2 + (2 * l - 2) * logE + (a + 1) * logG1, w)
            if params.mode == "thm18":
                extra, sat3 = _integral(log_gn2 + (2 * l - 2) * logE
                                        + (a + 1) / (1 - params.gamma) * logG1, w)
                rhs = 1.0 + rhs + extra
                sat2 = sat2 or sat3
            H = fd.hessian(D.gradient)
            z = np.stack([D.d11, D.d12], axis=-1)
            q_lhs = np.einsum("...i,...ij,...j->...", z, H, z)
            q_rhs = np.einsum("i...,...ij,j...->...", gE, H, gE)
            wl = w * float(np.sum(E ** (2 * l) * D.gamma1**a * q_lhs))
            wr = w * float(np.sum(np.where(E > 0, E, 0.0) ** (2 * l - 2) * D.gamma1 ** (a + 1)
                                  * q_rhs * (E > 0)))
            ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
            rows.append({"delta": d, "lhs": lhs, "rhs": rhs, "ratio": ratio,
                         "weighted_lhs": wl, "weighted_rhs": wr,
                         "weighted_ratio": wl / wr if wr > 0 else math.nan,
                         "saturated": sat1 or sat2})
        ratios = np.array([r["ratio"] for r in rows])
        pos = ratios[ratios > 0]
        spread = float(pos.max() / pos.min()) if pos.size else 1.0
        out[float(a)] = {"rows": rows, "max_ratio": float(ratios.max()) if ratios.size else math.nan,
                         "spread": spread, "finite": bool(np.all(np.isfinite(ratios)))}
    return {"alphas": out, "l": l, "mu1": params.mu1, "mode": params.mode}


def integrability_scan(path: RegularizationPath, params: ExperimentParams,
                       chis: Sequence[float] | None = None) -> dict:
    """Moments ``M(delta, chi) = int eta^2l G^(chi/2)`` for ``G1`` and ``G2``.

    ``trend`` per ``chi`` is the largest ratio of successive moments along
    the path. The bootstrap inequality is evaluated with ``s = chi/2 - 1``:
    LHS ``int eta^2l G1^(s+1)``, RHS ``1 + int eta^2l G1^(s + (2+mu1)/4)``.
    """
    params = params.with_density(path.density)
    chis = list(params.chi if chis is None else chis)
    grid = path.grid
    w = grid.hx * grid.hy
    _, logE, _, _ = _local(grid, params.margin)
    l = params.l
    logs = {"gamma1": [], "gamma2": []}
    for u in path.fields:
        D = directional_derivatives(u)
        logs["gamma1"].append(np.log(D.gamma1))
        logs["gamma2"].append(np.log(D.gamma2))
    out = {}
    for which, seq in logs.items():
        table = {}
        for chi in chis:
            vals, sat = [], []
            for logG in seq:
                v, s_ = _integral(2 * l * logE + chi / 2 * logG, w)
                vals.append(v)
                sat.append(s_)
            ratios = [b / a for a, b in zip(vals, vals[1:]) if a > 0]
            table[float(chi)] = {"moments": vals, "saturated": sat,
                                 "trend": max(ratios) if ratios else 1.0}
        out[which] = table
    boot = {}
    for chi in chis:
        bk = params.bookkeeping(chi)
        s = bk["s"]
        rows = []
        for d, logG in zip(path.deltas, logs["gamma1"]):
            lhs, _ = _integral(2 * l * logE + (s + 1) * logG, w)
            rhs, _ = _integral(2 * l * logE + (s + (2 + params.mu1) / 4) * logG, w)
            rows.append({"delta": d, "lhs": lhs, "rhs": 1.0 + rhs, "ratio": lhs / (1.0 + rhs)})
        r = [row["ratio"] for row in rows]
        boot[float(chi)] = {"bookkeeping": bk, "rows": rows,
                            "spread": max(r) / min(r) if r and min(r) > 0 else math.nan}
    out["bootstrap"] = boot
    out["deltas"] = list(path.deltas)
    return out


def second_derivative_bounds(path: RegularizationPath, alpha1: float = 0.0, alpha2: float = 0.0,
                             margin: float = 0.05) -> dict:
    """Weighted Hessian energies ``int D^2 f_delta(grad d_i u, grad d_i u) G_i^alpha_i eta^2``.

    Also the plain norms ``||D^2 u||_L2`` and ``||grad u||_inf`` over the
    region at least ``margin`` from the boundary.
    """
    if alpha1 < 0 or alpha2 < 0:
        raise ValueError("second-derivative exponents must be >= 0")
    grid = path.grid
    w = grid.hx * grid.hy
    E, _, _, _ = _local(grid, margin)
    inner = interior_mask(grid, margin)[1:-1, 1:-1]
    rows = []
    for d, u, fd in zip(path.deltas, path.fields, path.densities):
        D = directional_derivatives(u)
        H = fd.hessian(D.gradient)
        vals = []
        for z, G, a in ((np.stack([D.d11, D.d12], -1), D.gamma1, alpha1),
                        (np.stack([D.d12, D.d22], -1), D.gamma2, alpha2)):
            q = np.einsum("...i,...ij,...j->...", z, H, z)
            vals.append(w * float(np.sum(q * G**a * E**2)))
        hess_l2 = math.sqrt(w * float(np.sum((D.d11**2 + 2 * D.d12**2 + D.d22**2)[inner])))
        grad_sup = float(np.max(np.hypot(D.d1, D.d2)[inner]))
        rows.append({"delta": d, "weighted_1": vals[0], "weighted_2": vals[1],
                     "hessian_l2": hess_l2, "grad_sup": grad_sup})
    gs = [r["grad_sup"] for r in rows]
    return {"rows": rows, "alpha": (alpha1, alpha2),
            "max": {k: max(r[k] for r in rows) for k in ("weighted_1", "weighted_2",
                                                         "hessian_l2", "grad_sup")},
            "grad_sup_variation": max(gs) / min(gs) if gs and min(gs) > 0 else math.nan}


def _component_slopes(density):
    base = getattr(density, "base", density)
    if isinstance(base, SplittingDensity):
        return [recession(f, [1.0]) for f in base.components]
    if isinstance(base, RadialDensity):
        return [recession(base.profile, [1.0])]
    raise TypeError(f"stress containment needs a splitting or radial density (got {base!r})")


def stress_fields(path: RegularizationPath) -> list:
    """``sigma = Df_delta(grad u)`` at every corner sample, one array per step."""
    op = path.grid._operators
    return [fd.gradient(op.gradients(u.values)) for u, fd in zip(path.fields, path.densities)]


def stress_analysis(path: RegularizationPath, other: RegularizationPath | None = None,
                    margin: float = 0.05) -> dict:
    """Stress per step, containment of its base part, and successive/cross-path distances.

    The base part is ``sigma - delta * grad u`` (the regularizer gradient
    for other schemes). Its containment margin is ``slope_i - |sigma_i|``
    against the recession slope of each component; for radial densities the
    norm of the base stress is compared with the profile's slope. Distances
    are sup norms over samples at least ``margin`` from the boundary.
    """
    grid = path.grid
    op = grid._operators
    slopes = _component_slopes(path.density)
    xs, ys = _corner_points(grid)
    inner = ((xs >= grid.xmin + margin) & (xs <= grid.xmax - margin)
             & (ys >= grid.ymin + margin) & (ys <= grid.ymax - margin))
    sig = stress_fields(path)
    rows = []
    worst = (math.inf, None)
    radial = isinstance(getattr(path.density, "base", path.density), RadialDensity)
    for k, (d, u, fd) in enumerate(zip(path.deltas, path.fields, path.densities)):
        G = op.gradients(u.values)
        base = sig[k] - fd.regularizer_gradient(G)
        if radial:
            m = slopes[0].value - np.linalg.norm(base, axis=1)
        else:
            m = np.min(np.stack([s.value - np.abs(base[:, i]) for i, s in enumerate(slopes)]),
                       axis=0)
        i = int(np.argmin(m))
        if m[i] < worst[0]:
            worst = (float(m[i]), {"delta": d, "x": float(xs[i]), "y": float(ys[i])})
        succ = math.nan if k == 0 else float(np.max(np.abs(sig[k] - sig[k - 1])[inner]))
        rows.append({"delta": d, "containment_margin": float(m[i]), "successive_sup": succ,
                     "sup_norm": float(np.max(np.abs(sig[k])))})
    out = {"rows": rows, "slopes": [s.value for s in slopes],
           "slopes_converged": all(s.converged for s in slopes),
           "containment_margin": worst[0], "worst_location": worst[1],
           "contained": worst[0] > 0}
    if other is not None:
        if other.grid != grid:
            raise ValueError("cross-path comparison needs identical grids")
        s2 = stress_fields(other)[-1]
        out["cross_sup"] = float(np.max(np.abs(sig[-1] - s2)[inner]))
        out["cross_deltas"] = (path.deltas[-1], other.deltas[-1])
    return out


def _regime(density):
    base = getattr(density, "base", density)
    if isinstance(base, SplittingDensity):
        mus = [c.params.get("mu") for c in base.components]
        if all(m is not None for m in mus):
            return max(mus) < 2
    return None


def uniqueness_check(u: DiscreteField, v: DiscreteField, margin: float = 0.05,
                     density=None) -> dict:
    """``sup |(u - v) - mean(u - v)|`` over nodes at least ``margin`` from the boundary.

    With a density outside the regime ``max(mu1, mu2) < 2`` the deviation is
    still reported but ``verdict_applies`` is False.
    """
    if u.grid != v.grid:
        raise ValueError("fields live on different grids")
    mask = interior_mask(u.grid, margin)
    w = (u.values - v.values)[mask]
    dev = float(np.max(np.abs(w - w.mean()))) if w.size else 0.0
    regime = None if density is None else _regime(density)
    return {"deviation": dev, "mean_shift": float(w.mean()) if w.size else 0.0,
            "verdict_applies": regime is not False, "regime": regime}


def compare_paths(density, boundary, schedule_a=DEFAULT_SCHEDULE, schedule_b=THIRD_SCHEDULE,
                  margin=0.05, **kw) -> dict:
    """Run two schedules on one problem; report uniqueness and stress agreement."""
    pa = run_path(density, boundary, schedule_a, **kw)
    pb = run_path(density, boundary, schedule_b, **kw)
    if not (pa.converged and pb.converged):
        return {"ok": False, "message": pa.message or pb.message}
    out = uniqueness_check(pa.final, pb.final, margin, density)
    out["stress_cross_sup"] = stress_analysis(pa, pb, margin)["cross_sup"]
    out["final_deltas"] = (pa.deltas[-1], pb.deltas[-1])
    out["ok"] = True
    return out


# ----------------------------------------------------------------------------
# report


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


@dataclass
class ExperimentReport:
    """Results of one run with its provenance.

    ``sections`` maps a check name to its result dictionary and
    ``verdicts`` a criterion name to a boolean. ``tables`` holds CSV-ready
    ``(header, rows)`` pairs.
    """

    provenance: dict = field(default_factory=dict)
    sections: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(self.verdicts.values())

    def failures(self):
        return sorted(k for k, v in self.verdicts.items() if not v)

    def to_dict(self):
        return _jsonable({"provenance": self.provenance, "sections": self.sections,
                          "verdicts": self.verdicts, "flags": self.flags})

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, **kw)


def path_tables(path: RegularizationPath, visc: dict, cacc: dict | None = None,
                integ: dict | None = None, stress: dict | None = None) -> dict:
    """One row per ``delta`` for every computed check."""
    tables = {}
    header = ["delta", "viscosity", "sup_norm", "l1_increment", "energy", "iterations", "residual"]
    tables["path"] = (header, [[r[h] for h in header] for r in visc["rows"]])
    if cacc:
        header = ["delta", "alpha", "lhs", "rhs", "ratio", "weighted_lhs", "weighted_rhs"]
        rows = []
        for a, block in cacc["alphas"].items():
            for r in block["rows"]:
                rows.append([r["delta"], a, r["lhs"], r["rhs"], r["ratio"],
                             r["weighted_lhs"], r["weighted_rhs"]])
        tables["caccioppoli"] = (header, rows)
    if integ:
        chis = sorted(integ["gamma1"])
        header = ["delta"] + [f"{w}_chi{c:g}" for w in ("gamma1", "gamma2") for c in chis]
        rows = []
        for k, d in enumerate(integ["deltas"]):
            rows.append([d] + [integ[w][c]["moments"][k] for w in ("gamma1", "gamma2")
                               for c in chis])
        tables["moments"] = (header, rows)
    if stress:
        header = ["delta", "containment_margin", "successive_sup", "sup_norm"]
        tables["stress"] = (header, [[r[h] for h in header] for r in stress["rows"]])
    return tables
