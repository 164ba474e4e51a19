"""Hypothesis checks on densities: ellipticity exponents, level-curve probe, exponent admissibility.

All certificates are sample-based: a fitted exponent with its constants
holds at every sampled point, which can falsify an all-``t`` inequality
but never prove it.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq
from sklearn.base import BaseEstimator

from .densities import ScalarDensity, SplittingDensity, growth_constants, recession

__all__ = [
    "EllipticityReport",
    "EllipticityEstimator",
    "fit_scalar_ellipticity",
    "fit_full_ellipticity",
    "ExponentSet",
    "exponent_admissibility",
    "thm18_witness",
    "LevelRecord",
    "LevelCurveProbe",
    "lemma1_probe",
    "trace_level_curve",
]

MU_MAX = 16.0
SLOPE_TOL = 0.05


@dataclass
class EllipticityReport:
    mu_fit: float
    kappa_fit: float
    c1: float
    c2: float
    sample_range: tuple
    samples: int
    lower_bound_holds: bool = True
    upper_bounded: bool = True
    linear_growth: bool | None = None
    notes: list = field(default_factory=list)

    def lower_certificate(self, t, log_f2):
        """``log c1 - mu log(1+t) <= log f''`` at the given samples."""
        return bool(np.all(math.log(self.c1) - self.mu_fit * np.log1p(t) <= log_f2 + 1e-9))

    def to_dict(self):
        return asdict(self)


def _log_samples(range_, samples):
    lo, hi = map(float, range_)
    if lo != 0.0 or hi < 100.0:
        raise ValueError("sample range must start at 0 and reach at least 100")
    return np.geomspace(1.0, 1.0 + hi, samples) - 1.0


def _envelope_slopes(log1pt, logf, n_bins=20):
    """Tail slopes of the lower/upper envelopes of ``logf`` against ``log(1+t)``.

    The fit window is the final decade of ``1 + t``; the samples there are
    split into bins and per-bin minima/maxima are regressed.
    """
    top = log1pt[-1]
    sel = log1pt >= top - math.log(10.0)
    L, F = log1pt[sel], logf[sel]
    edges = np.linspace(L[0], L[-1], n_bins + 1)
    lows, highs, centers = [], [], []
    for a, b in zip(edges[:-1], edges[1:]):
        m = (L >= a) & (L <= b)
        if not np.any(m):
            continue
        i_lo = np.argmin(F[m])
        i_hi = np.argmax(F[m])
        lows.append((L[m][i_lo], F[m][i_lo]))
        highs.append((L[m][i_hi], F[m][i_hi]))
        centers.append(0.5 * (a + b))
    lo = np.array(lows)
    hi = np.array(highs)
    mu = -np.polyfit(lo[:, 0], lo[:, 1], 1)[0]
    kappa = -np.polyfit(hi[:, 0], hi[:, 1], 1)[0]
    return float(mu), float(kappa)


def _certify(log1pt, log_lower, log_upper, mu, kappa, range_, n, notes):
    if not np.all(np.isfinite(log_lower)):
        bad = int(np.flatnonzero(~np.isfinite(log_lower))[0])
        raise ValueError(f"non-convex sample: second derivative <= 0 at sample index {bad}")
    kappa = min(kappa, mu, MU_MAX)
    lower_ok = mu <= MU_MAX
    if lower_ok:
        c1 = math.exp(float(np.min(log_lower + mu * log1pt)))
    else:
        c1 = 0.0
        notes.append("the power-law lower bound c1 (1+t)^-mu fails for every mu on this range "
                     f"(tail decay exponent {mu:.3g} exceeds {MU_MAX:g})")
    c2 = math.exp(float(np.max(log_upper + kappa * log1pt)))
    upper_bounded = kappa >= -SLOPE_TOL
    return EllipticityReport(mu, kappa, c1, c2, tuple(range_), n, lower_ok, upper_bounded,
                             notes=notes)


def fit_scalar_ellipticity(f: ScalarDensity, range_=(0.0, 1e3), samples: int = 1000):
    """Fit ``c1 (1+|t|)^-mu <= f''(t) <= c2 (1+|t|)^-kappa`` on log-spaced samples.

    ``mu_fit`` and ``kappa_fit`` are the tail slopes of the lower and upper
    envelopes of ``log f''`` over the last decade; ``c1`` and ``c2`` are then
    the tightest constants valid at every sample. ``upper_bounded`` is the
    bounded-``f''`` form (``kappa_fit >= 0``).
    """
    if samples < 100:
        raise ValueError("need at least 100 samples")
    t = _log_samples(range_, samples)
    L = np.log1p(t)
    logf = f.log_second(t)
    if not np.all(np.isfinite(logf)) or np.any(f.second(t) < 0):
        bad = int(np.flatnonzero(~np.isfinite(logf))[0])
        raise ValueError(f"non-convex sample: f''(t) <= 0 at t={t[bad]:.6g}")
    notes = []
    gc = growth_constants(f, (0.0, float(range_[1])))
    if not gc.linear_growth:
        notes.append("linear growth check failed (recession slope did not converge or a1 <= 0)")
    mu, kappa = _envelope_slopes(L, logf)
    rep = _certify(L, logf, logf, mu, kappa, range_, samples, notes)
    rep.linear_growth = gc.linear_growth
    return rep


def _hessian_extremes(f, r, n_theta):
    theta = np.linspace(0.0, 2 * np.pi, n_theta, endpoint=False)
    xi = np.stack([np.outer(r, np.cos(theta)), np.outer(r, np.sin(theta))], axis=-1)
    ev = np.linalg.eigvalsh(f.hessian(xi))
    return ev[..., 0].min(axis=1), ev[..., -1].max(axis=1)


def fit_full_ellipticity(f, R: float = 1e3, samples: int = 400, n_theta: int = 64):
    """Exponents of ``c1 (1+|xi|)^-mu |eta|^2 <= D^2 f(xi)(eta, eta) <= c2 (1+|xi|)^-kappa |eta|^2``.

    Extreme Hessian eigenvalues are taken over ``n_theta`` angles (a
    multiple of four, so the axes are included) on log-spaced radii.
    """
    if n_theta % 4:
        raise ValueError("n_theta must be a multiple of 4")
    r = _log_samples((0.0, R), samples)
    lam_min, lam_max = _hessian_extremes(f, r, n_theta)
    if np.any(lam_min <= 0):
        bad = int(np.flatnonzero(lam_min <= 0)[0])
        raise ValueError(f"non-convex sample: Hessian not positive definite at |xi|={r[bad]:.6g}")
    L = np.log1p(r)
    lo, hi = np.log(lam_min), np.log(lam_max)
    mu, _ = _envelope_slopes(L, lo)
    _, kappa = _envelope_slopes(L, hi)
    rep = _certify(L, lo, hi, mu, kappa, (0.0, R), samples, [])
    if isinstance(f, SplittingDensity):
        rep.notes.append("splitting: upper bound is constant" if abs(rep.kappa_fit) <= SLOPE_TOL
                         else "splitting: upper bound not constant")
    return rep


class EllipticityEstimator(BaseEstimator):
    """Estimator form of the ellipticity fits; ``fit`` takes a density."""

    def __init__(self, t_max=1e3, samples=1000, n_theta=64):
        self.t_max = t_max
        self.samples = samples
        self.n_theta = n_theta

    def fit(self, X, y=None):
        if isinstance(X, ScalarDensity):
            rep = fit_scalar_ellipticity(X, (0.0, self.t_max), self.samples)
        else:
            rep = fit_full_ellipticity(X, self.t_max, self.samples, self.n_theta)
        self.report_ = rep
        self.mu_ = rep.mu_fit
        self.kappa_ = rep.kappa_fit
        return self


# ----------------------------------------------------------------------------
# exponent calculator


@dataclass
class ExponentSet:
    """Exponents for the regularity statements; any may be omitted.

    ``mu`` overrides ``max(mu1, mu2)`` for the non-splitting statement.
    """

    mu1: float | None = None
    mu2: float | None = None
    kappa: float | None = None
    varkappa: float | None = None
    gamma: float | None = None
    mu: float | None = None
    chi: float | None = None

    def __post_init__(self):
        for name in ("mu1", "mu2", "mu"):
            v = getattr(self, name)
            if v is not None and not v > 1.0:
                raise ValueError(f"{name} > 1 required (got {v})")
        if self.chi is not None and not self.chi > 2.0:
            raise ValueError(f"chi > 2 required (got {self.chi})")

    @property
    def mu_max(self):
        if self.mu is not None:
            return self.mu
        vals = [v for v in (self.mu1, self.mu2) if v is not None]
        return max(vals) if vals else None


def thm18_witness(mu1: float, gamma: float, max_halvings: int = 80):
    """``(tau_s, tau_alpha)`` with ``0 < tau_alpha < tau_s < 1 - mu1/2`` and ``gamma < 2(tau_s - tau_alpha)/(1 + 2 tau_s)``.

    Starts from ``tau_s = 0.9 (1 - mu1/2)``,
    ``tau_alpha = min(tau_s / 2, (1 - mu1/2 - tau_s) / 2)`` and, when that misses, moves ``tau_s`` toward ``1 - mu1/2`` and
    ``tau_alpha`` toward 0 together. Returns None if no pair is found.
    """
    eps0 = 1.0 - mu1 / 2.0
    if eps0 <= 0:
        return None

    def ok(ts, ta):
        return _thm18_conditions(mu1, gamma, ts, ta)

    ts = 0.9 * eps0
    ta = min(ts / 2, (eps0 - ts) / 2)
    if ok(ts, ta):
        return ts, ta
    e = 0.1 * eps0
    for _ in range(max_halvings):
        ts, ta = eps0 - e, e
        if ok(ts, ta):
            return ts, ta
        e *= 0.5
    return None


def _thm18_conditions(mu1, gamma, ts, ta):
    return (0 < ta < ts
            and gamma < 2 * (ts - ta) / (1 + 2 * ts)
            and ts - ta < 1 - mu1 / 2
            and ts < 1 - mu1 / 2)


def exponent_admissibility(e: ExponentSet) -> dict:
    """Verdict per statement plus the exponent bookkeeping of the proofs.

    Keys: ``thm14``, ``cor15``, ``cor16``, ``cor17``, ``thm18``; a verdict
    is None when the needed exponents are missing.
    """
    out: dict = {}
    mu1, mu2 = e.mu1, e.mu2
    mu2_ok = mu2 is None or mu2 > 1
    out["thm14"] = None if mu1 is None else bool(1 < mu1 < 2 and mu2_ok)
    if mu1 is None or mu2 is None:
        out["cor15"] = None
    else:
        out["cor15"] = bool(1 < mu1 and 1 < mu2 and max(mu1, mu2) < 2)
    mu = e.mu_max
    if mu is None or e.kappa is None:
        out["cor16"] = None
    else:
        out["cor16"] = bool(mu > 1 and -1 < e.kappa <= 1 and mu < 2 + e.kappa)
    if mu1 is None or e.varkappa is None:
        out["cor17"] = None
    else:
        out["cor17"] = bool(1 < mu1 and 0 <= e.varkappa < 2 - mu1 and mu2_ok)
    if mu1 is None or e.gamma is None:
        out["thm18"] = None
    else:
        bound = (2 - mu1) / (1 + (2 - mu1))
        out["thm18"] = bool(1 < mu1 < 2 and 0 <= e.gamma < bound and mu2_ok)
        out["thm18_gamma_bound"] = bound

    book: dict = {}
    if mu1 is not None and e.chi is not None:
        s = e.chi / 2 - 1
        eps_hat = 1 - mu1 / 2
        alpha = s - eps_hat / 2
        book["prop22"] = {"s": s, "eps_hat": eps_hat, "alpha": alpha,
                          "rhs_exponent": s + (2 + mu1) / 4, "lhs_exponent": s + 1}
    if out.get("cor16") and e.chi is not None:
        s = e.chi / 2 - 1
        lo, hi = s - (2 - mu) / 2, s + e.kappa / 2
        alpha = 0.5 * (lo + hi)
        book["cor16"] = {"s": s, "alpha": alpha,
                         "conditions": [alpha < s + e.kappa / 2, s < alpha + (2 - mu) / 2]}
    if out.get("thm18"):
        w = thm18_witness(mu1, e.gamma)
        if w is not None:
            ts, ta = w
            book["thm18"] = {"tau_s": ts, "tau_alpha": ta, "s": -0.5 + ts, "alpha": -0.5 + ta,
                             "conditions": [ta < ts, e.gamma < 2 * (ts - ta) / (1 + 2 * ts),
                                            ts - ta < 1 - mu1 / 2]}
        else:
            book["thm18"] = None
    out["bookkeeping"] = book
    return out


# ----------------------------------------------------------------------------
# level-curve probe


@dataclass
class LevelRecord:
    level: float
    radius: float
    curvature: float
    curvature_implicit: float
    grad_norm: float
    product: float
    ratio: float
    closure_gap: float
    arc_step: float
    level_error: float
    points: int
    ok: bool = True
    message: str = ""

    def row(self):
        return [self.level, self.radius, self.curvature, self.grad_norm, self.product, self.ratio]


@dataclass
class LevelCurveProbe:
    kappa: float
    levels: list
    records: list
    verdict: str
    ratio_slope: float
    product_trend: float
    linear_growth: bool
    curves: list = field(default_factory=list, repr=False)

    CSV_HEADER = ("c_k", "r_k", "|gamma''|", "|Df|", "product", "ratio")

    def to_dict(self):
        return {"kappa": self.kappa, "levels": list(self.levels), "verdict": self.verdict,
                "ratio_slope": self.ratio_slope, "product_trend": self.product_trend,
                "linear_growth": self.linear_growth,
                "records": [asdict(r) for r in self.records]}


def _implicit_curvature(f, p):
    g = f.gradient(p)
    H = f.hessian(p)
    gn = np.linalg.norm(g)
    tau = np.array([-g[1], g[0]]) / gn
    return float(abs(tau @ H @ tau) / gn), gn


def _project(f, p, c, tol=1e-13, maxit=50):
    for _ in range(maxit):
        r = float(f.value(p)) - c
        g = f.gradient(p)
        p = p - r * g / float(g @ g)
        if abs(r) <= tol * max(1.0, abs(c)):
            return p, True
    return p, abs(float(f.value(p)) - c) <= 1e-9 * max(1.0, abs(c))


def _start_point(f, c, r_max=1e12):
    e1 = np.array([1.0, 0.0])
    phi = lambda rho: float(f.value(rho * e1)) - c  # noqa: E731
    if phi(0.0) >= 0:
        raise ValueError(f"level {c} is not above f(0)")
    hi = 1.0
    while phi(hi) < 0:
        hi *= 2
        if hi > r_max:
            raise ValueError(f"level set [f <= {c}] is unbounded along the x-axis")
    return brentq(phi, 0.0, hi, xtol=1e-14, rtol=1e-15) * e1


def trace_level_curve(f, c: float, max_points: int = 200000):
    """Trace ``[f = c]`` counter-clockwise by tangent predictor and gradient corrector.

    Arc steps are ``min(0.1 / curvature, 0.01 * |p0|)``. Returns the point
    list (closed: the last point is the start) and the maximum step used.
    """
    p0 = _start_point(f, c)
    r0 = float(np.linalg.norm(p0))
    pts = [p0]
    p = p0
    angle = 0.0
    h_max = 0.0
    bound = 1e6 * max(r0, 1.0)
    for _ in range(max_points):
        k, gn = _implicit_curvature(f, p)
        h = min(0.1 / k if k > 0 else np.inf, 0.01 * r0)
        g = f.gradient(p)
        tau = np.array([-g[1], g[0]]) / gn
        q, ok = _project(f, p + h * tau, c)
        if not ok:
            raise RuntimeError(f"corrector did not converge on level {c}")
        if np.linalg.norm(q) > bound:
            raise ValueError(f"level set [f <= {c}] appears unbounded")
        dth = math.atan2(p[0] * q[1] - p[1] * q[0], p @ q)
        h_max = max(h_max, float(np.linalg.norm(q - p)))
        if angle + dth >= 2 * math.pi:
            gap = float(np.linalg.norm(p - p0))
            pts.append(p0)
            return np.array(pts), h_max, gap
        angle += dth
        pts.append(q)
        p = q
    raise RuntimeError(f"curve on level {c} did not close after {max_points} steps")


def _circle_curvature(a, b, c):
    ab, bc, ca = np.linalg.norm(b - a), np.linalg.norm(c - b), np.linalg.norm(a - c)
    cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    return 2.0 * abs(cross) / (ab * bc * ca)


def _local_curvature(f, p, c):
    """Three-point circle curvature from a short symmetric re-trace around ``p``."""
    k, gn = _implicit_curvature(f, p)
    g = f.gradient(p)
    tau = np.array([-g[1], g[0]]) / gn
    h = 1e-3 * min(1.0 / k if k > 0 else np.inf, float(np.linalg.norm(p)))
    a, _ = _project(f, p - h * tau, c)
    b, _ = _project(f, p + h * tau, c)
    return _circle_curvature(a, p, b)


def _contact_point(pts):
    """Point of maximal ``|p|`` (first in trace order), refined by a parabola through its neighbours."""
    body = pts[:-1]
    n = len(body)
    rad = np.linalg.norm(body, axis=1)
    i = int(np.argmax(rad))
    im, ip = (i - 1) % n, (i + 1) % n
    a, b, c = rad[im], rad[i], rad[ip]
    den = a - 2 * b + c
    shift = 0.5 * (a - c) / den if den < 0 else 0.0
    shift = float(np.clip(shift, -0.5, 0.5))
    r = b - 0.25 * (a - c) * shift
    return i, max(r, b)


def lemma1_probe(f, kappa: float, levels: Sequence[float], decay_slope: float = -0.1):
    """Numerical version of the curvature argument bounding the upper ellipticity exponent.

    For each level ``c_k`` the curve ``[f = c_k]`` is traced, the contact
    point with the circumscribed circle located, and the quantities
    ``|gamma''|``, ``|Df|``, ``product = |gamma''| |Df| (1+r)^kappa`` and
    ``ratio = r (1+r)^-kappa`` recorded. The verdict is ``violated`` when
    the ratio sequence decays (log-log slope against ``r`` below
    ``decay_slope``), ``consistent`` otherwise, and ``inapplicable`` for
    densities without linear growth.
    """
    levels = [float(c) for c in levels]
    if len(levels) < 2 or np.any(np.diff(levels) <= 0):
        raise ValueError("levels must be an increasing sequence of length >= 2")
    dirs = [np.array([math.cos(a), math.sin(a)]) for a in np.linspace(0, 2 * math.pi, 8, endpoint=False)]
    lin = all(recession(f, d).converged for d in dirs)
    records, curves = [], []
    for c in levels:
        try:
            pts, h, gap = trace_level_curve(f, c)
        except RuntimeError as exc:
            records.append(LevelRecord(c, *([math.nan] * 9), 0, ok=False, message=str(exc)))
            curves.append(None)
            continue
        i, r = _contact_point(pts)
        n = len(pts) - 1
        p = pts[i]
        kd = _local_curvature(f, p, c)
        ki, gn = _implicit_curvature(f, p)
        err = float(np.max(np.abs(f.value(pts) - c)) / abs(c))
        records.append(LevelRecord(c, r, kd, ki, gn, kd * gn * (1 + r) ** kappa,
                                   r * (1 + r) ** (-kappa), gap, h, err, n,
                                   ok=gap < h and err < 1e-6))
        curves.append(pts)
    good = [rec for rec in records if rec.ok]
    if len(good) >= 2:
        lr = np.log([rec.radius for rec in good])
        slope = float(np.polyfit(lr, np.log([rec.ratio for rec in good]), 1)[0])
        ptrend = float(np.polyfit(lr, np.log([rec.product for rec in good]), 1)[0])
    else:
        slope = ptrend = math.nan
    if not lin:
        verdict = "inapplicable"
    elif math.isnan(slope):
        verdict = "undetermined"
    else:
        verdict = "violated" if slope < decay_slope else "consistent"
    return LevelCurveProbe(float(kappa), levels, records, verdict, slope, ptrend, lin, curves)
