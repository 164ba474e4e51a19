"""Energy densities of linear growth, their regularizations and recession functions.

Scalar densities are even functions ``f(t) = h(|t|)`` built from a profile
``h`` on ``[0, inf)`` with ``h'(0) = 0``, so the even extension is ``C^2``.
Two-dimensional densities act on arrays of shape ``(..., 2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from ._validation import check_delta, check_positive

__all__ = [
    "ScalarDensity",
    "PhiMu",
    "MinimalSurface",
    "Softplus",
    "NearlyLinear",
    "Atoms",
    "Quadratic",
    "QuadratureDensity",
    "SplittingDensity",
    "RadialDensity",
    "Scheme",
    "RegularizedDensity",
    "GrowthConstants",
    "RecessionEstimate",
    "phi_mu",
    "minimal_surface",
    "appendix_examples",
    "regularize",
    "recession",
    "growth_constants",
    "check_growth",
    "make_scalar",
    "density_from_dict",
    "SCALAR_CATALOG",
]


class ScalarDensity:
    """Even strictly convex density of one real variable.

    Subclasses implement the profile on ``s >= 0`` through ``_value``,
    ``_deriv`` and ``_second``; the public methods take any real ``t``.

    Attributes
    ----------
    label : str
        Catalog key.
    params : dict
        Named real parameters, echoed in the JSON descriptor.
    closed_form : bool
        False when derivatives come from numerical quadrature.
    length_scale : float
        Smallest feature width; finite-difference checks scale their
        step with it.
    """

    label = "scalar"
    closed_form = True
    linear_growth_expected = True

    def __init__(self, **params):
        self.params = dict(params)
        self.length_scale = 1.0

    # profile on s >= 0
    def _value(self, s):
        raise NotImplementedError

    def _deriv(self, s):
        raise NotImplementedError

    def _second(self, s):
        raise NotImplementedError

    def _log_second(self, s):
        with np.errstate(divide="ignore"):
            return np.log(self._second(s))

    def value(self, t):
        t = np.asarray(t, dtype=float)
        return self._value(np.abs(t))

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        return np.sign(t) * self._deriv(np.abs(t))

    def second(self, t):
        t = np.asarray(t, dtype=float)
        return self._second(np.abs(t))

    def log_second(self, t):
        """``log f''(t)``, finite even where ``f''`` underflows."""
        t = np.asarray(t, dtype=float)
        return self._log_second(np.abs(t))

    def deriv_over_t(self, t):
        """``f'(t)/t`` with the limit ``f''(0)`` at the origin."""
        s = np.abs(np.asarray(t, dtype=float))
        small = s < 1e-6
        safe = np.where(small, 1.0, s)
        return np.where(small, self._second(s), self._deriv(safe) / safe)

    def _feature_scale(self, s):
        return np.full_like(s, self.length_scale)

    def fd_step(self, t, rel=1e-6):
        """Central-difference step at ``t``: ``rel * max(1, |t|)``, capped by local features."""
        t = np.asarray(t, dtype=float)
        return np.minimum(rel * np.maximum(1.0, np.abs(t)), 3e-3 * self._feature_scale(np.abs(t)))

    def to_dict(self):
        return {"key": self.label, "params": _jsonable(self.params)}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({args})"


class PhiMu(ScalarDensity):
    """``Phi_mu(t) = (mu - 1) int_0^t int_0^s (1 + r)^(-mu) dr ds``."""

    label = "phi_mu"

    def __init__(self, mu: float):
        mu = float(mu)
        if not mu > 1.0:
            raise ValueError(f"μ > 1 required (got mu={mu})")
        super().__init__(mu=mu)
        self.mu = mu

    def _value(self, s):
        mu = self.mu
        if mu == 2.0:
            big = s - np.log1p(s)
        else:
            a = 2.0 - mu
            big = s - np.expm1(a * np.log1p(s)) / a
        # series near 0 avoids cancellation
        small = (mu - 1.0) * (s**2 / 2 - mu * s**3 / 6 + mu * (mu + 1) * s**4 / 24)
        return np.where(s < 1e-4, small, big)

    def _deriv(self, s):
        return -np.expm1((1.0 - self.mu) * np.log1p(s))

    def _second(self, s):
        return (self.mu - 1.0) * np.exp(-self.mu * np.log1p(s))

    def _log_second(self, s):
        return math.log(self.mu - 1.0) - self.mu * np.log1p(s)


class MinimalSurface(ScalarDensity):
    """Profile ``(1 + t^k)^(1/k)``; ``f''`` is unbounded at 0 when ``k < 2``."""

    label = "minimal_surface"

    def __init__(self, k: float = 2.0):
        k = float(k)
        if not k > 1.0:
            raise ValueError(f"k > 1 required (got k={k})")
        super().__init__(k=k)
        self.k = k

    def _value(self, s):
        return (1.0 + s**self.k) ** (1.0 / self.k)

    def _deriv(self, s):
        k = self.k
        return s ** (k - 1) * (1.0 + s**k) ** (1.0 / k - 1.0)

    def _second(self, s):
        k = self.k
        with np.errstate(divide="ignore"):
            return (k - 1) * s ** (k - 2) * (1.0 + s**k) ** (1.0 / k - 2.0)


class Softplus(ScalarDensity):
    """``ln(2 cosh(t/2))``: the even ``C^2`` density with ``f'' = 1/(4 cosh^2(t/2))``.

    On ``t >= 0`` it equals ``ln(1 + e^t) - t/2``.
    """

    label = "softplus"

    def _value(self, s):
        return s / 2 + np.log1p(np.exp(-s))

    def _deriv(self, s):
        return 0.5 * np.tanh(s / 2)

    def _second(self, s):
        return np.exp(self._log_second(s))

    def _log_second(self, s):
        x = s / 2
        logcosh = x + np.log1p(np.exp(-2 * x)) - math.log(2.0)
        return -math.log(4.0) - 2.0 * logcosh


class NearlyLinear(ScalarDensity):
    """Density with ``h''(t) = (2/e) / ((1 + t) ln(1 + t))`` for ``t >= e - 1``.

    Below ``t0 = e - 1`` the second derivative is the cubic
    ``H0 + H1 t^2 (t - t0) / t0^2`` matching value and slope at ``t0``,
    which keeps ``h'' >= H0 > 0`` and ``h'(0) = 0``. The tail gives
    ``h'(t) ~ (2/e) ln ln(1 + t)``, so the growth is only nearly linear.
    """

    label = "nearly_linear"
    linear_growth_expected = False
    t0 = math.e - 1.0
    H0 = 2.0 / math.e**2
    H1 = -4.0 / math.e**3

    def __init__(self):
        super().__init__()
        a, t0 = self.H1 / self.t0**2, self.t0
        self._a = a
        self._d1_t0 = self.H0 * t0 + a * (t0**4 / 4 - t0**4 / 3)
        self._v_t0 = self.H0 * t0**2 / 2 + a * (t0**5 / 20 - t0**5 / 12)
        self._ei1 = special.expi(1.0)

    def _value(self, s):
        a, t0 = self._a, self.t0
        inner = self.H0 * s**2 / 2 + a * (s**5 / 20 - t0 * s**4 / 12)
        L = np.log1p(np.maximum(s, t0))
        outer = (self._v_t0 + self._d1_t0 * (s - t0)
                 + (2 / math.e) * ((1 + s) * np.log(L) - special.expi(L) + self._ei1))
        return np.where(s <= t0, inner, outer)

    def _deriv(self, s):
        a, t0 = self._a, self.t0
        inner = self.H0 * s + a * (s**4 / 4 - t0 * s**3 / 3)
        outer = self._d1_t0 + (2 / math.e) * np.log(np.log1p(np.maximum(s, t0)))
        return np.where(s <= t0, inner, outer)

    def _second(self, s):
        a, t0 = self._a, self.t0
        inner = self.H0 + a * (s**3 - t0 * s**2)
        ss = np.maximum(s, t0)
        outer = (2 / math.e) / ((1 + ss) * np.log1p(ss))
        return np.where(s <= t0, inner, outer)


class Atoms(ScalarDensity):
    """``h''(t) = sum_i exp(-(t - i)^2 / sigma_i^2) + floor (1 + t)^(-2)``, i = 1..N.

    ``sigma_i = sigma_base**i`` unless explicit ``sigmas`` are given. The
    truncated tail ``sum_{i > N} sigma_i`` is reported as ``tail_bound``.
    The floor term stands in for the discarded atoms and keeps ``h'' > 0``
    where the Gaussians underflow.
    """

    label = "atoms"

    def __init__(self, n_atoms: int = 20, sigma_base: float = 0.5,
                 sigmas: Sequence[float] | None = None, floor: float = 1e-12):
        if sigmas is None:
            if not 0.0 < sigma_base < 1.0:
                raise ValueError(
                    f"sum of sigma_i diverges for sigma_base={sigma_base}; need 0 < sigma_base < 1")
            n_atoms = int(n_atoms)
            if n_atoms < 1:
                raise ValueError("n_atoms >= 1 required")
            sig = sigma_base ** np.arange(1, n_atoms + 1, dtype=float)
            tail = sigma_base ** (n_atoms + 1) / (1.0 - sigma_base)
            super().__init__(n_atoms=n_atoms, sigma_base=float(sigma_base), floor=float(floor))
        else:
            sig = np.asarray(sigmas, dtype=float)
            if sig.ndim != 1 or sig.size == 0 or np.any(sig <= 0):
                raise ValueError("sigmas must be a non-empty list of positive reals")
            tail = 0.0
            super().__init__(sigmas=sig.tolist(), floor=float(floor))
        check_positive(floor, "floor", strict=False)
        self.sigmas = sig
        self.centers = np.arange(1, sig.size + 1, dtype=float)
        self.floor = float(floor)
        self.tail_bound = float(tail)
        self.length_scale = float(sig.min())

    def _split(self, s):
        s = np.asarray(s, dtype=float)
        return s[..., None], self.centers, self.sigmas

    def _value(self, s):
        x, c, sg = self._split(s)
        G = lambda z: z * special.erf(z) + np.exp(-z * z) / math.sqrt(math.pi)  # noqa: E731
        atoms = (math.sqrt(math.pi) / 2) * sg * (
            sg * (G((x - c) / sg) - G(-c / sg)) + x * special.erf(c / sg))
        return atoms.sum(axis=-1) + self.floor * (s - np.log1p(s))

    def _deriv(self, s):
        x, c, sg = self._split(s)
        atoms = (math.sqrt(math.pi) / 2) * sg * (special.erf((x - c) / sg) + special.erf(c / sg))
        return atoms.sum(axis=-1) + self.floor * (1.0 - 1.0 / (1.0 + s))

    def _second(self, s):
        x, c, sg = self._split(s)
        return np.exp(-(((x - c) / sg) ** 2)).sum(axis=-1) + self.floor / (1.0 + s) ** 2

    def _feature_scale(self, s):
        x, c, sg = self._split(s)
        return np.min(np.maximum(sg, np.abs(x - c)), axis=-1)

    def second_integral(self):
        """``int_0^inf h''`` in closed form (the recession slope)."""
        c, sg = self.centers, self.sigmas
        return float(np.sum((math.sqrt(math.pi) / 2) * sg * (1 + special.erf(c / sg))) + self.floor)


class Quadratic(ScalarDensity):
    """``scale * t^2 / 2``; superlinear control case."""

    label = "quadratic"
    linear_growth_expected = False

    def __init__(self, scale: float = 1.0):
        super().__init__(scale=float(scale))
        self.scale = float(scale)

    def _value(self, s):
        return self.scale * s**2 / 2

    def _deriv(self, s):
        return self.scale * s

    def _second(self, s):
        return self.scale * np.ones_like(s)


class QuadratureDensity(ScalarDensity):
    """Density given only through ``h''``; ``h'`` and ``h`` by adaptive quadrature.

    Uses ``h'(t) = int_0^t h''`` and ``h(t) = int_0^t (t - r) h''(r) dr``.
    """

    closed_form = False

    def __init__(self, second: Callable[[float], float], label: str = "quadrature", **params):
        super().__init__(**params)
        self.label = label
        self._h2 = second

    def _quad(self, s, weight):
        out = np.empty(np.shape(s))
        flat = np.ravel(s)
        res = out.reshape(-1)
        for i, si in enumerate(flat):
            res[i] = integrate.quad(lambda r: weight(si, r) * self._h2(r), 0.0, si,
                                    limit=200, epsabs=1e-13, epsrel=1e-12)[0] if si > 0 else 0.0
        return out

    def _value(self, s):
        return self._quad(np.asarray(s, dtype=float), lambda t, r: t - r)

    def _deriv(self, s):
        return self._quad(np.asarray(s, dtype=float), lambda t, r: 1.0)

    def _second(self, s):
        return np.vectorize(self._h2, otypes=[float])(s)


def phi_mu(mu: float) -> PhiMu:
    return PhiMu(mu)


def minimal_surface(k: float = 2.0) -> MinimalSurface:
    return MinimalSurface(k)


def appendix_examples(n_atoms: int = 20, sigma_base: float = 0.5) -> list[ScalarDensity]:
    """The three one-dimensional examples: nearly linear, softplus, atoms."""
    return [NearlyLinear(), Softplus(), Atoms(n_atoms=n_atoms, sigma_base=sigma_base)]


SCALAR_CATALOG: dict[str, Callable[..., ScalarDensity]] = {
    "phi_mu": PhiMu,
    "minimal_surface": MinimalSurface,
    "softplus": Softplus,
    "nearly_linear": NearlyLinear,
    "atoms": Atoms,
    "quadratic": Quadratic,
}


def make_scalar(key: str, **params) -> ScalarDensity:
    try:
        factory = SCALAR_CATALOG[key]
    except KeyError:
        raise ValueError(f"unknown density key {key!r}; known: {sorted(SCALAR_CATALOG)}") from None
    return factory(**params)


# ----------------------------------------------------------------------------
# two-dimensional densities


class SplittingDensity:
    """``f(xi) = sum_i f_i(xi_i)``; the Hessian is diagonal."""

    def __init__(self, components: Sequence[ScalarDensity]):
        components = list(components)
        if len(components) < 2:
            raise ValueError("a splitting density needs at least two components")
        self.components = components
        self.dim = len(components)

    def value(self, xi):
        xi = np.asarray(xi, dtype=float)
        return sum(f.value(xi[..., i]) for i, f in enumerate(self.components))

    def gradient(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.stack([f.deriv(xi[..., i]) for i, f in enumerate(self.components)], axis=-1)

    def hessian_diag(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.stack([f.second(xi[..., i]) for i, f in enumerate(self.components)], axis=-1)

    def hessian(self, xi):
        d = self.hessian_diag(xi)
        H = np.zeros(d.shape + (self.dim,))
        idx = np.arange(self.dim)
        H[..., idx, idx] = d
        return H

    def to_dict(self):
        return {"key": "splitting", "components": [f.to_dict() for f in self.components]}

    def __repr__(self):
        return f"SplittingDensity({self.components!r})"


class RadialDensity:
    """``f(xi) = Phi(|xi|)`` for an even profile ``Phi``."""

    dim = 2

    def __init__(self, profile: ScalarDensity):
        self.profile = profile

    def value(self, xi):
        return self.profile.value(np.linalg.norm(xi, axis=-1))

    def gradient(self, xi):
        xi = np.asarray(xi, dtype=float)
        r = np.linalg.norm(xi, axis=-1)
        return self.profile.deriv_over_t(r)[..., None] * xi

    def hessian(self, xi):
        xi = np.asarray(xi, dtype=float)
        r = np.linalg.norm(xi, axis=-1)
        rs = np.where(r > 0, r, 1.0)
        n = xi / rs[..., None]
        nn = n[..., :, None] * n[..., None, :]
        tang = self.profile.deriv_over_t(r)[..., None, None]
        rad = self.profile.second(r)[..., None, None]
        eye = np.eye(xi.shape[-1])
        return np.where((r > 0)[..., None, None], rad * nn + tang * (eye - nn), rad * eye)

    def to_dict(self):
        return {"key": "radial", "profile": self.profile.to_dict()}

    def __repr__(self):
        return f"RadialDensity({self.profile!r})"


@dataclass(frozen=True)
class Scheme:
    """Regularizer ``delta * sum_terms |P xi|^q / q`` over coordinate subsets ``P``.

    ``kind`` is one of ``quadratic``, ``qpower``, ``mixed``, ``thm18``.
    """

    kind: str = "quadratic"
    q: float = 2.0
    gamma: float = 0.0

    @classmethod
    def quadratic(cls):
        return cls("quadratic")

    @classmethod
    def qpower(cls, q=None, kappa=None):
        if q is None:
            if kappa is None:
                raise ValueError("qpower scheme needs q or kappa")
            q = 2.0 - kappa
        return cls("qpower", q=float(q))

    @classmethod
    def mixed(cls, varkappa):
        return cls("mixed", q=2.0 + float(varkappa))

    @classmethod
    def thm18(cls, gamma):
        return cls("thm18", q=2.0 + float(gamma), gamma=float(gamma))

    def terms(self, dim=2):
        """List of ``(q, axes)`` pairs."""
        allax = tuple(range(dim))
        if self.kind == "quadratic":
            return [(2.0, allax)]
        if self.kind == "qpower":
            return [(self.q, allax)]
        if self.kind == "mixed":
            return [(self.q, (0,)), (2.0, allax)]
        if self.kind == "thm18":
            return [(2.0, (0,)), (self.q, (1,))]
        raise ValueError(f"unknown scheme {self.kind!r}")

    def validate(self):
        if self.kind not in ("quadratic", "qpower", "mixed", "thm18"):
            raise ValueError(f"unknown scheme {self.kind!r}")
        if self.q <= 1.0:
            raise ValueError(f"q > 1 required (got q={self.q})")
        if self.q < 2.0:
            raise ValueError(f"q >= 2 required for a C^2 regularizer (got q={self.q})")
        return self

    def to_dict(self):
        return {"kind": self.kind, "q": self.q, "gamma": self.gamma}


class RegularizedDensity:
    """``f_delta = regularizer + base``; ``base=None`` leaves the regularizer alone."""

    dim = 2

    def __init__(self, base, delta: float, scheme: Scheme | None = None):
        self.base = base
        self.delta = check_delta(delta)
        self.scheme = (scheme or Scheme.quadratic()).validate()
        self._terms = self.scheme.terms(self.dim)

    def _reg(self, xi, order):
        xi = np.asarray(xi, dtype=float)
        out = None
        for q, axes in self._terms:
            mask = np.zeros(self.dim)
            mask[list(axes)] = 1.0
            p = xi * mask
            r = np.linalg.norm(p, axis=-1)
            if order == 0:
                term = r**q / q
            elif order == 1:
                term = (r ** (q - 2))[..., None] * p if q != 2 else p
            else:
                P = np.diag(mask)
                if q == 2:
                    term = np.broadcast_to(P, xi.shape + (self.dim,)).copy()
                else:
                    rs = np.where(r > 0, r, 1.0)
                    n = p / rs[..., None]
                    nn = n[..., :, None] * n[..., None, :]
                    term = (r ** (q - 2))[..., None, None] * (P + (q - 2) * nn)
            out = term if out is None else out + term
        return self.delta * out

    def regularizer_value(self, xi):
        return self._reg(xi, 0)

    def regularizer_gradient(self, xi):
        return self._reg(xi, 1)

    def value(self, xi):
        v = self._reg(xi, 0)
        return v if self.base is None else v + self.base.value(xi)

    def gradient(self, xi):
        g = self._reg(xi, 1)
        return g if self.base is None else g + self.base.gradient(xi)

    def hessian(self, xi):
        H = self._reg(xi, 2)
        return H if self.base is None else H + self.base.hessian(xi)

    def base_gradient(self, xi):
        if self.base is None:
            return np.zeros(np.shape(xi))
        return self.base.gradient(xi)

    def to_dict(self):
        return {
            "key": "regularized",
            "delta": self.delta,
            "scheme": self.scheme.to_dict(),
            "base": None if self.base is None else self.base.to_dict(),
        }

    def __repr__(self):
        return f"RegularizedDensity({self.base!r}, delta={self.delta}, scheme={self.scheme.kind})"


def regularize(base, delta: float, scheme: Scheme | str = "quadratic", **kw) -> RegularizedDensity:
    """Attach a ``delta``-regularizer to a two-dimensional density.

    ``scheme`` is a :class:`Scheme` or a kind name with keyword arguments
    (``q``/``kappa`` for ``qpower``, ``varkappa`` for ``mixed``, ``gamma``
    for ``thm18``). For ``thm18`` the second component carries
    ``delta/(gamma+2) |t|^(gamma+2)``.
    """
    if isinstance(scheme, str):
        factory = {"quadratic": Scheme.quadratic, "qpower": Scheme.qpower,
                   "mixed": Scheme.mixed, "thm18": Scheme.thm18}.get(scheme)
        if factory is None:
            raise ValueError(f"unknown scheme {scheme!r}")
        scheme = factory(**kw)
    return RegularizedDensity(base, delta, scheme)


def density_from_dict(d: dict):
    """Rebuild a density from its JSON descriptor."""
    key = d["key"]
    if key == "splitting":
        return SplittingDensity([density_from_dict(c) for c in d["components"]])
    if key == "radial":
        return RadialDensity(density_from_dict(d["profile"]))
    if key == "regularized":
        base = None if d["base"] is None else density_from_dict(d["base"])
        s = d["scheme"]
        return RegularizedDensity(base, d["delta"], Scheme(s["kind"], s["q"], s["gamma"]))
    return make_scalar(key, **d.get("params", {}))


# ----------------------------------------------------------------------------
# recession function and growth constants


@dataclass
class RecessionEstimate:
    value: float
    error: float
    converged: bool
    monotone: bool
    samples: list = field(default_factory=list)

    def __float__(self):
        return float(self.value)


RECESSION_SCALES = (1e3, 1e4, 1e5, 1e6, 1e7, 1e8)


def _aitken(q0, q1, q2):
    d1, d2 = q1 - q0, q2 - q1
    den = d2 - d1
    if d1 == 0.0 or abs(den) <= 1e-300:
        return q2, 0.0
    return q2 - d2 * d2 / den, d2 / d1


def recession(f, direction, scales: Sequence[float] = RECESSION_SCALES, rtol: float = 1e-3):
    """Estimate ``f_inf(xi) = lim f(t xi) / t``.

    The quotients ``(f(t xi) - f(0)) / t`` at the given geometric scales are
    accelerated with Aitken's delta-squared process on the two trailing
    triples; their disagreement is the error estimate. A ratio of
    successive increments outside ``(-1, 1)`` means divergence.
    """
    xi = np.asarray(direction, dtype=float)
    if isinstance(f, ScalarDensity):
        xi = xi.reshape(-1)[0] if xi.size == 1 else xi
        if np.ndim(xi) != 0:
            raise ValueError("scalar density needs a scalar direction")
        evalf = f.value
        zero = 0.0
    else:
        evalf = f.value
        zero = np.zeros_like(xi)
    f0 = float(evalf(zero))
    ts = np.asarray(scales, dtype=float)
    q = np.array([(float(evalf(t * xi)) - f0) / t for t in ts])
    monotone = bool(np.all(np.diff(q) >= -1e-12 * np.maximum(1.0, np.abs(q[1:]))))
    if len(q) < 4:
        raise ValueError("need at least four scales")
    a1, r1 = _aitken(*q[-4:-1])
    a2, r2 = _aitken(*q[-3:])
    diverging = abs(r1) >= 1.0 or abs(r2) >= 1.0
    err = abs(a2 - a1)
    scale = max(abs(a2), 1e-300)
    converged = (not diverging) and err <= rtol * scale
    value = a2 if not diverging else float(q[-1])
    return RecessionEstimate(float(value), float(err) if not diverging else math.inf,
                             bool(converged), monotone, q.tolist())


@dataclass
class GrowthConstants:
    a1: float
    a2: float
    a3: float
    a4: float
    slope: float
    slope_converged: bool
    linear_growth: bool
    range: tuple

    def as_tuple(self):
        return (self.a1, self.a2, self.a3, self.a4)


def check_growth(f: ScalarDensity, consts, t) -> bool:
    """Check ``a1|t| - a2 <= f(t) <= a3|t| + a4`` at the samples ``t``."""
    a1, a2, a3, a4 = consts
    t = np.asarray(t, dtype=float)
    v = f.value(t)
    tol = 1e-12 * (1 + np.abs(v))
    return bool(np.all(a1 * np.abs(t) - a2 <= v + tol) and np.all(v <= a3 * np.abs(t) + a4 + tol))


def growth_constants(f: ScalarDensity, range_=(0.0, 100.0), samples: int = 2001) -> GrowthConstants:
    """Certified linear-growth constants of ``f`` on ``range_``.

    Upper line: slope ``a3`` is the recession slope (or ``f'`` at the range
    end if that is larger or the recession did not converge) and ``a4`` the
    largest sampled excess. Lower line: tangent at the range end, valid on
    the whole line by convexity.
    """
    lo, hi = map(float, range_)
    if not hi > lo:
        raise ValueError("range must be a bounded interval with hi > lo")
    T = max(abs(lo), abs(hi))
    t = np.linspace(lo, hi, samples)
    rec = recession(f, 1.0)
    dT = float(f.deriv(T))
    a3 = max(rec.value, dT) if rec.converged else dT
    a4 = max(0.0, float(np.max(f.value(t) - a3 * np.abs(t))))
    fT = float(f.value(T))
    a1 = dT
    a2 = max(0.0, dT * T - fT)
    ok = a1 > 0 and rec.converged
    return GrowthConstants(a1, a2, a3, a4, rec.value, rec.converged, bool(ok), (lo, hi))


def _jsonable(params):
    out = {}
    for k, v in params.items():
        if isinstance(v, np.ndarray):
            v = v.tolist()
        elif isinstance(v, np.generic):
            v = v.item()
        out[k] = v
    return out
