"""Grid discretization of the regularized Dirichlet problem and its damped Newton solver.

Nodes are stored row-major: ``values[j, i]`` sits at ``(x[i], y[j])`` and
the flat index is ``j * nx + i``.

Energy quadrature: every cell is split four ways by its corners. At each
corner the gradient is taken from the two cell edges meeting there (a
forward or backward difference per axis), each with weight
``hx * hy / 4``. This is the average of the two P1 triangulations of the
cell. It is convex in the nodal values for convex densities and has no
hourglass modes. For splitting densities it reduces to one difference per
grid edge, a monotone scheme with a discrete maximum principle.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_field_values, check_positive
from .densities import RegularizedDensity, regularize

logger = logging.getLogger(__name__)

__all__ = [
    "Grid",
    "DiscreteField",
    "CutoffField",
    "SolveReport",
    "Derivatives",
    "discrete_energy",
    "energy_gradient",
    "energy_hessian",
    "euler_residual",
    "minimize",
    "DirichletMinimizer",
    "directional_derivatives",
    "coons_interpolation",
]


@dataclass(frozen=True)
class Grid:
    """Uniform node grid on ``[xmin, xmax] x [ymin, ymax]``."""

    nx: int = 65
    ny: int = 65
    xmin: float = 0.0
    xmax: float = 1.0
    ymin: float = 0.0
    ymax: float = 1.0

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise ValueError("node counts must be integers")
        if self.nx < 3 or self.ny < 3:
            raise ValueError(f"need at least 3 nodes per axis (got {self.nx}x{self.ny})")
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError("rectangle bounds must satisfy xmax > xmin and ymax > ymin")

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def hx(self):
        return (self.xmax - self.xmin) / (self.nx - 1)

    @property
    def hy(self):
        return (self.ymax - self.ymin) / (self.ny - 1)

    @property
    def area(self):
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)

    @property
    def x(self):
        return np.linspace(self.xmin, self.xmax, self.nx)

    @property
    def y(self):
        return np.linspace(self.ymin, self.ymax, self.ny)

    def mesh(self):
        return np.meshgrid(self.x, self.y)

    @property
    def boundary_mask(self):
        m = np.zeros(self.shape, dtype=bool)
        m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = True
        return m

    def to_dict(self):
        return {"nx": self.nx, "ny": self.ny, "xmin": self.xmin, "xmax": self.xmax,
                "ymin": self.ymin, "ymax": self.ymax}

    @cached_property
    def _operators(self):
        return _GradientOperator(self)


@dataclass
class DiscreteField:
    """Nodal values on a :class:`Grid`; boundary nodes carry the Dirichlet data."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = check_field_values(self.values, self.grid).copy()

    @classmethod
    def from_function(cls, grid: Grid, func):
        X, Y = grid.mesh()
        return cls(grid, np.broadcast_to(np.asarray(func(X, Y), dtype=float), grid.shape))

    @property
    def boundary_mask(self):
        return self.grid.boundary_mask

    @property
    def interior(self):
        return self.values[1:-1, 1:-1]

    def copy(self):
        return DiscreteField(self.grid, self.values.copy())


def coons_interpolation(values: np.ndarray) -> np.ndarray:
    """Transfinite bilinear interpolation of the boundary ring into the interior.

    Exact for bilinear (hence affine) data.
    """
    v = np.asarray(values, dtype=float)
    ny, nx = v.shape
    s = np.linspace(0.0, 1.0, nx)[None, :]
    t = np.linspace(0.0, 1.0, ny)[:, None]
    bottom, top = v[0, :][None, :], v[-1, :][None, :]
    left, right = v[:, 0][:, None], v[:, -1][:, None]
    out = ((1 - t) * bottom + t * top + (1 - s) * left + s * right
           - ((1 - s) * (1 - t) * v[0, 0] + s * (1 - t) * v[0, -1]
              + (1 - s) * t * v[-1, 0] + s * t * v[-1, -1]))
    out[0, :], out[-1, :], out[:, 0], out[:, -1] = v[0, :], v[-1, :], v[:, 0], v[:, -1]
    return out


class _GradientOperator:
    """Sparse map from nodal values to the ``4 * cells`` corner gradients."""

    def __init__(self, grid: Grid):
        nx, ny, hx, hy = grid.nx, grid.ny, grid.hx, grid.hy
        idx = np.arange(nx * ny).reshape(ny, nx)
        n00, n10 = idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel()
        n01, n11 = idx[1:, :-1].ravel(), idx[1:, 1:].ravel()
        ncell = n00.size
        # per corner: (x-edge start, x-edge end), (y-edge start, y-edge end)
        corners = [((n00, n10), (n00, n01)), ((n00, n10), (n10, n11)),
                   ((n01, n11), (n00, n01)), ((n01, n11), (n10, n11))]
        rows, cols, vals = [], [], []
        for c, ((xa, xb), (ya, yb)) in enumerate(corners):
            q = 4 * np.arange(ncell) + c
            rows += [2 * q, 2 * q, 2 * q + 1, 2 * q + 1]
            cols += [xb, xa, yb, ya]
            vals += [np.full(ncell, 1 / hx), np.full(ncell, -1 / hx),
                     np.full(ncell, 1 / hy), np.full(ncell, -1 / hy)]
        nq = 4 * ncell
        B = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(2 * nq, nx * ny))
        interior = ~grid.boundary_mask.ravel()
        self.nq = nq
        self.ncell = ncell
        self.weight = hx * hy / 4
        self.B = B
        self.interior = interior
        self.B_int = B[:, np.flatnonzero(interior)].tocsr()
        self.B_int_T = self.B_int.T.tocsr()

    def gradients(self, values):
        return (self.B @ np.asarray(values).ravel()).reshape(self.nq, 2)


@dataclass
class SolveReport:
    iterations: int = 0
    energy: float = float("nan")
    residual: float = float("nan")
    initial_residual: float = float("nan")
    tolerance: float = float("nan")
    backtracks: int = 0
    status: str = "maxed"
    message: str = ""
    energies: list = field(default_factory=list)
    residuals: list = field(default_factory=list)

    @property
    def converged(self):
        return self.status == "converged"

    def to_dict(self):
        return {"iterations": self.iterations, "energy": self.energy, "residual": self.residual,
                "initial_residual": self.initial_residual, "tolerance": self.tolerance,
                "backtracks": self.backtracks, "status": self.status, "message": self.message}


def _as_values(u, grid=None):
    if isinstance(u, DiscreteField):
        return u.grid, u.values
    if grid is None:
        raise TypeError("pass a DiscreteField or a grid")
    return grid, check_field_values(u, grid)


def _density_values(density, G, where="energy"):
    v = density.value(G)
    if not np.all(np.isfinite(v)):
        bad = int(np.flatnonzero(~np.isfinite(v))[0])
        raise FloatingPointError(f"non-finite density value in {where} at cell {bad // 4}")
    return v


def discrete_energy(density, u, grid=None) -> float:
    """Quadrature of ``int f_delta(grad u)`` with the corner-gradient rule."""
    grid, values = _as_values(u, grid)
    op = grid._operators
    G = op.gradients(values)
    return float(op.weight * np.sum(_density_values(density, G)))


def energy_gradient(density, u, grid=None) -> np.ndarray:
    """Derivative of the discrete energy w.r.t. the nodal values; zero on the boundary.

    At interior nodes this is the weak discrete divergence of ``Df_delta(grad u)``.
    """
    grid, values = _as_values(u, grid)
    op = grid._operators
    sigma = density.gradient(op.gradients(values))
    g = op.B.T @ (op.weight * sigma.ravel())
    g = g.reshape(grid.shape)
    g[grid.boundary_mask] = 0.0
    return g


def energy_hessian(density, u, grid=None) -> sp.csr_matrix:
    """Sparse Hessian of the discrete energy restricted to interior nodes."""
    grid, values = _as_values(u, grid)
    op = grid._operators
    H = density.hessian(op.gradients(values)) * op.weight
    D = sp.bsr_matrix((H, np.arange(op.nq), np.arange(op.nq + 1)), shape=(2 * op.nq, 2 * op.nq))
    return (op.B_int_T @ (D @ op.B_int)).tocsr()


def euler_residual(density, u, grid=None) -> float:
    """Sup norm over interior nodes of the discrete Euler operator (the energy gradient)."""
    return float(np.max(np.abs(energy_gradient(density, u, grid))))


def _solve_linear(H, rhs, method="direct"):
    if method == "direct":
        try:
            return spla.splu(H.tocsc()).solve(rhs), "direct"
        except RuntimeError as exc:
            logger.warning("sparse factorization failed (%s); falling back to CG", exc)
    diag = H.diagonal()
    if np.any(diag <= 0):
        raise np.linalg.LinAlgError("non-positive Hessian diagonal")
    M = sp.diags(1.0 / diag)
    x, info = spla.cg(H, rhs, M=M, rtol=1e-10, maxiter=10 * H.shape[0])
    if info != 0:
        raise np.linalg.LinAlgError(f"CG did not converge (info={info})")
    return x, "cg"


def minimize(density, boundary, *, tol: float = 1e-9, max_iter: int = 200,
             u_init=None, linear_solver: str = "direct", armijo: float = 1e-4,
             max_halvings: int = 50):
    """Damped Newton minimization of the discrete ``J_delta`` with Dirichlet data.

    Parameters
    ----------
    density : RegularizedDensity
        Strictly convex density ``f_delta``.
    boundary : DiscreteField
        Its boundary nodes are the Dirichlet data; interior values are ignored.
    tol : float
        Relative tolerance; the solve stops once the sup norm of the energy
        gradient is at most ``tol * (1 + initial residual)``.
    u_init : DiscreteField or array, optional
        Starting iterate (warm start). Its boundary is overwritten by the
        data. Defaults to the Coons interpolation of the boundary.

    Returns
    -------
    field : DiscreteField
    report : SolveReport
    """
    if not isinstance(boundary, DiscreteField):
        raise TypeError("boundary data must be a DiscreteField")
    grid = boundary.grid
    mask = grid.boundary_mask
    if u_init is None:
        u = coons_interpolation(boundary.values)
    else:
        u = np.array(u_init.values if isinstance(u_init, DiscreteField) else u_init, dtype=float)
        check_field_values(u, grid)
        u[mask] = boundary.values[mask]
    op = grid._operators
    inner = op.interior.reshape(grid.shape)

    def energy(vals):
        return op.weight * float(np.sum(_density_values(density, op.gradients(vals))))

    report = SolveReport()
    E = energy(u)
    g = energy_gradient(density, u, grid)[inner]
    res = float(np.max(np.abs(g))) if g.size else 0.0
    report.initial_residual = res
    atol = tol * (1.0 + res)
    report.tolerance = atol
    report.energies.append(E)
    report.residuals.append(res)

    for it in range(max_iter):
        if res <= atol:
            report.status = "converged"
            break
        try:
            p, _ = _solve_linear(energy_hessian(density, u, grid), -g, linear_solver)
        except (np.linalg.LinAlgError, RuntimeError, ValueError) as exc:
            report.status, report.message = "failed", f"Hessian solve breakdown: {exc}"
            break
        slope = float(g @ p)
        if not np.isfinite(slope) or slope >= 0:
            p, slope = -g, -float(g @ g)
        alpha, accepted = 1.0, False
        noise = 1e-13 * max(abs(E), 1.0)
        # predicted decrease below energy roundoff: Armijo cannot discriminate
        halvings = 0 if -slope < 10 * noise else max_halvings
        for _ in range(halvings + 1):
            trial = u.copy()
            trial[inner] += alpha * p
            E_trial = energy(trial)
            if E_trial <= E + armijo * alpha * slope:
                accepted = True
                break
            alpha *= 0.5
            report.backtracks += 1
        if not accepted:
            # energy differences below roundoff: accept the full step if it lowers the residual
            trial = u.copy()
            trial[inner] += p
            g_trial = energy_gradient(density, trial, grid)[inner]
            E_trial = energy(trial)
            if np.max(np.abs(g_trial)) < res and E_trial <= E + noise:
                alpha = 1.0
            else:
                report.status = "failed"
                report.message = f"line search found no decrease after {max_halvings} halvings"
                break
        u = trial
        E = E_trial
        g = energy_gradient(density, u, grid)[inner]
        res = float(np.max(np.abs(g)))
        report.iterations = it + 1
        report.energies.append(E)
        report.residuals.append(res)
    else:
        if res <= atol:
            report.status = "converged"
    report.energy = E
    report.residual = res
    return DiscreteField(grid, u), report


class DirichletMinimizer(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`minimize`.

    ``fit`` takes Dirichlet data as a :class:`DiscreteField`; the solution
    is stored in ``field_`` and ``transform`` returns its nodal values.

    Parameters
    ----------
    density : two-dimensional density or None
        Base density ``f``; None solves the pure regularizer problem.
    delta : float
        Regularization weight in ``(0, 1]``.
    scheme : str
        Regularization scheme name, see :func:`lingrowth.densities.regularize`.
    scheme_params : dict or None
        Extra arguments of the scheme (``q``, ``kappa``, ``varkappa``, ``gamma``).
    """

    def __init__(self, density=None, delta=1e-2, scheme="quadratic", scheme_params=None,
                 tol=1e-9, max_iter=200, linear_solver="direct"):
        self.density = density
        self.delta = delta
        self.scheme = scheme
        self.scheme_params = scheme_params
        self.tol = tol
        self.max_iter = max_iter
        self.linear_solver = linear_solver

    def regularized_density(self) -> RegularizedDensity:
        return regularize(self.density, self.delta, self.scheme, **(self.scheme_params or {}))

    def fit(self, X, y=None, u_init=None):
        check_positive(self.tol, "tol")
        f_delta = self.regularized_density()
        self.field_, self.report_ = minimize(f_delta, X, tol=self.tol, max_iter=self.max_iter,
                                            u_init=u_init, linear_solver=self.linear_solver)
        self.density_ = f_delta
        self.n_iter_ = self.report_.iterations
        self.energy_ = self.report_.energy
        return self

    def transform(self, X=None):
        check_is_fitted(self, "field_")
        return self.field_.values.copy()

    def score(self, X=None, y=None):
        """Negative discrete energy of the fitted field."""
        check_is_fitted(self, "field_")
        return -self.energy_


@dataclass
class CutoffField:
    """Smooth cutoff ``eta = (rho(x) rho(y))^2``.

    ``rho`` vanishes within ``margin`` of the boundary, equals one on the
    central half of each side and is a cubic smoothstep in between.
    """

    grid: Grid
    margin: float = 0.05

    def __post_init__(self):
        g = self.grid
        check_positive(self.margin, "margin")
        self._rx = self._profile(g.xmin, g.xmax)
        self._ry = self._profile(g.ymin, g.ymax)
        width = min(self._rx[1], self._ry[1])
        if width < 2.2 * self.margin:
            raise ValueError("margin too large: the transition zone must be >= 2.2 margins wide")

    def _profile(self, a, b):
        L = b - a
        start, core = a + self.margin, a + L / 4
        return (start, core - start, a, b)

    @staticmethod
    def _rho(z, prof):
        start, width, a, b = prof
        d = np.minimum(z - a, b - z) + a  # distance to nearer end, shifted to the left side
        tau = np.clip((d - start) / width, 0.0, 1.0)
        rho = tau * tau * (3 - 2 * tau)
        drho = 6 * tau * (1 - tau) / width * np.where(z - a <= b - z, 1.0, -1.0)
        return rho, drho

    @property
    def values(self):
        X, Y = self.grid.mesh()
        rx, _ = self._rho(X, self._rx)
        ry, _ = self._rho(Y, self._ry)
        return (rx * ry) ** 2

    @property
    def gradient(self):
        """Analytic nodal gradient, shape ``(2, ny, nx)``."""
        X, Y = self.grid.mesh()
        rx, drx = self._rho(X, self._rx)
        ry, dry = self._rho(Y, self._ry)
        return np.stack([2 * rx * ry * ry * drx, 2 * rx * rx * ry * dry])

    @property
    def core_mask(self):
        return self.values >= 1.0 - 1e-14

    @property
    def support_mask(self):
        return self.values > 0.0

    def gradient_bound(self):
        return 2.0 / self.margin


@dataclass
class Derivatives:
    """Centered differences at interior nodes (arrays of shape ``(ny-2, nx-2)``)."""

    d1: np.ndarray
    d2: np.ndarray
    d11: np.ndarray
    d12: np.ndarray
    d22: np.ndarray
    mixed_asymmetry: float

    @property
    def gamma1(self):
        return 1.0 + self.d1**2

    @property
    def gamma2(self):
        return 1.0 + self.d2**2

    @property
    def gradient(self):
        return np.stack([self.d1, self.d2], axis=-1)


def directional_derivatives(u: DiscreteField) -> Derivatives:
    """First and second centered differences at interior nodes; needs >= 5 nodes per axis."""
    g = u.grid
    if g.nx < 5 or g.ny < 5:
        raise ValueError("second differences need at least 5 nodes per axis")
    v, hx, hy = u.values, g.hx, g.hy
    c = v[1:-1, 1:-1]
    d1 = (v[1:-1, 2:] - v[1:-1, :-2]) / (2 * hx)
    d2 = (v[2:, 1:-1] - v[:-2, 1:-1]) / (2 * hy)
    d11 = (v[1:-1, 2:] - 2 * c + v[1:-1, :-2]) / hx**2
    d22 = (v[2:, 1:-1] - 2 * c + v[:-2, 1:-1]) / hy**2
    dx_full = (v[:, 2:] - v[:, :-2]) / (2 * hx)
    dy_full = (v[2:, :] - v[:-2, :]) / (2 * hy)
    d12 = (dx_full[2:, :] - dx_full[:-2, :]) / (2 * hy)
    d21 = (dy_full[:, 2:] - dy_full[:, :-2]) / (2 * hx)
    asym = float(np.max(np.abs(d12 - d21))) if d12.size else 0.0
    return Derivatives(d1, d2, d11, 0.5 * (d12 + d21), d22, asym)
