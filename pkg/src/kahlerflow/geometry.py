"""Discrete geometry of S^1-symmetric conformal metrics on the Riemann sphere.

A metric is g = e^{2u} g_round with u a function of the co-latitude xi only.
Fields are sampled on the Gauss-Chebyshev grid xi_i = (i + 1/2) pi / N, which
is the cell-midpoint grid in xi and the Chebyshev grid in x = cos(xi). Smooth
axisymmetric functions are even in xi about both poles, hence smooth in x, so
every operator is a polynomial collocation operator in x:

* quadrature: Fejer's first rule (exact for polynomials of degree < N),
* round Laplacian: Legendre-diagonal collocation, Delta_0 P_l = -l(l+1) P_l,
* d/dxi: Chebyshev differentiation, with odd fields handled as sin(xi) * poly.

Because Delta_0 maps polynomials of degree < N into themselves and the
quadrature is exact there, the discrete divergence theorem, discrete
Gauss-Bonnet and discrete area conservation hold to roundoff.

Conventions: Delta = complex Laplacian = (1/2) real Laplace-Beltrami;
R = Gaussian curvature, R = 1 on the round sphere; |grad f|^2 is the complex
norm g^{z zbar} f_z f_zbar = (1/2) |grad_real f|^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as cheb
from numpy.polynomial import legendre as leg
from scipy import linalg

from .errors import (
    CapabilityError,
    DegenerateMetricError,
    InputError,
    NumericalError,
    SolvabilityError,
)

FOUR_PI = 4.0 * np.pi
DEGENERACY_FLOOR = 1e-12
AREA_TOL = 1e-8


def fejer_weights(xi):
    """Fejer-1 weights for int_{-1}^{1} f(x) dx at x = cos(xi)."""
    N = xi.size
    j = np.arange(1, N // 2 + 1)
    s = np.cos(2.0 * np.outer(xi, j)) / (4.0 * j**2 - 1.0)
    return 2.0 / N * (1.0 - 2.0 * s.sum(axis=1))


class LatitudeGrid:
    """Co-latitude grid with quadrature weights for sin(xi) dxi dtheta.

    Holds the dense collocation operators used everywhere else. Build with
    :func:`latitude_grid`, which caches one instance per size.
    """

    def __init__(self, N: int):
        N = int(N)
        if N < 8 or N % 2:
            raise InputError(f"grid size must be even and >= 8, got {N}")
        self.N = N
        self.h = np.pi / N
        self.nodes = (np.arange(N) + 0.5) * self.h
        self.x = np.cos(self.nodes)
        self.sin = np.sin(self.nodes)
        self.cot = self.x / self.sin
        self.weights = 2.0 * np.pi * fejer_weights(self.nodes)
        for a in (self.nodes, self.x, self.sin, self.cot, self.weights):
            a.setflags(write=False)
        self._build_operators()

    def _build_operators(self):
        N, x = self.N, self.x
        # Chebyshev transform at Gauss nodes is orthogonal up to scaling.
        V = cheb.chebvander(x, N - 1)
        scale = np.full(N, 2.0 / N)
        scale[0] = 1.0 / N
        Vinv = scale[:, None] * V.T
        Dc = cheb.chebder(np.eye(N), axis=0)
        self.dx = V[:, : N - 1] @ Dc @ Vinv
        self._cheb_fwd = Vinv

        P = leg.legvander(x, N - 1)
        ell = np.arange(N, dtype=float)
        L = np.linalg.solve(P.T, (P * (-ell * (ell + 1.0))).T).T
        L = 0.5 * (L + L[::-1, ::-1])
        # Exact null vectors: constants on the right, quadrature on the left.
        L -= L.sum(axis=1, keepdims=True) / N
        w = self.weights
        L -= np.outer(np.ones(N), w @ L) / w.sum()
        self.lap0 = L

        M = N // 2
        flip = L[:M, ::-1][:, :M]
        self.lap0_even = np.ascontiguousarray(L[:M, :M] + flip)
        self.lap0_odd = np.ascontiguousarray(L[:M, :M] - flip)

        B = np.zeros((N + 1, N + 1))
        B[:N, :N] = L
        B[:N, N] = 1.0
        B[N, :N] = w
        self._poisson_lu = linalg.lu_factor(B)
        for a in (self.dx, self.lap0, self.lap0_even, self.lap0_odd):
            a.setflags(write=False)

    def __repr__(self):
        return f"LatitudeGrid(N={self.N})"

    def integrate(self, f):
        """Round-sphere integral of an axisymmetric field."""
        return float(self.weights @ np.asarray(f))

    def cheb_coeffs(self, f):
        return self._cheb_fwd @ np.asarray(f)

    def d_dxi(self, f, parity: int = 0):
        """d/dxi of a field even (parity 0) or odd (parity 1) about the poles."""
        f = np.asarray(f)
        if parity % 2 == 0:
            return -self.sin * (self.dx @ f)
        q = f / self.sin
        return self.x * q - (1.0 - self.x**2) * (self.dx @ q)

    def poisson0(self, rhs):
        """Solve Delta_0 f = rhs with flat-weighted mean of f equal to zero."""
        b = np.append(rhs, 0.0)
        sol = linalg.lu_solve(self._poisson_lu, b)
        return sol[:-1], sol[-1]


@lru_cache(maxsize=16)
def latitude_grid(N: int) -> LatitudeGrid:
    return LatitudeGrid(N)


def pole_slopes(grid: LatitudeGrid, f):
    """One-sided xi-derivatives at both poles from quadratic fits to 3 nodes."""
    f = np.asarray(f, dtype=float)
    xi = grid.nodes[:3]
    A = np.vander(xi, 3, increasing=True)
    north = np.linalg.solve(A, f[:3])[1]
    south = np.linalg.solve(A, f[::-1][:3])[1]
    return north, south


def check_pole_regularity(grid, f, what="field"):
    n, s = pole_slopes(grid, f)
    tol = 10.0 * grid.h**2 * (1.0 + np.max(np.abs(f)))
    if abs(n) > tol or abs(s) > tol:
        raise InputError(
            f"{what} is not regular at the poles: slopes {n:.3g}, {s:.3g} (tol {tol:.2g})"
        )


def _as_values(grid, f, name="field"):
    if isinstance(f, ScalarField):
        if f.grid is not grid and f.grid.N != grid.N:
            raise InputError(f"{name} lives on a different grid")
        return f.values
    v = np.asarray(f, dtype=float)
    if v.shape != (grid.N,):
        raise InputError(f"{name} has shape {v.shape}, expected ({grid.N},)")
    return v


@dataclass(frozen=True)
class ScalarField:
    grid: LatitudeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.N,):
            raise InputError(f"values have shape {v.shape}, expected ({self.grid.N},)")
        if not np.all(np.isfinite(v)):
            raise InputError("scalar field has non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True)
class ConformalMetric:
    """g = e^{2u} g_round. ``check_area=False`` admits unnormalized classes."""

    grid: LatitudeGrid
    u: np.ndarray
    check_area: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        if u.shape != (self.grid.N,):
            raise InputError(f"u has shape {u.shape}, expected ({self.grid.N},)")
        if not np.all(np.isfinite(u)):
            raise DegenerateMetricError("conformal factor is not finite")
        if np.min(2.0 * u) < np.log(DEGENERACY_FLOOR):
            raise DegenerateMetricError("e^{2u} below the degeneracy floor")
        check_pole_regularity(self.grid, u, "conformal factor")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)
        if self.check_area and abs(self.area - FOUR_PI) > AREA_TOL * FOUR_PI:
            raise InputError(f"area {self.area:.12g} differs from 4*pi")

    @classmethod
    def normalized(cls, grid, u):
        """Shift u by a constant so that the area is 4*pi."""
        u = np.asarray(u, dtype=float)
        A = grid.integrate(np.exp(2.0 * u))
        return cls(grid, u - 0.5 * np.log(A / FOUR_PI))

    @classmethod
    def round(cls, N):
        return cls(latitude_grid(N), np.zeros(N))

    @property
    def e2u(self):
        return np.exp(2.0 * self.u)

    @property
    def area(self):
        return self.grid.integrate(np.exp(2.0 * self.u))

    def integrate(self, f):
        """int f omega for an axisymmetric f."""
        return float(self.grid.weights @ (self.e2u * np.asarray(f)))

    @property
    def du(self):
        return self.grid.d_dxi(self.u, 0)


def gauss_curvature(m: ConformalMetric) -> ScalarField:
    R = np.exp(-2.0 * m.u) * (1.0 - m.grid.lap0 @ m.u)
    if not np.all(np.isfinite(R)):
        raise DegenerateMetricError("curvature is not finite")
    return ScalarField(m.grid, R)


def laplacian(m: ConformalMetric, f, check_regularity=True) -> ScalarField:
    v = _as_values(m.grid, f)
    if check_regularity:
        check_pole_regularity(m.grid, v)
    return ScalarField(m.grid, 0.5 * np.exp(-2.0 * m.u) * (m.grid.lap0 @ v))


def poisson_solve(m: ConformalMetric, rhs, rtol=1e-9) -> ScalarField:
    """Solve Delta_g h = rhs with int h omega = 0."""
    b = _as_values(m.grid, rhs, "rhs")
    mean = m.integrate(b)
    scale = m.integrate(np.abs(b))
    if abs(mean) > rtol * scale + 1e-13:
        raise SolvabilityError(f"int rhs omega = {mean:.3g} is not zero")
    h, lam = m.grid.poisson0(2.0 * m.e2u * b)
    if not np.all(np.isfinite(h)):
        raise NumericalError("Poisson solve produced non-finite values")
    h = h - m.integrate(h) / m.area
    return ScalarField(m.grid, h)


def ricci_potential(m: ConformalMetric):
    """Return (h, mu) with Delta h = R - mu and int h omega = 0."""
    R = gauss_curvature(m).values
    mu = m.integrate(R) / m.area
    return poisson_solve(m, R - mu), mu


# -- covariant derivatives -------------------------------------------------
#
# A tensor with p lower (1,0) and q lower (0,1) indices, invariant under the
# circle action, is described in the g-unitary frame by a profile F(xi) times
# e^{i sigma theta}, sigma = q - p. On such profiles
#   nabla_zbar : F -> e^{-u}/sqrt2 (F' - sigma (u' + cot xi) F), sigma += 1
#   nabla_z    : F -> e^{-u}/sqrt2 (F' + sigma (u' + cot xi) F), sigma -= 1
# and the profile has parity (-1)^sigma about the poles.

SQRT_HALF = np.sqrt(0.5)


def _spin_step(m, F, sigma, barred):
    g = m.grid
    dF = g.d_dxi(F, sigma % 2)
    a = m.du + g.cot
    if barred:
        return SQRT_HALF * np.exp(-m.u) * (dF - sigma * a * F), sigma + 1
    return SQRT_HALF * np.exp(-m.u) * (dF + sigma * a * F), sigma - 1


@dataclass(frozen=True)
class DerivativeStack:
    """Unitary-frame profile of nabla^s nablabar^r h on the theta = 0 meridian.

    The full component at angle theta is ``values * exp(1j * spin * theta)``.
    """

    grid: LatitudeGrid
    r: int
    s: int
    values: np.ndarray

    @property
    def spin(self):
        return self.r - self.s

    def at(self, theta):
        return self.values * np.exp(1j * self.spin * theta)


MAX_ORDER = 3


def derivative_stack(m: ConformalMetric, h, r: int, s: int) -> DerivativeStack:
    """Frame components of nabla^s nablabar^r h (Chern connection).

    Ordering: derivatives of the more numerous type are applied first, which
    makes the (r, s) stack the conjugate of the (s, r) stack. For r + s <= 3
    the only mixed orders are (1,1), where the two orderings agree, and
    (2,1)/(1,2).
    """
    if r < 0 or s < 0 or r + s > MAX_ORDER:
        raise CapabilityError(f"unsupported derivative order ({r}, {s})")
    F = _as_values(m.grid, h, "h").astype(float)
    sigma = 0
    seq = [True] * r + [False] * s if r >= s else [False] * s + [True] * r
    for barred in seq:
        F, sigma = _spin_step(m, F, sigma, barred)
    return DerivativeStack(m.grid, r, s, F.astype(complex))


def l2_norm(m: ConformalMetric, stack: DerivativeStack) -> float:
    """int |stack|^2 omega (unitary frame, so the contraction is |F|^2)."""
    if stack.grid.N != m.grid.N:
        raise InputError("stack and metric live on different grids")
    return m.integrate(np.abs(stack.values) ** 2)


def grad_norm_sq(m: ConformalMetric, f):
    """Pointwise |grad f|^2 (complex convention)."""
    df = m.grid.d_dxi(_as_values(m.grid, f), 0)
    return 0.5 * np.exp(-2.0 * m.u) * df**2
