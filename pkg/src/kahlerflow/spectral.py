"""The dbar operator on (1,0) vector fields over S^1-symmetric metrics.

A field in sector k is V = V^z d/dz with V^z = F(r) e^{i(k+1) theta} in the
stereographic chart z = tan(xi/2) e^{i theta}, so d/dz is sector -1, z d/dz
(whose imaginary multiple generates the rotation) is sector 0 and z^2 d/dz is
sector +1. We store the round-unitary component phi = |d/dz|_round F. Then

    |V|_g^2        = e^{2u} |phi|^2
    |dbar V|^2     = (1/2) |D_k phi|^2,   D_k = d/dxi - (k + cos xi)/sin xi
    |nabla V|^2    = (1/2) |2 phi' - D_k phi + 2 u' phi|^2

and integrals are taken against omega = e^{2u} dA_round. Smoothness in both
charts forces phi ~ sin(xi/2)^{|k+1|} at the north pole and
cos(xi/2)^{|k-1|} at the south pole, so phi = s^a c^b p(cos xi) with
s = sin(xi/2), c = cos(xi/2), a = |k+1|, b = |k-1| and p smooth. The
Galerkin basis uses Jacobi polynomials P_j^{(a,b)}, orthonormal for the round
inner product.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import linalg
from scipy.special import eval_jacobi, gammaln

from .errors import DegeneracyError, InputError, NumericalError
from .geometry import ConformalMetric, LatitudeGrid, latitude_grid

KERNEL_RTOL = 1e-8
HOLO_RTOL = 1e-8


def sector_exponents(k):
    return abs(k + 1), abs(k - 1)


def _halfangle(grid):
    return np.sin(0.5 * grid.nodes), np.cos(0.5 * grid.nodes)


def _prefactors(grid, k):
    """Return s^a c^b and the two singular-looking factors of D_k, made regular."""
    a, b = sector_exponents(k)
    s, c = _halfangle(grid)
    base = s**a * c**b
    # ((a-k-1) c^2 + (1-b-k) s^2) / sin(xi), written without negative powers
    t1 = 0.5 * (a - k - 1) * s ** max(a - 1, 0) * c ** (b + 1) if a - k - 1 else 0.0
    t2 = 0.5 * (1 - b - k) * s ** (a + 1) * c ** max(b - 1, 0) if 1 - b - k else 0.0
    # derivative of the prefactor: (a/2)(c/s) - (b/2)(s/c), times base
    d1 = 0.5 * a * s ** max(a - 1, 0) * c ** (b + 1) if a else 0.0
    d2 = 0.5 * b * s ** (a + 1) * c ** max(b - 1, 0) if b else 0.0
    return base, t1 + t2, d1 - d2, 2.0 * s ** (a + 1) * c ** (b + 1)


def _profile_derivatives(grid, k, phi):
    """(phi', D_k phi) from nodal samples of a sector-k profile."""
    base, dk_coef, dbase, sin_base = _prefactors(grid, k)
    p = phi / base
    px = grid.dx @ p
    dphi = dbase * p - sin_base * px
    dkphi = dk_coef * p - sin_base * px
    return dphi, dkphi


@lru_cache(maxsize=128)
def _galerkin_basis(N, k, M):
    """Basis values and D_k images at the nodes, round-orthonormal."""
    grid = latitude_grid(N)
    a, b = sector_exponents(k)
    base, dk_coef, _, sin_base = _prefactors(grid, k)
    x = grid.x
    j = np.arange(M)
    # ||P_j^{(a,b)}||^2 under (1-x)^a (1+x)^b, divided by 2^{a+b} from s, c
    lognorm = (
        np.log(2.0) * 1.0
        - np.log(2 * j + a + b + 1.0)
        + gammaln(j + a + 1.0)
        + gammaln(j + b + 1.0)
        - gammaln(j + a + b + 1.0)
        - gammaln(j + 1.0)
    )
    norm = np.sqrt(2.0 * np.pi * np.exp(lognorm))
    P = np.stack([eval_jacobi(jj, a, b, x) for jj in j], axis=1) / norm
    dP = np.zeros_like(P)
    for jj in j[1:]:
        dP[:, jj] = 0.5 * (jj + a + b + 1) * eval_jacobi(jj - 1, a + 1, b + 1, x) / norm[jj]
    Phi = base[:, None] * P
    DPhi = dk_coef[:, None] * P if np.ndim(dk_coef) else np.zeros_like(P)
    DPhi = DPhi - sin_base[:, None] * dP
    for A in (Phi, DPhi):
        A.setflags(write=False)
    return Phi, DPhi


def default_basis_size(N):
    return max(8, N // 3)


@dataclass(frozen=True)
class SectorVectorField:
    k: int
    profile: np.ndarray
    metric: ConformalMetric = field(repr=False)

    def __post_init__(self):
        p = np.array(self.profile, dtype=complex)
        if p.shape != (self.metric.grid.N,):
            raise InputError("profile length does not match the grid")
        if not np.all(np.isfinite(p)):
            raise InputError("profile has non-finite values")
        p.setflags(write=False)
        object.__setattr__(self, "profile", p)

    def scaled(self, c):
        return SectorVectorField(self.k, c * self.profile, self.metric)


def _check_same_grid(m, V):
    if V.metric.grid.N != m.grid.N:
        raise InputError("vector field and metric live on different grids")


def sector_field(m, k, coeffs):
    """Field sum_j coeffs[j] * (round-orthonormal Jacobi basis function j)."""
    coeffs = np.asarray(coeffs)
    Phi, _ = _galerkin_basis(m.grid.N, k, len(coeffs))
    return SectorVectorField(k, Phi @ coeffs, m)


def gradient_field(m: ConformalMetric, h) -> SectorVectorField:
    """The (1,0) gradient V^j = g^{j kbar} d_kbar h of an axisymmetric h (sector 0)."""
    hv = np.asarray(getattr(h, "values", h), dtype=float)
    dh = m.grid.d_dxi(hv, 0)
    return SectorVectorField(0, np.exp(-2.0 * m.u) * dh * np.sqrt(0.5), m)


def rotation_generator(m: ConformalMetric) -> SectorVectorField:
    """z d/dz, the holomorphic field of sector 0."""
    return SectorVectorField(0, np.sin(m.grid.nodes) * np.sqrt(0.5), m)


def inner(m, V, W):
    """g-inner product <V, W> = int g(V, conj W) omega."""
    if V.k != W.k:
        return 0.0
    return complex(m.grid.weights @ (np.exp(4.0 * m.u) * V.profile * np.conj(W.profile)))


def norm_sq(m, V):
    return float(m.grid.weights @ (np.exp(4.0 * m.u) * np.abs(V.profile) ** 2))


def dbar_energy(m: ConformalMetric, V: SectorVectorField) -> float:
    """||dbar V||^2."""
    _check_same_grid(m, V)
    _, dk = _profile_derivatives(m.grid, V.k, V.profile)
    return float(0.5 * (m.grid.weights @ (m.e2u * np.abs(dk) ** 2)))


def nabla_energy(m, V):
    """||nabla V||^2 for the (1,0) part of the Chern connection."""
    _check_same_grid(m, V)
    dphi, dk = _profile_derivatives(m.grid, V.k, V.profile)
    comp = 2.0 * dphi - dk + 2.0 * m.du * V.profile
    return float(0.5 * (m.grid.weights @ (m.e2u * np.abs(comp) ** 2)))


# -- per-sector generalized eigenproblem ---------------------------------------

@dataclass
class SectorSpectrum:
    k: int
    eigenvalues: np.ndarray
    kernel_dim: int
    lowest_positive: float
    kernel_profiles: list


def sector_spectrum(m: ConformalMetric, k: int, M=None, n_eigs=None) -> SectorSpectrum:
    N = m.grid.N
    M = M or default_basis_size(N)
    Phi, DPhi = _galerkin_basis(N, k, M)
    w = m.grid.weights
    A = 0.5 * DPhi.T @ ((w * m.e2u)[:, None] * DPhi)
    B = Phi.T @ ((w * np.exp(4.0 * m.u))[:, None] * Phi)
    A = 0.5 * (A + A.T)
    B = 0.5 * (B + B.T)
    try:
        ev, vec = linalg.eigh(A, B)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigensolver failed in sector {k}: {exc}") from exc
    ev_abs = np.abs(ev)
    scale = max(ev_abs[0], ev_abs[1])
    ker = ev_abs < KERNEL_RTOL * scale
    kdim = int(ker.sum())
    pos = ev[~ker]
    profiles = [Phi @ vec[:, i] for i in np.flatnonzero(ker)]
    return SectorSpectrum(k, ev, kdim, float(pos[0]) if pos.size else np.inf, profiles)


@dataclass
class SpectralReport:
    per_sector: dict
    lambda_min: float
    kernel_dims: dict
    total_kernel_dim: int
    tail_increasing: bool
    warnings: list = field(default_factory=list)
    sectors: dict = field(default_factory=dict, repr=False)

    def to_dict(self):
        return {
            "lambda_min": self.lambda_min,
            "per_sector": {str(k): v for k, v in sorted(self.per_sector.items())},
            "kernel_dims": {str(k): v for k, v in sorted(self.kernel_dims.items())},
            "total_kernel_dim": self.total_kernel_dim,
            "tail_increasing": self.tail_increasing,
            "warnings": list(self.warnings),
        }


def lambda_min(m: ConformalMetric, K: int = 8, M=None) -> SpectralReport:
    """Lowest positive dbar eigenvalue over sectors |k| <= K."""
    if K < 3:
        raise InputError("sector cap must be at least 3")
    spec = {k: sector_spectrum(m, k, M) for k in range(-K, K + 1)}
    lows = {k: s.lowest_positive for k, s in spec.items()}
    kd = {k: s.kernel_dim for k, s in spec.items()}
    tail = lows[K] > lows[K - 1] and lows[-K] > lows[-K + 1]
    warn = [] if tail else [f"per-sector minima not increasing at |k| = {K}; raise the cap"]
    return SpectralReport(lows, min(lows.values()), kd, sum(kd.values()), tail, warn, spec)


@dataclass
class KernelBasis:
    fields: list

    @property
    def dim(self):
        return len(self.fields)


def holomorphic_kernel(m: ConformalMetric, M=None, report=None) -> KernelBasis:
    """g-orthonormal basis of the discrete holomorphic fields.

    Sector spectra already held by ``report`` (from lambda_min) are reused.
    """
    fields = []
    cached = report.sectors if report is not None else {}
    for k in range(-2, 3):
        s = cached.get(k) or sector_spectrum(m, k, M)
        for prof in s.kernel_profiles:
            V = SectorVectorField(k, prof, m)
            fields.append(V.scaled(1.0 / np.sqrt(norm_sq(m, V))))
    if len(fields) != 3:
        raise DegeneracyError(f"holomorphic kernel has dimension {len(fields)}, expected 3")
    return KernelBasis(fields)


def gram_matrix(m, fields):
    n = len(fields)
    G = np.zeros((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            G[i, j] = inner(m, fields[i], fields[j])
    return G


def project_holo(m: ConformalMetric, V: SectorVectorField, kernel=None) -> SectorVectorField:
    """Orthogonal projection onto the holomorphic fields."""
    _check_same_grid(m, V)
    kernel = kernel or holomorphic_kernel(m)
    out = np.zeros(m.grid.N, dtype=complex)
    for E in kernel.fields:
        if E.k == V.k:
            out += inner(m, V, E) * E.profile
    return SectorVectorField(V.k, out, m)


def futaki(m: ConformalMetric, W: SectorVectorField, h=None, check=True):
    """Fut(W) = int W(h) omega with h the Ricci potential of m."""
    from .geometry import ricci_potential

    _check_same_grid(m, W)
    nW = norm_sq(m, W)
    if check and nW > 0:
        rel = np.sqrt(dbar_energy(m, W) / nW)
        if rel > HOLO_RTOL:
            raise InputError(f"W is not holomorphic: |dbar W|/|W| = {rel:.3g}")
    if W.k != 0:
        return 0.0
    if h is None:
        h = ricci_potential(m)[0]
    dh = m.grid.d_dxi(np.asarray(getattr(h, "values", h)), 0)
    val = complex(m.grid.weights @ (m.e2u * W.profile * dh)) * np.sqrt(0.5)
    return val.real if abs(val.imag) <= 1e-15 * max(1.0, abs(val.real)) else val


def projection_futaki_identity(m: ConformalMetric, h=None, kernel=None):
    """(||pi grad h||^2, Fut(pi grad h), gap)."""
    from .geometry import ricci_potential

    if h is None:
        h = ricci_potential(m)[0]
    V = gradient_field(m, h)
    P = project_holo(m, V, kernel)
    lhs = norm_sq(m, P)
    rhs = futaki(m, P, h, check=False)
    rhs = float(np.real(rhs))
    return lhs, rhs, abs(lhs - rhs)


def bochner_kodaira_residual(m: ConformalMetric, V: SectorVectorField) -> float:
    """Relative defect of ||nabla V||^2 - ||dbar V||^2 = int R |V|^2 omega."""
    from .geometry import gauss_curvature

    nv = norm_sq(m, V)
    if nv == 0.0:
        return 0.0
    nab = nabla_energy(m, V)
    dbar = dbar_energy(m, V)
    R = gauss_curvature(m).values
    curv = float(m.grid.weights @ (np.exp(4.0 * m.u) * R * np.abs(V.profile) ** 2))
    return abs(nab - dbar - curv) / (nv + nab)


@dataclass
class KeyInequalityRow:
    t: float
    lhs: float
    rhs: float
    satisfied: bool


def key_inequality_check(traj, slack=1e-6):
    """Ydot <= -2 lam Y + 2 lam Fut(pi grad h) + int |grad h|^2 |R - mu| + sup|R - mu| Y.

    Ydot is the centered difference of the recorded Y; one row per interior
    snapshot.
    """
    from .geometry import gauss_curvature, grad_norm_sq

    recs = traj.records
    if len(recs) < 3:
        raise InputError("need at least 3 snapshots")
    for name in ("Y", "lambda_min", "futaki", "sup_gdot"):
        if any(getattr(r, name, None) is None for r in recs):
            raise InputError(f"records lack {name}")
    rows = []
    for k in range(1, len(recs) - 1):
        r, s = recs[k], traj.states[k]
        ydot = (recs[k + 1].Y - recs[k - 1].Y) / (recs[k + 1].t - recs[k - 1].t)
        m = s.metric
        R = gauss_curvature(m).values
        G = grad_norm_sq(m, s.h)
        lam = r.lambda_min
        rhs = -2 * lam * r.Y + 2 * lam * r.futaki + m.integrate(G * np.abs(R - s.mu)) + r.sup_gdot * r.Y
        rows.append(KeyInequalityRow(r.t, ydot, rhs, ydot <= rhs + slack))
    return rows
