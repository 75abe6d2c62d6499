"""Pointwise and grid validators for metric / complex-structure compatibility.

Tensor fields on the latitude grid are given by their components in the
round orthonormal frame e1 = d/dxi, e2 = (1/sin xi) d/dtheta, one 2x2 matrix
per node (shape (N, 2, 2)). For J the layout is ``J[n, p, i] = J^p_i``. The
round Levi-Civita connection in this frame has
nabla_{e2} e1 = cot xi e2 and nabla_{e2} e2 = -cot xi e1.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError
from .geometry import LatitudeGrid

J_STD = np.array([[0.0, -1.0], [1.0, 0.0]])
MATRIX_TOL = 1e-12


def _square(a, name):
    a = np.asarray(a, dtype=float)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2] or a.shape[-1] % 2:
        raise InputError(f"{name} must be (..., 2n, 2n), got shape {a.shape}")
    return a


def validate_metric(g):
    g = _square(g, "g")
    scale = max(1.0, float(np.max(np.abs(g))))
    if np.max(np.abs(g - np.swapaxes(g, -1, -2))) > MATRIX_TOL * scale:
        raise InputError("g is not symmetric")
    if np.min(np.linalg.eigvalsh(g)) <= 0:
        raise InputError("g is not positive definite")
    return g


def validate_complex_structure(J):
    J = _square(J, "J")
    eye = np.eye(J.shape[-1])
    scale = max(1.0, float(np.max(np.abs(J))) ** 2)
    if np.max(np.abs(J @ J + eye)) > MATRIX_TOL * scale:
        raise InputError("J does not square to -I")
    return J


def hermitian_compat_residual(g, J) -> float:
    """max |g - J^T g J|; zero iff g is J-invariant."""
    g = validate_metric(g)
    J = validate_complex_structure(J)
    if g.shape[-1] != J.shape[-1]:
        raise InputError("g and J have different dimensions")
    return float(np.max(np.abs(g - np.swapaxes(J, -1, -2) @ g @ J)))


def j_norm_sq(g, J):
    """|J|_g^2 = g_pq g^ij J^p_i J^q_j; equals 2n for compatible pairs."""
    g = validate_metric(g)
    J = validate_complex_structure(J)
    gi = np.linalg.inv(g)
    return np.einsum("...pq,...ij,...pi,...qj->...", g, gi, J, J)


def round_connection(grid: LatitudeGrid):
    """Gam[n, k, i, m] = coefficient of e_m in nabla_{e_k} e_i."""
    G = np.zeros((grid.N, 2, 2, 2))
    G[:, 1, 0, 1] = grid.cot
    G[:, 1, 1, 0] = -grid.cot
    return G


def _field(grid, a, name):
    a = np.asarray(a, dtype=float)
    if a.shape != (grid.N, 2, 2):
        raise InputError(f"{name} must have shape ({grid.N}, 2, 2), got {a.shape}")
    return a


def _d1(grid, comp, rank):
    # frame components of a rank-r tensor have parity (-1)^r about the poles
    return grid.d_dxi(comp, rank % 2)


def nabla_metric(grid, g):
    """(nabla_k g)_{ij} under the round connection, shape (N, k, i, j)."""
    G = round_connection(grid)
    out = np.zeros((grid.N, 2, 2, 2))
    for i in range(2):
        for j in range(2):
            out[:, 0, i, j] = _d1(grid, g[:, i, j], 2)
    out -= np.einsum("nkim,nmj->nkij", G, g)
    out -= np.einsum("nkjm,nim->nkij", G, g)
    return out


def _difference_from_round(grid, g):
    gi = np.linalg.inv(g)
    dg = nabla_metric(grid, g)
    # T[n, k, i, j] = nabla_j g_ki + nabla_i g_jk - nabla_k g_ij
    T = dg.transpose(0, 3, 1, 2) + dg.transpose(0, 2, 3, 1) - dg
    return 0.5 * np.einsum("npk,nkij->npij", gi, T)


def christoffel_difference(g_ref, g, grid: LatitudeGrid):
    """H^p_ij = Gamma(g) - Gamma(g_ref), returned as H[n, p, i, j]."""
    g_ref = validate_metric(_field(grid, g_ref, "g_ref"))
    g = validate_metric(_field(grid, g, "g"))
    return _difference_from_round(grid, g) - _difference_from_round(grid, g_ref)


def conformal_metric_field(grid, u):
    """Frame components of e^{2u} g_round."""
    e = np.exp(2.0 * np.asarray(u, dtype=float))
    g = np.zeros((grid.N, 2, 2))
    g[:, 0, 0] = g[:, 1, 1] = e
    return g


def constant_field(grid, A):
    return np.broadcast_to(np.asarray(A, dtype=float), (grid.N, 2, 2)).copy()


def nabla_J(grid, J, H=None):
    """(nabla_k J)^p_i under the round connection, plus H if given (N, k, p, i)."""
    G = round_connection(grid)
    if H is not None:
        # connection coefficients in H[n, p, k, i] layout -> Gam[n, k, i, p]
        G = G + H.transpose(0, 2, 3, 1)
    out = np.zeros((grid.N, 2, 2, 2))
    for p in range(2):
        for i in range(2):
            out[:, 0, p, i] = _d1(grid, J[:, p, i], 2)
    out += np.einsum("nkmp,nmi->nkpi", G, J)
    out -= np.einsum("nkim,npm->nkpi", G, J)
    return out


def difference_action(H, J):
    """((nabla_ref - nabla_g) J)_k{}^p{}_i given H = Gamma(g) - Gamma(ref)."""
    return -(np.einsum("npkm,nmi->nkpi", H, J) - np.einsum("nmki,npm->nkpi", H, J))


def nabla_j_relation_residual(g_ref, g, J, grid: LatitudeGrid) -> float:
    """max |nabla_ref J - (nabla_ref - nabla_g) J|, zero when nabla_g J = 0.

    g_ref is assumed J-compatible with a parallel J (checked via its own
    compatibility residual).
    """
    J = validate_complex_structure(_field(grid, J, "J"))
    H = christoffel_difference(g_ref, g, grid)
    H_ref = _difference_from_round(grid, validate_metric(_field(grid, g_ref, "g_ref")))
    lhs = nabla_J(grid, J, H_ref)
    return float(np.max(np.abs(lhs - difference_action(H, J))))


def conformal_difference_oracle(grid, du):
    """H for e^{2u} g vs g: delta^p_i u_j + delta^p_j u_i - delta_ij grad^p u."""
    u = np.zeros((grid.N, 2))
    u[:, 0] = du
    eye = np.eye(2)
    return (
        np.einsum("pi,nj->npij", eye, u)
        + np.einsum("pj,ni->npij", eye, u)
        - np.einsum("ij,np->npij", eye, u)
    )
