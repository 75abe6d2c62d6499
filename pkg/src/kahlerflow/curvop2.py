"""Kahler curvature tensors in complex dimension 2 and their curvature operator.

Components are stored as ``T[a, b, c, d] = R_{abar b cbar d}`` in a unitary
frame (0-based indices). Real (1,1)-forms are identified with Hermitian 2x2
matrices; the orthonormal basis is

    E0 = I / sqrt2  (Kahler-form direction), E1, E2, E3 = sigma_z, sigma_x, sigma_y over sqrt2

and the curvature form is B(A, A') = sum R_{abar b cbar d} A_{ba} A'_{dc}.
Its matrix has R/2 in the corner, the traceless Ricci tensor in the first
row and Op(S) in the lower 3x3 block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError

SYM_TOL = 1e-12
SIGN_TOL = 1e-12

_S2 = np.sqrt(0.5)
BASIS = np.array(
    [
        [[1, 0], [0, 1]],
        [[1, 0], [0, -1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
    ],
    dtype=complex,
) * _S2

COMPONENT_ORDER = [(a, b, c, d) for a in range(2) for b in range(2) for c in range(2) for d in range(2)]


def symmetry_defects(T):
    """Max violation of each Kahler-tensor identity."""
    return {
        "first-pair exchange R_{abar b cbar d} = R_{cbar b abar d}": float(
            np.max(np.abs(T - T.transpose(2, 1, 0, 3)))
        ),
        "second-pair exchange R_{abar b cbar d} = R_{abar d cbar b}": float(
            np.max(np.abs(T - T.transpose(0, 3, 2, 1)))
        ),
        "Hermitian reality R_{abar b cbar d} = conj R_{bbar a dbar c}": float(
            np.max(np.abs(T - np.conj(T.transpose(1, 0, 3, 2))))
        ),
    }


@dataclass(frozen=True)
class CurvatureTensor2:
    components: np.ndarray

    @classmethod
    def from_components(cls, raw, tol=SYM_TOL):
        """Validate 16 components, given as a (2,2,2,2) array or flat in COMPONENT_ORDER."""
        T = np.asarray(raw, dtype=complex)
        if T.size != 16:
            raise InputError(f"expected 16 components, got {T.size}")
        T = T.reshape(2, 2, 2, 2)
        if not np.all(np.isfinite(T)):
            raise InputError("components must be finite")
        scale = max(1.0, float(np.max(np.abs(T))))
        for name, err in symmetry_defects(T).items():
            if err > tol * scale:
                raise InputError(f"symmetry violated ({name}): defect {err:.3g}")
        T = T.copy()
        T.setflags(write=False)
        return cls(T)

    @property
    def ricci(self):
        """R_{abar b} = sum_c R_{abar b cbar c}."""
        return np.einsum("abcc->ab", self.components)

    @property
    def scalar(self):
        return float(np.real(np.trace(self.ricci)))

    @property
    def traceless_ricci(self):
        return self.ricci - 0.5 * self.scalar * np.eye(2)


def curvature_form(t: CurvatureTensor2, A, B):
    return np.einsum("abcd,ba,dc->", t.components, A, B)


@dataclass(frozen=True)
class CurvatureOperatorMatrix:
    matrix: np.ndarray

    @property
    def corner(self):
        return float(self.matrix[0, 0])

    @property
    def s_vector(self):
        return self.matrix[0, 1:].copy()

    @property
    def op_s(self):
        return self.matrix[1:, 1:].copy()

    def op_s_eigenvalues(self):
        return np.linalg.eigvalsh(self.op_s)

    def eigenvalues(self):
        return np.linalg.eigvalsh(self.matrix)


def operator_matrix(t: CurvatureTensor2) -> CurvatureOperatorMatrix:
    M = np.einsum("abcd,iba,jdc->ij", t.components, BASIS, BASIS)
    if np.max(np.abs(M.imag)) > 1e-12 * max(1.0, np.max(np.abs(M))):
        raise InputError("curvature form is not real on Hermitian matrices")
    M = M.real
    return CurvatureOperatorMatrix(0.5 * (M + M.T))


def tensor_from_matrix(M) -> CurvatureTensor2:
    """Inverse of operator_matrix; needs tr Op(S) = M[0, 0] for the Kahler symmetries."""
    M = np.asarray(M, dtype=float)
    if M.shape != (4, 4) or np.max(np.abs(M - M.T)) > 1e-12 * max(1.0, np.max(np.abs(M))):
        raise InputError("operator matrix must be real symmetric 4x4")
    T = np.einsum("ij,iab,jcd->abcd", M, BASIS, BASIS)
    return CurvatureTensor2.from_components(T, tol=1e-10)


def condition_c(t: CurvatureTensor2):
    """(Ricci >= 0, traceless operator 2-nonnegative)."""
    ric = np.linalg.eigvalsh(0.5 * (t.ricci + t.ricci.conj().T))
    m = operator_matrix(t).op_s_eigenvalues()
    return bool(ric[0] >= -SIGN_TOL), bool(m[0] + m[1] >= -SIGN_TOL)


@dataclass
class BoundReport:
    C: float
    R: float
    m: tuple
    full_eigenvalues: tuple
    s_norm: float
    trace_defect: float
    checks: dict
    full_bound: float

    @property
    def violations(self):
        return [k for k, v in self.checks.items() if not v]

    @property
    def ok(self):
        return not self.violations

    def to_dict(self):
        return {
            "C": self.C,
            "R": self.R,
            "op_s_eigenvalues": list(self.m),
            "full_eigenvalues": list(self.full_eigenvalues),
            "s_norm": self.s_norm,
            "full_bound": self.full_bound,
            "trace_defect": self.trace_defect,
            "checks": dict(self.checks),
            "pass": self.ok,
        }


def eigenvalue_bounds(t: CurvatureTensor2, C: float, tol=1e-12) -> BoundReport:
    """Check the eigenvalue chain that bounds the curvature operator by C >= R."""
    ric_ok, two_ok = condition_c(t)
    if not (ric_ok and two_ok):
        raise InputError(f"condition (C) fails: ricci_nonneg={ric_ok}, two_nonneg={two_ok}")
    R = t.scalar
    if R < -tol or R > C * (1 + tol) + tol:
        raise InputError(f"scalar curvature {R:.6g} outside [0, C = {C:.6g}]")
    op = operator_matrix(t)
    m1, m2, m3 = op.op_s_eigenvalues()
    full = op.eigenvalues()
    s = op.s_vector
    s_norm = float(np.linalg.norm(s))
    S = t.traceless_ricci
    trS2 = float(np.real(np.trace(S @ S)))
    mmax = max(abs(m1), abs(m3))
    full_bound = C + s_norm
    eps = tol * max(1.0, C)
    checks = {
        "trace m1+m2+m3 = R/2": abs(m1 + m2 + m3 - 0.5 * R) <= eps,
        "m3 <= R/2": m3 <= 0.5 * R + eps,
        "m3 <= C/2": m3 <= 0.5 * C + eps,
        "m2 <= m3": m2 <= m3 + eps,
        "|m1| <= m2+m3": abs(m1) <= m2 + m3 + eps,
        "m2+m3 <= C": m2 + m3 <= C + eps,
        "Op(S) entries <= max|m|": float(np.max(np.abs(op.op_s))) <= mmax + eps,
        "|S|^2 <= tr(S^2)": s_norm**2 <= trS2 + eps,
        "full eigenvalues <= C + |S|": float(np.max(np.abs(full))) <= full_bound + eps,
    }
    checks = {k: bool(v) for k, v in checks.items()}
    return BoundReport(
        float(C), R, (float(m1), float(m2), float(m3)), tuple(full.tolist()), s_norm, float(abs(m1 + m2 + m3 - 0.5 * R)), checks, full_bound
    )


def unitary_conjugate(t: CurvatureTensor2, U) -> CurvatureTensor2:
    """Components in the frame e'_a = sum_p U_pa e_p."""
    U = np.asarray(U, dtype=complex)
    T = np.einsum("pa,qb,rc,sd,pqrs->abcd", U.conj(), U, U.conj(), U, t.components)
    return CurvatureTensor2.from_components(T, tol=1e-10)


def random_unitary(rng, n=2):
    Z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def _cone_sample(rng, R_max):
    """Sorted m with m1 + m2 >= 0 and 2 (m1 + m2 + m3) <= R_max."""
    while True:
        half = 0.5 * R_max * rng.uniform() ** 0.5
        m = np.sort(rng.dirichlet(np.ones(3)) * half)
        # push the smallest eigenvalue negative while keeping m1 + m2 >= 0
        shift = rng.uniform(0.0, m[1])
        m = np.array([m[0] - shift, m[1] + shift, m[2]])
        m.sort()
        if m[0] + m[1] >= 0:
            return m


def random_condition_c(rng, R_max=10.0, max_tries=100):
    """Random Kahler tensor satisfying condition (C) with 0 <= R <= R_max."""
    for _ in range(max_tries):
        m = _cone_sample(rng, R_max)
        R = 2.0 * float(m.sum())
        direction = rng.standard_normal(3)
        direction /= np.linalg.norm(direction)
        s = direction * rng.uniform() * 0.5 * R
        M = np.zeros((4, 4))
        M[0, 0] = 0.5 * R
        M[0, 1:] = M[1:, 0] = s
        M[1:, 1:] = np.diag(m)
        try:
            t = tensor_from_matrix(M)
            t = unitary_conjugate(t, random_unitary(rng))
        except InputError:
            continue
        if all(condition_c(t)):
            return t
    raise InputError("could not sample a condition (C) tensor")


def symmetric_space_tensor():
    T = np.zeros((2, 2, 2, 2), dtype=complex)
    T[0, 0, 0, 0] = T[1, 1, 1, 1] = 2
    T[0, 0, 1, 1] = T[1, 1, 0, 0] = 1
    T[0, 1, 1, 0] = T[1, 0, 0, 1] = 1
    return CurvatureTensor2.from_components(T)


def tensor_with_op_s(m, R=None, s=(0.0, 0.0, 0.0)):
    """Tensor whose Op(S) is diag(m); R defaults to the trace-compatible 2 sum(m)."""
    m = np.asarray(m, dtype=float)
    R = 2.0 * m.sum() if R is None else R
    if abs(0.5 * R - m.sum()) > 1e-12 * max(1.0, abs(R)):
        raise InputError("Op(S) eigenvalues must sum to R/2")
    M = np.zeros((4, 4))
    M[0, 0] = 0.5 * R
    M[0, 1:] = M[1:, 0] = s
    M[1:, 1:] = np.diag(m)
    return tensor_from_matrix(M)


def parse_components(text):
    """Parse 16 lines ``a b c d re [im]`` with 1-based indices; '#' starts a comment."""
    T = np.full((2, 2, 2, 2), np.nan, dtype=complex)
    seen = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (5, 6):
            raise InputError(f"line {lineno}: expected 'a b c d re [im]'")
        try:
            idx = tuple(int(p) - 1 for p in parts[:4])
            val = complex(float(parts[4]), float(parts[5]) if len(parts) == 6 else 0.0)
        except ValueError as exc:
            raise InputError(f"line {lineno}: {exc}") from exc
        if any(i not in (0, 1) for i in idx):
            raise InputError(f"line {lineno}: indices must be 1 or 2")
        if idx in seen:
            raise InputError(f"line {lineno}: duplicate component {parts[:4]}")
        seen.add(idx)
        T[idx] = val
    if len(seen) != 16:
        raise InputError(f"expected 16 components, got {len(seen)}")
    return CurvatureTensor2.from_components(T)


def format_components(t: CurvatureTensor2):
    lines = ["# a b c d  Re R_{abar b cbar d}  Im"]
    for a, b, c, d in COMPONENT_ORDER:
        v = t.components[a, b, c, d]
        lines.append(f"{a + 1} {b + 1} {c + 1} {d + 1} {float(v.real)!r} {float(v.imag)!r}")
    return "\n".join(lines) + "\n"
