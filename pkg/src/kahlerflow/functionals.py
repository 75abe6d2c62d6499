"""Scalar observables along the flow and residuals of their evolution identities."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InputError
from .geometry import (
    FOUR_PI,
    derivative_stack,
    gauss_curvature,
    grad_norm_sq,
    l2_norm,
    laplacian,
)
from .spectral import futaki, holomorphic_kernel, lambda_min, projection_futaki_identity

__all__ = [
    "DiagnosticsRecord",
    "diagnostics_record",
    "y_rs",
    "futaki",
    "mabuchi_path",
    "mabuchi_fill",
    "y_dot_residual",
    "delta_h_flow_residual",
    "laplacian_hessian_gap",
]

RS_PAIRS = ((1, 0), (1, 1), (2, 0))


@dataclass
class DiagnosticsRecord:
    t: float
    Y: float
    Y_rs: dict
    nu: float
    futaki: float
    lambda_min: float
    sup_gdot: float
    area: float
    kernel_dim: int = 3
    warnings: list = field(default_factory=list)

    def to_dict(self):
        d = asdict(self)
        d["Y_rs"] = {f"{r}{s}": v for (r, s), v in self.Y_rs.items()}
        return d


def y_rs(m, r: int, s: int, h=None) -> float:
    """int |nabla^s nablabar^r h|^2 omega for the Ricci potential h."""
    if h is None:
        from .geometry import ricci_potential

        h = ricci_potential(m)[0]
    return l2_norm(m, derivative_stack(m, h, r, s))


def diagnostics_record(state, K=8) -> DiagnosticsRecord:
    """All recorded observables of one flow state; nu is filled in afterwards."""
    m, h, mu = state.metric, state.h, state.mu
    R = gauss_curvature(m).values
    yrs = {rs: y_rs(m, *rs, h=h) for rs in RS_PAIRS}
    rep = lambda_min(m, K)
    kernel = holomorphic_kernel(m, report=rep)
    _, fut, _ = projection_futaki_identity(m, h, kernel)
    return DiagnosticsRecord(
        t=float(state.t),
        Y=yrs[(1, 0)],
        Y_rs=yrs,
        nu=0.0,
        futaki=float(fut),
        lambda_min=float(rep.lambda_min),
        sup_gdot=float(np.max(np.abs(R - mu))),
        area=float(m.area),
        kernel_dim=int(rep.total_kernel_dim),
        warnings=list(rep.warnings),
    )


def mabuchi_path(traj) -> np.ndarray:
    """nu(t_k) = -(1/V) int_0^{t_k} Y dt by the trapezoid rule."""
    t = np.asarray(traj.times, dtype=float)
    Y = np.array([getattr(r, "Y", np.nan) for r in traj.records], dtype=float)
    if Y.size != t.size or not np.all(np.isfinite(Y)):
        raise InputError("Y missing from some records")
    nu = np.zeros_like(t)
    if t.size > 1:
        nu[1:] = -np.cumsum(0.5 * (Y[1:] + Y[:-1]) * np.diff(t)) / FOUR_PI
    return nu


def mabuchi_fill(traj):
    for rec, v in zip(traj.records, mabuchi_path(traj)):
        rec.nu = float(v)


def _centered(traj, values):
    t = np.asarray(traj.times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.size < 3:
        raise InputError("need at least 3 snapshots")
    return (v[2:] - v[:-2]) / (t[2:] - t[:-2])


def y_dot_terms(state):
    """(vol, metric, hess) with Ydot = vol + metric + hess for the adopted signs.

    vol = int |grad h|^2 (mu - R) omega comes from omega_dot = (mu - R) omega,
    metric = -int |grad h|^2 (R - mu) omega from the inverse-metric variation
    and hess = -2 int |nablabar nablabar h|^2 omega.
    """
    m, h, mu = state.metric, state.h, state.mu
    R = gauss_curvature(m).values
    G = grad_norm_sq(m, h)
    vol = m.integrate(G * (mu - R))
    hess = -2.0 * y_rs(m, 2, 0, h=h)
    return vol, vol, hess


def y_dot_residual(traj, volume_sign: int = 1) -> np.ndarray:
    """|Ydot_num - RHS| per interior snapshot.

    volume_sign=-1 evaluates the right-hand side with the opposite sign of
    the volume-form variation.
    """
    Y = [r.Y for r in traj.records]
    ydot = _centered(traj, Y)
    out = []
    for k, s in enumerate(traj.states[1:-1]):
        vol, met, hess = y_dot_terms(s)
        out.append(abs(ydot[k] - (volume_sign * vol + met + hess)))
    return np.array(out)


def _delta_h_terms(state):
    m, h, mu = state.metric, state.h, state.mu
    R = gauss_curvature(m).values
    lh = laplacian(m, h, check_regularity=False).values
    hess11 = np.abs(derivative_stack(m, h, 1, 1).values) ** 2
    pointwise = (
        laplacian(m, lh**2, check_regularity=False).values
        - 2.0 * grad_norm_sq(m, lh)
        + 2.0 * hess11 * lh
        + 2.0 * mu * lh**2
    )
    return m.integrate(pointwise) + m.integrate(lh**2 * (mu - R)), m.integrate(lh**2)


def delta_h_flow_residual(traj) -> np.ndarray:
    """|d/dt int (Delta h)^2 omega - RHS| per interior snapshot."""
    terms = [_delta_h_terms(s) for s in traj.states]
    zdot = _centered(traj, [z for _, z in terms])
    return np.array([abs(zdot[k] - terms[k + 1][0]) for k in range(zdot.size)])


def laplacian_hessian_gap(m, h) -> float:
    """|int |nabla nablabar h|^2 omega - int (Delta h)^2 omega|."""
    lh = laplacian(m, h, check_regularity=False).values
    return abs(y_rs(m, 1, 1, h=h) - m.integrate(lh**2))
