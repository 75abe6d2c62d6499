"""Normalized Kahler-Ricci flow g_t = -Ric + mu g in conformal form u_t = (mu - R)/2."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .config import RunConfig
from .errors import BlowUpError, DegenerateMetricError, InputError, StepSizeError
from .geometry import (
    DEGENERACY_FLOOR,
    FOUR_PI,
    ConformalMetric,
    ScalarField,
    gauss_curvature,
    latitude_grid,
    laplacian,
    ricci_potential,
)


@dataclass(frozen=True)
class FlowState:
    t: float
    metric: ConformalMetric
    h: ScalarField
    mu: float
    step_index: int = 0

    @classmethod
    def from_metric(cls, m, t=0.0, step_index=0):
        h, mu = ricci_potential(m)
        return cls(float(t), m, h, mu, step_index)


def initial_metric(N, coefficients, amplitude):
    """u0 = amplitude * sum_j c_j cos(xi)^j, shifted to area 4 pi."""
    g = latitude_grid(N)
    u = amplitude * np.polynomial.polynomial.polyval(g.x, np.asarray(coefficients, float))
    return ConformalMetric.normalized(g, u)


def stability_limit(m: ConformalMetric, cfl=0.2):
    return cfl * m.grid.h**2 * float(np.min(m.e2u))


def velocity(m: ConformalMetric):
    """(mu - R)/2 with mu the average curvature."""
    R = gauss_curvature(m).values
    mu = m.integrate(R) / m.area
    return 0.5 * (mu - R)


def flow_step(s: FlowState, dt: float, cfl=0.2) -> FlowState:
    """One explicit RK4 step; h and mu are re-solved at the new metric."""
    if not dt > 0:
        raise StepSizeError("dt must be positive")
    lim = stability_limit(s.metric, cfl)
    if dt > lim * (1 + 1e-12):
        raise StepSizeError(f"dt = {dt:.3g} exceeds the stability limit {lim:.3g}")
    g = s.metric.grid
    u0 = s.metric.u

    def f(u):
        return velocity(ConformalMetric(g, u, check_area=False))

    try:
        k1 = f(u0)
        k2 = f(u0 + 0.5 * dt * k1)
        k3 = f(u0 + 0.5 * dt * k2)
        k4 = f(u0 + dt * k3)
        m = ConformalMetric(g, u0 + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), check_area=False)
    except DegenerateMetricError as exc:
        raise BlowUpError(str(exc), last_state=s) from exc
    return FlowState.from_metric(m, s.t + dt, s.step_index + 1)


@dataclass
class Trajectory:
    """Recorded snapshots. Every record keeps the full state (u, h, mu)."""

    config: RunConfig
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    records: list = field(default_factory=list)
    gdot_integral: list = field(default_factory=list)
    ratio_log_bounds: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    converged_time: float | None = None
    status: str = "ok"
    message: str = ""

    def __len__(self):
        return len(self.times)

    @property
    def converged(self):
        return self.converged_time is not None

    def series(self, name):
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def truncated(self, t_max):
        n = sum(1 for t in self.times if t <= t_max + 1e-12)
        out = Trajectory(self.config)
        for key in ("times", "states", "records", "gdot_integral", "ratio_log_bounds", "steps"):
            setattr(out, key, list(getattr(self, key)[:n]))
        out.records = [copy.copy(r) for r in out.records]
        ct = self.converged_time
        out.converged_time = ct if ct is not None and ct <= t_max + 1e-12 else None
        return out


def _record(traj, state, acc, K, recorder):
    traj.times.append(state.t)
    traj.states.append(state)
    traj.records.append(recorder(state, K))
    traj.gdot_integral.append(float(acc[0]))
    traj.ratio_log_bounds.append((float(acc[1]), float(acc[2])))
    traj.steps.append(int(acc[3]))


def run_flow(config: RunConfig, metric: ConformalMetric | None = None, recorder=None) -> Trajectory:
    """Integrate to t_end, recording diagnostics every ``config.cadence``.

    Stops early at convergence only when ``stop_on_converge`` is set. Blow-up
    raises BlowUpError carrying the partial trajectory as ``last_state``.
    """
    from .functionals import diagnostics_record, mabuchi_fill

    recorder = recorder or diagnostics_record
    if metric is None:
        metric = initial_metric(config.N, config.coefficients, config.amplitude)
    elif metric.grid.N != config.N:
        raise InputError("metric grid does not match config N")
    g = metric.grid
    u = np.array(metric.u, dtype=float)
    u_ref = u.copy()
    acc = np.array([0.0, 0.0, 0.0, 0.0])
    log_floor = math.log(DEGENERACY_FLOOR)
    traj = Trajectory(config)
    state = FlowState.from_metric(metric)
    _record(traj, state, acc, config.sector_cap, recorder)
    if traj.records[-1].sup_gdot < config.converge_tol:
        traj.converged_time = 0.0
    for n in range(1, config.n_records):
        if config.stop_on_converge and traj.converged:
            break
        m = traj.states[-1].metric
        nsteps = max(1, math.ceil(config.cadence / stability_limit(m, config.cfl)))
        dt = config.cadence / nsteps
        status, _ = _kernels.rk4_steps(
            u, u_ref, g.lap0_even, g.lap0_odd, g.weights, dt, nsteps, log_floor, acc
        )
        if status != _kernels.OK:
            traj.status = "blowup"
            traj.message = f"degenerate metric between t={traj.times[-1]:.6g} and t={n * config.cadence:.6g}"
            mabuchi_fill(traj)
            raise BlowUpError(traj.message, last_state=traj)
        m = ConformalMetric(g, u.copy(), check_area=False)
        state = FlowState.from_metric(m, n * config.cadence, int(acc[3]))
        _record(traj, state, acc, config.sector_cap, recorder)
        if traj.converged_time is None and traj.records[-1].sup_gdot < config.converge_tol:
            traj.converged_time = state.t
    mabuchi_fill(traj)
    return traj


def h_flow_residual(traj: Trajectory, sign: int = 1):
    """sup-norm of hdot - (Delta h + sign * mu h + c) at interior snapshots.

    hdot is the centered difference of the recorded potentials and c the
    omega-mean of the mismatch. sign=-1 evaluates the rejected identity.
    """
    if len(traj) < 3:
        raise InputError("need at least 3 snapshots")
    out = []
    S = traj.states
    for k in range(1, len(S) - 1):
        s = S[k]
        hdot = (S[k + 1].h.values - S[k - 1].h.values) / (S[k + 1].t - S[k - 1].t)
        rhs = laplacian(s.metric, s.h, check_regularity=False).values + sign * s.mu * s.h.values
        d = hdot - rhs
        c = s.metric.integrate(d) / s.metric.area
        out.append(float(np.max(np.abs(d - c))))
    return np.array(out)


def gauge_constant(traj: Trajectory):
    """The constant c in hdot = Delta h + mu h + c recovered per interior snapshot."""
    out = []
    S = traj.states
    for k in range(1, len(S) - 1):
        s = S[k]
        hdot = (S[k + 1].h.values - S[k - 1].h.values) / (S[k + 1].t - S[k - 1].t)
        d = hdot - laplacian(s.metric, s.h, check_regularity=False).values - s.mu * s.h.values
        out.append(s.metric.integrate(d) / s.metric.area)
    return np.array(out)


@dataclass
class EquivalenceReport:
    integral: float
    ratio_bounds: tuple
    upper_ok: bool
    lower_ok: bool

    @property
    def holds(self):
        return self.upper_ok and self.lower_ok


def metric_equivalence_report(traj: Trajectory, tol=1e-6) -> EquivalenceReport:
    """Hamilton's criterion: e^{2u(t)}/e^{2u(0)} stays within exp(+-int sup|g_dot|)."""
    if len(traj) == 0:
        raise InputError("empty trajectory")
    integral = traj.gdot_integral[-1]
    lo = min(b[0] for b in traj.ratio_log_bounds)
    hi = max(b[1] for b in traj.ratio_log_bounds)
    rmin, rmax = math.exp(lo), math.exp(hi)
    upper = rmax <= math.exp(integral) * (1 + tol)
    lower = rmin >= math.exp(-integral) / (1 + tol)
    return EquivalenceReport(integral, (rmin, rmax), upper, lower)


def area_drift(traj: Trajectory):
    return np.array([abs(s.metric.area - FOUR_PI) for s in traj.states])
