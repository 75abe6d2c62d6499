"""Artifacts of a run: trajectory CSV, JSON summary, text snapshots, rate fit."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ResidualExceeded
from .flow import area_drift, h_flow_residual, metric_equivalence_report
from .functionals import delta_h_flow_residual, y_dot_residual
from .geometry import gauss_curvature
from .spectral import key_inequality_check

OUTPUT_SCHEMA_VERSION = 1
CSV_COLUMNS = ("t", "Y", "Y_10", "Y_11", "Y_20", "nu", "futaki", "lambda_min", "sup_gdot", "area")
FIT_WINDOW = (1e-10, 1e-4)
MIN_FIT_POINTS = 20


@dataclass
class RateFit:
    applicable: bool
    window: tuple | None
    n_points: int
    slope: float | None
    r_squared: float | None
    reference: float | None
    relative_gap: float | None

    def to_dict(self):
        d = asdict(self)
        d["window"] = list(self.window) if self.window else None
        return d


def rate_fit(t, Y, lambda_ref, window=FIT_WINDOW, min_points=MIN_FIT_POINTS) -> RateFit:
    """Least-squares slope of log Y over the trailing run of points with Y in the window.

    The reference decay rate is 2 lambda_ref; gap = |slope + 2 lambda_ref| / (2 lambda_ref).
    """
    t = np.asarray(t, dtype=float)
    Y = np.asarray(Y, dtype=float)
    inside = (Y >= window[0]) & (Y <= window[1])
    idx = np.flatnonzero(inside)
    ref = 2.0 * lambda_ref if lambda_ref is not None else None
    if idx.size == 0:
        return RateFit(False, None, 0, None, None, ref, None)
    # trailing contiguous block
    end = idx[-1]
    start = end
    while start - 1 >= 0 and inside[start - 1]:
        start -= 1
    n = end - start + 1
    if n < min_points:
        return RateFit(False, (float(t[start]), float(t[end])), int(n), None, None, ref, None)
    tt, ly = t[start : end + 1], np.log(Y[start : end + 1])
    slope, icpt = np.polyfit(tt, ly, 1)
    resid = ly - (slope * tt + icpt)
    ss = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0
    gap = abs(slope + ref) / ref if ref else None
    return RateFit(True, (float(tt[0]), float(tt[-1])), int(n), float(slope), r2, ref, gap)


def _row(rec):
    return (
        rec.t, rec.Y, rec.Y_rs[(1, 0)], rec.Y_rs[(1, 1)], rec.Y_rs[(2, 0)],
        rec.nu, rec.futaki, rec.lambda_min, rec.sup_gdot, rec.area,
    )


def trajectory_csv(traj) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rec in traj.records:
        w.writerow([repr(float(v)) for v in _row(rec)])
    return buf.getvalue()


def snapshot_text(state) -> str:
    """Plain-text full state: header lines start with '#', then xi u h R per node."""
    m = state.metric
    R = gauss_curvature(m).values
    lines = [
        f"# kahlerflow snapshot v{OUTPUT_SCHEMA_VERSION}",
        f"# t {state.t!r}",
        f"# N {m.grid.N}",
        f"# mu {float(state.mu)!r}",
        "# columns xi u h R",
    ]
    for row in zip(m.grid.nodes, m.u, state.h.values, R):
        lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def read_snapshot(path):
    meta = {}
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] in ("t", "N", "mu"):
                meta[parts[0]] = float(parts[1])
            continue
        rows.append([float(v) for v in line.split()])
    return meta, np.array(rows)


def _finite(x):
    x = float(x)
    return x if math.isfinite(x) else None


def residual_summary(traj):
    """Maxima of the identity residuals; None where the trajectory is too short."""
    cfg = traj.config
    out = {}
    if len(traj) >= 3:
        out["h_flow"] = float(np.max(h_flow_residual(traj)))
        out["y_dot"] = float(np.max(y_dot_residual(traj)))
        out["delta_h"] = float(np.max(delta_h_flow_residual(traj)))
        rows = key_inequality_check(traj, cfg.key_slack)
        out["key_inequality_violations"] = sum(not r.satisfied for r in rows)
    else:
        out.update(h_flow=None, y_dot=None, delta_h=None, key_inequality_violations=0)
    eq = metric_equivalence_report(traj, cfg.hamilton_slack)
    out["hamilton"] = {
        "integral": eq.integral,
        "ratio_min": eq.ratio_bounds[0],
        "ratio_max": eq.ratio_bounds[1],
        "holds": eq.holds,
    }
    out["area_drift_max"] = float(np.max(area_drift(traj)))
    return out


def residual_failures(traj, residuals):
    cfg = traj.config
    fails = []
    for key, tol in (("h_flow", cfg.h_flow_tol), ("y_dot", cfg.y_dot_tol), ("delta_h", cfg.delta_h_tol)):
        v = residuals.get(key)
        if v is not None and v > tol:
            fails.append(f"{key} residual {v:.3g} > {tol:.3g}")
    if residuals["key_inequality_violations"]:
        fails.append(f"key inequality violated at {residuals['key_inequality_violations']} snapshots")
    if not residuals["hamilton"]["holds"]:
        fails.append("Hamilton envelope violated")
    return fails


def build_summary(traj, status="ok", message=""):
    last = traj.records[-1]
    lam_inf = last.lambda_min
    fit = rate_fit(traj.times, traj.series("Y"), lam_inf)
    residuals = residual_summary(traj)
    return {
        "schema_version": OUTPUT_SCHEMA_VERSION,
        "status": status,
        "message": message,
        "config": traj.config.to_dict(),
        "n_records": len(traj),
        "t_final": traj.times[-1],
        "converged": traj.converged,
        "converged_time": traj.converged_time,
        "Y_final": last.Y,
        "nu_final": last.nu,
        "lambda_inf": lam_inf,
        "lambda_min_over_run": float(np.min(traj.series("lambda_min"))),
        "kernel_dims": sorted(set(int(r.kernel_dim) for r in traj.records)),
        "rate_fit": fit.to_dict(),
        "residuals": residuals,
        "residual_failures": residual_failures(traj, residuals),
    }


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False, default=_finite) + "\n"


def write_run_artifacts(traj, out_dir, status="ok", message=""):
    """Write trajectory.csv, summary.json and snapshots/; return the summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trajectory.csv").write_text(trajectory_csv(traj))
    snaps = out / "snapshots"
    snaps.mkdir(exist_ok=True)
    times = np.asarray(traj.times)
    for ts in traj.config.snapshot_times:
        k = int(np.argmin(np.abs(times - ts)))
        st = traj.states[k]
        (snaps / f"snapshot_t{st.t:.6f}.txt").write_text(snapshot_text(st))
    summary = build_summary(traj, status, message)
    (out / "summary.json").write_text(dumps(summary))
    return summary


def check_residuals(summary):
    if summary["residual_failures"]:
        raise ResidualExceeded("; ".join(summary["residual_failures"]))
