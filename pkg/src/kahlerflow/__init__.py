"""Normalized Kahler-Ricci flow on circle-symmetric metrics of the 2-sphere.

Also holds the pointwise curvature-operator algebra of Kahler surfaces.
"""

from .config import RunConfig, load_config
from .errors import (
    BlowUpError,
    CapabilityError,
    ConfigError,
    DegeneracyError,
    DegenerateMetricError,
    InputError,
    KahlerFlowError,
    NumericalError,
    ResidualExceeded,
    SolvabilityError,
    StepSizeError,
)
from .flow import FlowState, Trajectory, flow_step, h_flow_residual, metric_equivalence_report, run_flow
from .geometry import ConformalMetric, ScalarField, latitude_grid, ricci_potential

__version__ = "0.1.0"
