"""Wasserstein distributionally robust adaptive beamforming."""

from .cone import ConeProblem, SolveReport, solve_cone
from .designs import (
    BeamformerDesign,
    InfeasibleRadius,
    SolverFailure,
    WassersteinBall,
    certificate_of_robustness,
    design_diag_load,
    design_mvdr_smi,
    design_wdro_joint,
    design_wdro_mahalanobis,
    design_wdro_norm,
    epsilon_from_beta,
    lambda_star,
)
from .scenario import (
    ArrayGeometry,
    PerturbationModel,
    Scenario,
    SnapshotBatch,
    SourceSpec,
    SteeringSampleSet,
    lift_matrix,
    lift_vector,
    steering_vector,
)

__version__ = "0.1.0"
