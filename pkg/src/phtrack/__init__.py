"""Sliding-manifold tracking control of mechanical port-Hamiltonian systems
with numerical contraction certificates."""

from .phsys import (
    MechanicalPHSystem,
    PhaseState,
    SingularInertiaError,
    SingularInputMapError,
    E_matrix,
    coriolis_S,
    coriolis_identity_residual,
    hamiltonian,
    hamiltonian_gradient,
    inertia_rate,
    open_loop_field,
    open_loop_field_coriolis,
    structure_decomposition,
)
from .models import ScaraParams, scara, toy_constant_inertia, toy_pendulum
from .tracking import (
    ControllerGains,
    ErrorState,
    ReferenceTrajectory,
    closed_loop_error_field,
    constant_reference,
    control_law,
    diagonal_gains,
    error_coordinates,
    paper_gains,
    paper_reference,
    p_reference,
    p_reference_rate,
    phase_from_error,
    sinusoidal_reference,
)
from .contraction import (
    ContractionCertificate,
    certificate,
    contraction_check_along_trajectory,
    contraction_rate,
    differential_lyapunov,
    gain_condition,
    metric_P,
    riemannian_distance,
    riemannian_metric_Pi,
    upsilon,
    variational_field,
    virtual_error_field,
)
from .sim import Scenario, SimLog, rk4_step, simulate

__version__ = "0.1.0"

__all__ = [
    "MechanicalPHSystem", "PhaseState", "SingularInertiaError", "SingularInputMapError",
    "E_matrix", "coriolis_S", "coriolis_identity_residual", "hamiltonian",
    "hamiltonian_gradient", "inertia_rate", "open_loop_field", "open_loop_field_coriolis",
    "structure_decomposition",
    "ScaraParams", "scara", "toy_constant_inertia", "toy_pendulum",
    "ControllerGains", "ErrorState", "ReferenceTrajectory", "closed_loop_error_field",
    "constant_reference", "control_law", "diagonal_gains", "error_coordinates",
    "paper_gains", "paper_reference", "p_reference", "p_reference_rate",
    "phase_from_error", "sinusoidal_reference",
    "ContractionCertificate", "certificate", "contraction_check_along_trajectory",
    "contraction_rate", "differential_lyapunov", "gain_condition", "metric_P",
    "riemannian_distance", "riemannian_metric_Pi", "upsilon", "variational_field",
    "virtual_error_field",
    "Scenario", "SimLog", "rk4_step", "simulate",
]
