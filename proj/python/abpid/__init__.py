"""Adaptive robust backstepping control, its PID form and a quadrotor simulator."""

from ._core import (
    ConfigurationError,
    ContractViolation,
    DomainError,
    GainConversion,
    InfeasibleGains,
    SingularityError,
    backstepping_from_pid,
    builtin_scenarios,
    describe_infeasibility,
    effective_config,
    error_signals,
    feasibility_sweep,
    kd_min,
    kp_max,
    pid_from_backstepping,
    proj,
    rls_update,
    rotor_mixing,
    simulate,
    telemetry_columns,
    thrust_and_attitude_from_u,
    world_force,
)

__all__ = [
    "ConfigurationError",
    "ContractViolation",
    "DomainError",
    "GainConversion",
    "InfeasibleGains",
    "SingularityError",
    "backstepping_from_pid",
    "builtin_scenarios",
    "describe_infeasibility",
    "effective_config",
    "error_signals",
    "feasibility_sweep",
    "kd_min",
    "kp_max",
    "pid_from_backstepping",
    "proj",
    "rls_update",
    "rotor_mixing",
    "simulate",
    "telemetry_columns",
    "thrust_and_attitude_from_u",
    "world_force",
]
