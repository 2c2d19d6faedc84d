"""Numerical lab for two-dimensional position-dependent-mass oscillators and their unit-mass images."""

from .catalog import MODEL_NAMES, catalog_lookup, initial_state, list_models, pdm_closed_form, reference_closed_form
from .config import ExperimentConfig, parse_config
from .dynamics import (
    IntegratorConfig,
    State,
    Trajectory,
    drift,
    el_residual,
    pdm_acceleration,
    reference_acceleration,
    sub_energy,
    total_energy_pdm,
)
from .errors import (
    CatalogError,
    ConfigError,
    DomainError,
    InputError,
    MonotonicityError,
    NonInvertibleError,
    ParameterError,
    PdmError,
    StepLimitError,
    TruncatedTrajectoryError,
    UnsupportedError,
    WindowError,
)
from .experiments import ReportBundle, run_map, run_report, run_simulate, run_verify
from .integrators import integrate
from .models import MassFunction, ModelPair, PdmModel, Potential, ReferenceModel, mass_value
from .transforms import TransformSpec, inverse_point_map, map_trajectory, point_map, velocity_map

__version__ = "0.1.0"
