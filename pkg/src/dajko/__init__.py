"""Data-assimilated JKO scheme for one-dimensional Wasserstein gradient flows."""

__version__ = "0.1.0"

from .analytic import BarenblattParams, barenblatt, gaussian_two_bump, scale_to_mass, shifted_barenblatt_profile
from .constraints import assemble_constraints, estimate_operator_norm, update_targets
from .energy import ChemoParams, EnergyFunctional, PMEParams, chemo_energy, pme_energy
from .grid import GridSpec, QuadratureWeights, StateField
from .measurements import MeasurementSpec
from .scheme import Trajectory, run_scheme, total_square_check
from .solver import SolverParams, dajko_step

__all__ = [
    "BarenblattParams", "ChemoParams", "EnergyFunctional", "GridSpec", "MeasurementSpec", "PMEParams",
    "QuadratureWeights", "SolverParams", "StateField", "Trajectory", "assemble_constraints", "barenblatt",
    "chemo_energy", "dajko_step", "estimate_operator_norm", "gaussian_two_bump", "pme_energy", "run_scheme",
    "scale_to_mass", "shifted_barenblatt_profile", "total_square_check", "update_targets",
]
