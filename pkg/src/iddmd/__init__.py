"""Parametric dynamic mode decomposition for inverse design."""

from .fit import FitConfig, IdDmdModel, fit_model, load_model, save_model
from .modal import classify_modes, evaluate_reduced_operator, modal_decomposition
from .observables import ObservableConfig, extract_physical_states, polynomial_delay_lift
from .predict import Trajectory, reconstruct_trajectory, relative_error
from .design import Constraint, DesignProblem, solve_design
from .uq import BagConfig, bagged_ensemble, ensemble_statistics
from .snapshots import ScalingFactors, SnapshotRecord, SnapshotSet, load_snapshot_set, save_snapshot_set

__version__ = "0.1.0"
