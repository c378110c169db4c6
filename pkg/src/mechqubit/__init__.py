"""Post-selection preparation of non-classical mechanical states."""

__version__ = "0.1.0"

from .closed_form import CouplingParams, PostSelection, plus_branch_angle, \
    solve_postselection_angle
from .damped import DampedParams
from .errors import ConfigError, CutoffError, DegeneratePostSelection, IntegrationError, \
    MechQubitError, NoSolutionError
from .lindblad import DecoherenceRates, SolverConfig
