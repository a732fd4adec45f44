"""Kinetic BGK relaxation towards a variational (entropy-ladder) equilibrium
for scalar conservation laws, with structural diagnostics and references."""

from .model import DomainError, FluxSpec, check_nondegeneracy, eval_flux, eval_flux_derivative
from .phase_grid import KineticState, PhaseGrid, from_macro, gibbs_entropy, macro_density
from .projection import (EntropyLadder, ProjectionResult, brute_force_min, equilibrium_projection,
                         eta_eps, lemma1_min_value, lemma2_check, gibbs_inequality_check,
                         variational_projection)
from .bgk import SolverConfig, relaxation_step, run, step, transport_step
from .diagnostics import DiagnosticsRecord, RunMonitor
from .reference import MacroField, burgers_riemann_exact, godunov_run, l1_distance

__version__ = "0.1.0"
