"""Ground states of the focusing-defocusing nonlinear wave equation via
nonlinear Rayleigh-quotient minimization, with a shooting oracle, curve
sweeps, and conservative time evolution for stability experiments."""

from .errors import (ConvergenceError, DomainError, GridMismatchError,
                     RegimeError)
from .grid import (Field, Functionals, GridSpec, dump_field, functionals,
                   gaussian_field, gradients, h1_distance, load_field,
                   make_grid, resample, weighted_norm)
from .quotients import (Constants, FiberingReport, Params, action,
                        action_level_quotient, constants, fibering,
                        hamiltonian, m_quotient, mu_quotient, ng_rayleigh,
                        s_opt, scaling_laws, sigma_opt)
from .shooting import (ShootingConfig, ShootingProfile, ShotOutcome,
                       find_ground_profile, shoot, verify)
from .solvers import (MassResult, Solution, ThresholdResult, estimate_alpha0,
                      mass_minimize, minimize_lambda, minimize_mu)
from .curves import (CurvePoint, CurveTable, check_bracketing,
                     check_derivative, invert_lambda, stability_inclusion,
                     sweep_S, threshold_S_of_mu, write_table_csv)
from .evolution import (EvolutionTrace, WaveState, evolve, orbit_distance,
                        stability_experiment, step)

__version__ = "0.1.0"
