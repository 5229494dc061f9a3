"""Perturbation simulator and diagnostics for compressible plane Couette flow
in a periodic channel, aimed at the low-Mach regime."""
from .params import PhysicalParams, ParameterError, build_params, default_params
from .grid import Grid, GridError
from .baseflow import BaseFlow, build_base_flow, steady_residual
from .solver import (PerturbationState, SolverConfig, Tendency, make_initial_data,
                     run, step_explicit_rk4, step_imex, tendency)
from .diagnostics import EnergyReport, Monitor, relative_entropy
from .experiments import decay_study, epsilon_sweep, fit_loglog_slope, stiffness_benchmark
from .checkpoint import read_checkpoint, write_checkpoint
from .config import RunConfig, parse_config

__version__ = "0.1.0"
