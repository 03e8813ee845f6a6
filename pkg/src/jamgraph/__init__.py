"""Sparse conditional-independence graphs from jointly fitted additive models."""
from ._accel import USE_NUMBA
from .basis import BasisSpec, DataMatrix, ExpandedDesign, expand, orthonormalize, standardize
from .dag import CausalOrdering, fit_dag, fit_dag_path
from .evaluation import Confusion, confusion, roc_table
from .screening import ScreenReport, canonical_corr, fit_screened, marginal_graph
from .selection import PathResult, bic, fit_path, lambda_grid, lambda_max, select
from .simulate import DagSpec, gen_coeffs, moralize, random_dag, sample
from .solver import FitResult, Graph, SolverOptions, edge_set, fit, kkt_residual, objective

__version__ = "0.1.0"
