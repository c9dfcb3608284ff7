"""Directional causal discovery in multivariate time series.

Two methods side by side: the Imbalance Gain built on the Differentiable
Information Imbalance (non-linear, rank based) and the classical VAR /
Granger F-test baseline.
"""

__version__ = "0.1.0"

from .data import TimeSeriesPanel, compute_returns, read_csv, standardize
from .dii import DiiConfig, final_dii, information_imbalance, optimize_weights
from .imbalance_gain import IgConfig, imbalance_gain, permutation_null
from .neighbors import DistanceSpec, pairwise_sq_distances, rank_matrix
from .synthetic import Process, SyntheticSpec, generate, regression_ground_truth
from .var_granger import fit_var, granger_f, select_lag

__all__ = [
    "DiiConfig",
    "DistanceSpec",
    "IgConfig",
    "Process",
    "SyntheticSpec",
    "TimeSeriesPanel",
    "compute_returns",
    "final_dii",
    "fit_var",
    "generate",
    "granger_f",
    "imbalance_gain",
    "information_imbalance",
    "optimize_weights",
    "pairwise_sq_distances",
    "permutation_null",
    "rank_matrix",
    "read_csv",
    "regression_ground_truth",
    "select_lag",
    "standardize",
]
