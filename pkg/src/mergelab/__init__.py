"""Exact simulation of one-shot LOCC state merging protocols."""

from .linalg import DensityOperator, LinearMap, PureState
from .states import GammaParams, MergeInstance, build_instance
from .protocols import Protocol, RunReport, build_one_way, build_two_way, simulate

__version__ = "0.1.0"

__all__ = [
    "DensityOperator", "LinearMap", "PureState",
    "GammaParams", "MergeInstance", "build_instance",
    "Protocol", "RunReport", "build_one_way", "build_two_way", "simulate",
]
