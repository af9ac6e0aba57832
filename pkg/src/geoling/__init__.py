"""Permutation tests for geographic dependence of linguistic variables."""

from .geometry import GeoPoint, PointSet, SpatialWeights, delaunay_edges, distance_matrix
from .lingdata import Dataset, ObservationColumn, applicability, read_observations
from .hsic import hsic_dense, hsic_lowrank, hsic_oracle
from .classical import join_counts, mantel, morans_i
from .inference import PermutationPlan, TestReport, bh_fdr, calibrate, permutation_test, power, sweep_min_p
from .synthgen import Region, ScenarioConfig, default_regions, generate

__version__ = "0.1.0"

__all__ = [
    "GeoPoint", "PointSet", "SpatialWeights", "delaunay_edges", "distance_matrix",
    "Dataset", "ObservationColumn", "applicability", "read_observations",
    "hsic_dense", "hsic_lowrank", "hsic_oracle",
    "join_counts", "mantel", "morans_i",
    "PermutationPlan", "TestReport", "bh_fdr", "calibrate", "permutation_test", "power", "sweep_min_p",
    "Region", "ScenarioConfig", "default_regions", "generate",
]
