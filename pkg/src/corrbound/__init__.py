"""Decay bounds for determinants, permanents and pairing sums of matrices
indexed by lattice configurations, with the matching, cluster and model
machinery needed to test them."""

from .bounds import ExplicitConstants, check_thm13, check_thm15, compute_B
from .cluster import ClusterPartition, DecayKernel, bordered_det_bound, cluster_for
from .geometry import EUCLIDEAN, SUP, ConfigError, PointConfig, SizeCapError
from .matching import (
    Assignment,
    CostMatrix,
    bottleneck_assignment,
    min_sum_assignment,
    min_weight_perfect_matching,
    minimal_permutation,
)
from .multilinear import abs_permanent, determinant, hafnian, pairing_sum, pfaffian
from .reports import BoundReport, PremiseError

__version__ = "0.1.0"
