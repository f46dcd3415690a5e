"""Bounds on network disruption from two-arm network experiments."""

from .exceptions import NetworkValidationError, NumericalError
from .netmat import (EigenPair, Network, Spectrum, eigen_pairs, homomorphism_density, load_network,
                     make_network, spectrum, symmetrize_bipartite, threshold_indicator)
from .bounds import (BoundInterval, DpoCellTable, DteCurve, dpo_bounds, dte_bounds, dte_curve,
                     frechet_hoeffding, mean_difference, paired_products, pmf_cell_bounds)
from .ste import MonotoneLift, SteField, disruption_lower_bound, dte_point_identified, matrix_lift, ste_field
from .oracle import SharpSet, orthogonal_relaxation, sharp_destroyed_created, sharp_overlap_set
from .adjust import ReductionDecomposition, adjusted_overlap_bounds, reduce, svt_denoise

__version__ = "0.1.0"
