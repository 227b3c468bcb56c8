"""Exact differential-privacy accounting for the Horvitz-Thompson total.

Covers enumerable without-replacement designs, optional Laplace noise, closed
forms for simple random sampling on binary data, Laplace-scale calibration,
conditional moments for a Gaussian add-on, and a Monte-Carlo auditor.
"""

from htdp.calibrate import CalibrationResult, calibrate_b
from htdp.design import (
    Design,
    InclusionProbs,
    inclusion_probabilities,
    make_explicit_design,
    make_srs_design,
)
from htdp.estimator import (
    AdjacentPair,
    AtomicDistribution,
    Dataset,
    atom_distribution,
    ht_value,
    make_pair,
    support_bounds,
)
from htdp.gaussian_moments import ConditionalMoments, conditional_moments
from htdp.laplace_profile import (
    LaplaceMixture,
    PrivacyProfile,
    delta_discrete,
    delta_laplace,
    density_ratio_sup,
    epsilon_at_delta,
    epsilon_at_zero_delta,
    extremal_pair_heuristic,
    extremal_pairs_all_units,
    mixture_density,
    profile,
)
from htdp.audit import mc_delta
from htdp.srs_binary import (
    SrsBinaryConfig,
    delta_srs_b0,
    epsilon_srs_b0_delta0,
    hypergeom_atoms,
)

__version__ = "0.1.0"
