"""Emerging spectra of singular correlation matrices under power-map deformations.

A library and CLI for studying what the entrywise power map
C_kl -> sign(C_kl)|C_kl|^q does to singular sample correlation matrices:
it generates (correlated) Wishart ensembles, splits deformed spectra into
the emerging part lifted out of the zero-eigenvalue subspace and the bulk
corrections, compares empirical moments and densities against closed-form
linear-response predictions, and reproduces a minimum-variance portfolio
experiment where the power map keeps short-horizon covariance estimates
usable even when they are singular.
"""

__version__ = "0.1.0"

from .ensembles import (DataMatrix, EnsembleShape, PopulationCorrelation,
                        SampleMatrix, build_banded, build_block_diagonal,
                        build_identity, build_one_block, cwoe_sample,
                        derive_seed, matrix_sqrt, rank_tolerance,
                        sample_gaussian, wishart)
from .powermap import Deformation, linear_response_map, power_map
from .spectral import (DensityHistogram, EigenSystem, MomentSet,
                       SpectralSplit, block_overlap, detach_by_largest_gap,
                       eigh, empirical_moments, histogram, split_spectrum)
from .theory import (AnsatzParams, ConvergenceError, LinearResponseWarning,
                     ResolventQuery, TheoryConstants, ansatz_asymptotic,
                     ansatz_density, ansatz_invert, ansatz_moments,
                     ansatz_support, bulk_moment_extrapolation, cwoe_density,
                     cwoe_density_grid, cwoe_resolvent, delta_m1_exact,
                     delta_m2_exact, delta_m_asymptotic, digamma,
                     element_moment, emerging_moments,
                     largest_correction_estimate, mp_density, mp_resolvent,
                     mp_support, mp_zero_mass, oneblock_ansatz,
                     oneblock_ansatz_moments, oneblock_delta_moments,
                     oneblock_density, oneblock_separated_position,
                     oneblock_support, trigamma)
from .portfolio import (PortfolioModel, PortfolioResult,
                        SingularCovarianceError, build_model,
                        min_variance_weights, portfolio_trial,
                        power_mapped_covariance, run_sweep,
                        sample_correlation, simulate_returns)
