"""Distances over balls of reproducing-kernel Hilbert spaces, smoothed estimators and checks."""

from .adaptive import BandwidthSelection, LepskiConfig, l1_distance_kde, l1_risk, lepski_bandwidth
from .distances import (DistanceEstimate, kx_distance, mmd_squared, population_distance,
                        smoothed_cross_gauss, smoothed_distance_generic,
                        smoothed_empirical_cauchy, smoothed_empirical_gauss, sup_mmd)
from .distributions import DistributionSpec, sample_distribution, standard_normal
from .harness import (CLTConfig, ExperimentReport, RateConfig, clt_spread_experiment,
                      rate_experiment)
from .inference import TestResult, two_sample_test
from .kernels import KernelFamily, KernelPoint, empirical_cover, gram_matrix, rho_distance
from .optimize import OptimizerConfig
from .samples import SampleSet, load_csv, save_csv
from .smoothing import SmoothingKernel, bandwidth_rule, build_order_kernel, check_order, kde_eval
from .theory_checks import (BoundReport, chaos_scaling, chaos_sup, concentration_check,
                            massart_check)

__version__ = "0.1.0"
