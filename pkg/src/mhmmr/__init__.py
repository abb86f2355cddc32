"""Multivariate hidden Markov model regression for unsupervised segmentation
of multichannel time series, with baselines, evaluation and a CLI."""
from .core import EvalReport, MhmmrParams, PosteriorSet, Segmentation, TimeSeries, validate
from .data_io import (export_posteriors, load_csv, load_model, read_posteriors, save_model,
                      write_csv, write_segmentation)
from .design import DesignMatrix, build_design, weighted_covariance, weighted_mv_least_squares
from .em import FitConfig, FitResult, e_step, fit, init_params, m_step, run_em
from .evaluation import channel_subset, compare_methods, confusion_and_scores, evaluate, match_labels
from .inference import (EmissionTable, decode, emission_logdensities, forward_backward,
                        loglikelihood, max_posterior_decode, viterbi)
from .synthetic import GeneratorSpec, generate, activity_protocol, simulate_preset
from .baselines import gmm_fit, hmm_gaussian_fit, kmeans_fit

__version__ = "0.1.0"
