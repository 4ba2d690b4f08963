"""Gaussian Markov-switching models with time-varying transition probabilities."""
from .errors import (DegeneracyError, DimensionError, DomainError, IngestionError, InputError,
                     MSError, ParameterError)
from .model import (Dynamics, ModelSpec, Parameterization, Params, VarianceStructure,
                    link_f_to_matrix, link_jacobian, link_matrix_to_f, permute_params,
                    pi_elements)
from .dynamics import f_model1, f_model2, f_model3_step, fpath, gas_score
from .filtering import Dataset, FilterOutput, classify_regimes, loglik, run_filter
from .simulate import SimOutput, dgp_preset, rng_for, simulate
from .estimation import EstimationResult, estimate, information_criteria, standard_errors
from .evaluation import (align_labels, align_to_truth, filtered_prob_accuracy, forecast_metrics,
                         profile_loglik, recovery_metrics)
from .montecarlo import McResult, McScenario, default_grid, run_scenario, run_scenarios
from .empirical import EmpiricalReport, difference, ingest_yields, run_empirical

__version__ = "0.1.0"
