"""EMG mixture residual models for regression and spectroscopic backgrounds."""
from .density import (EmgParams, MixtureParams, emg_log_pdf, emg_sample, emgm_log_pdf, erfcx,
                      gaussian_log_pdf, neg_log_emg_partials, std_emg_log_pdf)
from .em import (FitOptions, FitResult, LineSearchOptions, ModelAdapter, e_step,
                 expected_loglik, fit_emgm, log_posterior, m_step, observed_loglik,
                 scaled_descent)
from .adapters import ConstantAdapter, IdentityAdapter, LineAdapter, LowRankAdapter
from .objectives import LossKind, fit_loss, loss_eval
from .regression import Contamination, RegressionConfig, fit_line, gen_regression, run_trials
from .spectro import (LowRankModel, SpectraGenConfig, SpectroDataset, background_errors,
                      fit_background, gen_spectra, imodpoly, kernel_basis, rbf_kernel,
                      rkhs_projector, run_pmf_bench)
from .errors import ContractError, DescentError, DomainError, EmgLabError, FitError

__version__ = "0.1.0"
