"""Multiple-try, particle and group Metropolis samplers with diagnostics and benchmarks."""

import logging

from .diagnostics import (MseResult, RunSummary, acceptance_rate, autocorr, chain_mean_estimator, ess_of_chain,
                          gms_estimate, mse_harness, recover_imtm2_chain, recover_parallel_chains, summarize)
from .exceptions import (ConfigurationError, DegenerateWeightsError, InitializationError, SingularGeometryError,
                         SingularKernelError, UndefinedAutocorrelationError)
from .particles import ParticleSystem, ess_hat, estimator_zbar, estimator_zhat, multinomial_resample, run_sir, run_sis
from .proposals import (AdaptState, GaussianChainProposal, GaussianIndependent, GaussianRandomWalk, MALAProposal,
                        SecondStageProposal, adapt_mean)
from .samplers import (ChainTrace, GmsRun, WeightedSet, WeightFunctionKind, run_drm2, run_enmcmc, run_gms,
                       run_ienmcmc, run_imh, run_imtm, run_imtm2, run_mh, run_mtm, run_parallel_imtm_shared,
                       run_pmh, run_pmmh, run_var_pmh)
from .targets import (FactorizedGaussianTarget, GPPosteriorTarget, LogTarget, MixtureGaussianTarget, RSSTarget,
                      WSNTarget)

__version__ = "0.1.0"

__all__ = [name for name, obj in list(globals().items())
           if not name.startswith("_") and not isinstance(obj, type(logging))]
