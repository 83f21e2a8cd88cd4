"""MCMC samplers sharing one RNG-stream protocol (see :mod:`mcmc_bench._util`)."""

from .ensemble import run_enmcmc, run_ienmcmc
from .gms import run_gms
from .metropolis import run_drm2, run_imh, run_mh
from .mtm import mtm_weight, run_imtm, run_imtm2, run_mtm, run_parallel_imtm_shared
from .particle import run_pmh, run_pmmh, run_var_pmh
from .trace import ChainTrace, GmsRun, WeightedSet, WeightFunctionKind

__all__ = [
    "ChainTrace", "GmsRun", "WeightedSet", "WeightFunctionKind", "mtm_weight",
    "run_mh", "run_imh", "run_drm2", "run_mtm", "run_imtm", "run_imtm2", "run_parallel_imtm_shared",
    "run_pmh", "run_var_pmh", "run_pmmh", "run_gms", "run_enmcmc", "run_ienmcmc",
]
