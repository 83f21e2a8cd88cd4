"""Sequential importance sampling and resampling.

A :class:`ParticleSystem` holds N paths built step by step from a
:class:`~mcmc_bench.proposals.FactorizedProposal` against a
:class:`~mcmc_bench.targets.FactorizedTarget`.  Everything is in the log
domain: ``log_beta[d]`` are the incremental weights
``log gamma_d - log q_d`` and ``log_w[d]`` the running weights carried out of
step ``d``.

Per step the order of random draws is: one proposal draw per particle, then
(only when resampling triggers) ``N`` uniforms for multinomial resampling.
"""

from dataclasses import dataclass, field

import numpy as np

from ._util import logsumexp, select_indices, check_positive_int
from .exceptions import ConfigurationError, DegenerateWeightsError

ESS_KINDS = ("inverse_sum_squares", "inverse_max")


def ess_hat(log_weights, kind="inverse_sum_squares"):
    """Effective sample size of a weight vector given in log domain."""
    log_weights = np.asarray(log_weights, dtype=float)
    m = log_weights.max() if log_weights.size else -np.inf
    if not np.isfinite(m):
        raise DegenerateWeightsError("all weights are zero")
    p = np.exp(log_weights - m)
    p /= p.sum()
    if kind == "inverse_sum_squares":
        return float(1.0 / np.sum(p ** 2))
    if kind == "inverse_max":
        return float(1.0 / p.max())
    raise ConfigurationError(f"unknown ESS kind {kind!r}")


def multinomial_resample(log_weights, count, rng):
    """Draw ``count`` indices i.i.d. proportional to ``exp(log_weights)``.

    Consumes exactly ``count`` uniforms.  Adding a constant to every
    log-weight leaves the indices unchanged.
    """
    log_weights = np.asarray(log_weights, dtype=float)
    if not np.any(np.isfinite(log_weights)) or np.nanmax(log_weights) == -np.inf:
        raise DegenerateWeightsError("cannot resample: all weights are zero")
    return select_indices(log_weights, rng.random(count))


def sequential_log_weights(target, proposal, x, return_log_pi=False):
    """Log importance weights of full paths, accumulated step by step.

    Uses the same summation order as the particle filter so that a filter
    without resampling reproduces these values bit for bit.  With
    ``return_log_pi`` the log target of each path, summed in the order used
    by :class:`~mcmc_bench.targets.FactorizedTarget`, is returned as well.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    lg = target.log_gamma(0, x[:, 0], x[:, :0])
    w = lg - proposal.log_q_step(0, x[:, 0], x[:, :0])
    lp = lg
    for d in range(1, target.dim):
        lg = target.log_gamma(d, x[:, d], x[:, :d])
        w = w + (lg - proposal.log_q_step(d, x[:, d], x[:, :d]))
        lp = lp + lg
    return (w, lp) if return_log_pi else w


@dataclass
class ParticleSystem:
    """Output of a particle filter run.

    Attributes
    ----------
    paths : ndarray, shape (N, D)
        Final particle paths (after any resampling at the last step).
    log_beta : ndarray, shape (D, N)
        Incremental log weights of the particles alive at each step.
    log_w : ndarray, shape (D, N)
        Running log weights carried out of each step (after resampling).
    log_w_pre : ndarray, shape (D, N)
        Running log weights before any resampling at that step.
    log_zhat, log_zbar : ndarray, shape (D,)
        The two running estimators of log Z, computed before resampling.
    resampled : list of int
        Steps (0-based) at which resampling fired.
    """

    paths: np.ndarray
    log_beta: np.ndarray
    log_w: np.ndarray
    log_w_pre: np.ndarray
    log_zhat: np.ndarray
    log_zbar: np.ndarray
    resampled: list = field(default_factory=list)
    proper_weighting: bool = True

    @property
    def n_particles(self):
        return self.paths.shape[0]

    @property
    def final_log_weights(self):
        return self.log_w[-1]

    def to_rows(self):
        """Rows ``(n, d, x, log_w)`` of the final paths for plotting."""
        N, D = self.paths.shape
        n, d = np.meshgrid(np.arange(N), np.arange(D), indexing="ij")
        return np.column_stack([n.ravel(), d.ravel(), self.paths.ravel(), self.log_w.T.ravel()])


def estimator_zhat(system):
    return float(system.log_zhat[-1])


def estimator_zbar(system):
    return float(system.log_zbar[-1])


def run_sir(target, proposal, N, eta=1.0, proper_weighting=True, ess_kind="inverse_sum_squares", seed=None,
            rng=None):
    """Sequential importance resampling.

    Resampling (multinomial, whole paths) fires at step ``d`` when the ESS of
    the running weights drops below ``eta * N``.  With ``proper_weighting``
    the resampled particles all carry ``log Zhat_d``; otherwise their weights
    restart at 0 (unit weight).  ``eta = 0`` never resamples.

    Parameters
    ----------
    target : FactorizedTarget
    proposal : FactorizedProposal
    N : int
    eta : float in [0, 1]
    proper_weighting : bool
    ess_kind : {"inverse_sum_squares", "inverse_max"}
    seed : int or SeedSequence, optional
        Ignored when ``rng`` is given.
    rng : numpy.random.Generator, optional

    Returns
    -------
    ParticleSystem

    Raises
    ------
    DegenerateWeightsError
        If every running weight is zero at some step.
    """
    N = check_positive_int("N", N)
    if not 0.0 <= eta <= 1.0:
        raise ConfigurationError(f"eta must lie in [0, 1], got {eta}")
    if eta > 0 and N < 2:
        raise ConfigurationError("resampling needs N >= 2")
    if ess_kind not in ESS_KINDS:
        raise ConfigurationError(f"unknown ESS kind {ess_kind!r}")
    if target.dim != proposal.dim:
        raise ConfigurationError("target and proposal dimensions differ")
    rng = np.random.default_rng(seed) if rng is None else rng
    D = target.dim
    log_n = np.log(N)
    x = np.empty((N, D))
    log_beta = np.empty((D, N))
    log_w = np.empty((D, N))
    log_w_pre = np.empty((D, N))
    log_zhat = np.empty(D)
    log_zbar = np.empty(D)
    resampled = []
    w = None
    for d in range(D):
        hist = x[:, :d]
        x[:, d] = proposal.sample_step(d, hist, rng, N)
        with np.errstate(invalid="ignore"):
            beta = target.log_gamma(d, x[:, d], hist) - proposal.log_q_step(d, x[:, d], hist)
        beta = np.where(np.isnan(beta), -np.inf, beta)
        log_beta[d] = beta
        if w is None:
            w = beta
            log_zbar[d] = logsumexp(beta) - log_n
        else:
            lse_prev = logsumexp(w)
            log_zbar[d] = log_zbar[d - 1] + logsumexp(w - lse_prev + beta)
            w = w + beta
        lse_w = logsumexp(w)
        if lse_w == -np.inf:
            raise DegenerateWeightsError("all particle weights are zero", step=d)
        log_zhat[d] = lse_w - log_n
        log_w_pre[d] = w
        if eta > 0 and ess_hat(w, ess_kind) < eta * N:
            idx = multinomial_resample(w, N, rng)
            x = x[idx]
            w = np.full(N, log_zhat[d] if proper_weighting else 0.0)
            resampled.append(d)
        log_w[d] = w
    return ParticleSystem(x, log_beta, log_w, log_w_pre, log_zhat, log_zbar, resampled, proper_weighting)


def run_sis(target, proposal, N, seed=None, rng=None):
    """Sequential importance sampling (no resampling)."""
    return run_sir(target, proposal, N, eta=0.0, seed=seed, rng=rng)
