"""Particle Metropolis-Hastings samplers built on :func:`~mcmc_bench.particles.run_sir`.

Per iteration the random draws are: the particle filter's own draws
(proposals step by step, plus resampling uniforms when triggered), then one
path-selection uniform when N > 1, then one acceptance uniform.
"""

import logging

import numpy as np

from .._util import accept, check_positive_int, initial_state, logsumexp, make_rng, select_index
from ..exceptions import ConfigurationError, DegenerateWeightsError
from ..particles import run_sir
from ._common import Recorder, single_weight

logger = logging.getLogger(__name__)


def _filter(target, proposal, N, eta, proper_weighting, ess_kind, rng):
    try:
        return run_sir(target, proposal, N, eta, proper_weighting, ess_kind, rng=rng)
    except DegenerateWeightsError:
        return None


def _skip(N, rng):
    if N > 1:
        rng.random()
    rng.random()


def run_pmh(target, proposal, T, N, eta=1.0, seed=None, init=None, init_box=None, proper_weighting=True,
            ess_kind="inverse_sum_squares"):
    """Particle Metropolis-Hastings.

    Each iteration runs one particle filter, picks one final path in
    proportion to its weight and accepts it with
    ``min(1, Ztilde* / Ztilde_{t-1})``.  The estimate used is ``log Zhat_D``
    of the filter, which coincides with the product-form estimate under proper
    weighting.  ``Ztilde_0`` comes from one filter run after the initial
    state.  With ``eta = 0`` the trace equals :func:`run_imtm2` fed the same
    factorized proposal and seed.

    A filter whose weights all vanish counts as a degenerate iteration and is
    rejected.
    """
    T = check_positive_int("T", T)
    N = check_positive_int("N", N)
    if eta > 0 and N < 2:
        raise ConfigurationError("resampling needs N >= 2; use eta = 0 for N = 1")
    rng = make_rng(seed)
    theta, lp = initial_state(target, rng, init, init_box, proposal)
    rec = Recorder(T, target.dim, with_log_z=True, initial=theta)
    sys0 = _filter(target, proposal, N, eta, proper_weighting, ess_kind, rng)
    rec.init_evals = N
    log_z = -np.inf if sys0 is None else float(sys0.log_zhat[-1])
    log_z0 = log_z
    for t in range(T):
        sys = _filter(target, proposal, N, eta, proper_weighting, ess_kind, rng)
        rec.evals += N
        if sys is None:
            rec.degenerate += 1
            _skip(N, rng)
            moved = False
        else:
            j = select_index(sys.final_log_weights, rng.random()) if N > 1 else 0
            log_z_star = float(sys.log_zhat[-1])
            moved = accept(log_z_star - log_z, rng.random())
            if moved:
                theta, log_z = sys.paths[j], log_z_star
                lp = float(target.log_pi(theta))
        rec.put(t, theta, lp, moved, log_z)
    return rec.trace(log_z0=log_z0)


def run_var_pmh(target, proposal, T, N, eta=1.0, seed=None, init=None, init_box=None, proper_weighting=True,
                ess_kind="inverse_sum_squares"):
    """PMH candidate generation with the I-MTM acceptance rule.

    The selected path's final weight is swapped for that of the current path
    in the denominator sum.  The initial path carries its plain importance
    weight ``log pi - log q``; an accepted path carries its final filter
    weight.
    """
    T = check_positive_int("T", T)
    N = check_positive_int("N", N)
    if eta > 0 and N < 2:
        raise ConfigurationError("resampling needs N >= 2; use eta = 0 for N = 1")
    rng = make_rng(seed)
    theta, lp = initial_state(target, rng, init, init_box, proposal)
    w_prev = single_weight(target, proposal, theta, lp)
    rec = Recorder(T, target.dim, initial=theta)
    for t in range(T):
        sys = _filter(target, proposal, N, eta, proper_weighting, ess_kind, rng)
        rec.evals += N
        if sys is None:
            rec.degenerate += 1
            _skip(N, rng)
            moved = False
        else:
            w = sys.final_log_weights
            j = select_index(w, rng.random()) if N > 1 else 0
            log_alpha = logsumexp(w) - logsumexp(np.append(np.delete(w, j), w_prev))
            moved = accept(log_alpha, rng.random())
            if moved:
                theta, w_prev = sys.paths[j], float(w[j])
                lp = float(target.log_pi(theta))
        rec.put(t, theta, lp, moved)
    return rec.trace()


def run_pmmh(target_fn, proposal, log_prior, lambda_proposal, lambda0, T, N, eta=1.0, seed=None,
             proper_weighting=True, ess_kind="inverse_sum_squares"):
    """Particle marginal Metropolis-Hastings over a path ``x`` and parameter ``lambda``.

    Parameters
    ----------
    target_fn : callable
        ``lambda -> FactorizedTarget`` for the joint ``pi(x, y | lambda)``.
    proposal : FactorizedProposal or callable
        Path proposal, or ``lambda -> FactorizedProposal``.
    log_prior : callable
        ``lambda -> log g(lambda)``; ``-inf`` outside the prior support.
    lambda_proposal : ConditionalProposal
        ``q_lambda``; an independent proposal should be wrapped with
        :func:`~mcmc_bench.proposals.as_conditional`.
    lambda0 : array_like
        Initial parameter value; must have positive prior density.

    Notes
    -----
    Draw order per iteration: the parameter candidate, then (only if its prior
    density is positive) the filter draws, the path-selection uniform and the
    acceptance uniform.  A candidate outside the prior support is rejected
    without running the filter and without further draws.  The initial path is
    selected from one filter run at ``lambda0``.

    Returns
    -------
    ChainTrace
        States are ``[x_1..x_D, lambda_1..lambda_K]``.
    """
    T = check_positive_int("T", T)
    N = check_positive_int("N", N)
    rng = make_rng(seed)
    prop_fn = proposal if callable(proposal) and not hasattr(proposal, "sample_step") else (lambda lam: proposal)
    lam = np.atleast_1d(np.asarray(lambda0, dtype=float))
    lg = float(log_prior(lam))
    if not np.isfinite(lg):
        raise ConfigurationError("lambda0 has zero prior density")
    tgt = target_fn(lam)
    sys = run_sir(tgt, prop_fn(lam), N, eta, proper_weighting, ess_kind, rng=rng)
    j = select_index(sys.final_log_weights, rng.random()) if N > 1 else 0
    x, log_z = sys.paths[j], float(sys.log_zhat[-1])
    lp = float(tgt.log_pi(x))
    D = len(x)
    rec = Recorder(T, D + len(lam), with_log_z=True, initial=np.concatenate([x, lam]))
    rec.init_evals = N
    prior_rejections = 0
    for t in range(T):
        lam_star = np.atleast_1d(np.asarray(lambda_proposal.sample(lam, rng), dtype=float))
        lg_star = float(log_prior(lam_star))
        moved = False
        if lg_star == -np.inf:
            prior_rejections += 1
        else:
            tgt_star = target_fn(lam_star)
            sys = _filter(tgt_star, prop_fn(lam_star), N, eta, proper_weighting, ess_kind, rng)
            rec.evals += N
            if sys is None:
                rec.degenerate += 1
                _skip(N, rng)
            else:
                j = select_index(sys.final_log_weights, rng.random()) if N > 1 else 0
                log_z_star = float(sys.log_zhat[-1])
                log_alpha = ((log_z_star + lg_star + float(lambda_proposal.log_q(lam, lam_star)))
                             - (log_z + lg + float(lambda_proposal.log_q(lam_star, lam))))
                moved = accept(log_alpha, rng.random())
                if moved:
                    x, lam, log_z, lg = sys.paths[j], lam_star, log_z_star, lg_star
                    lp = float(tgt_star.log_pi(x))
        rec.put(t, np.concatenate([x, lam]), lp, moved, log_z)
    return rec.trace(prior_rejections=prior_rejections, path_dim=D)
