"""Group Metropolis sampling."""

import logging

import numpy as np

from .._util import accept, check_positive_int, logsumexp, make_rng
from ._common import independent_weights, proposal_at
from .trace import GmsRun, WeightedSet

logger = logging.getLogger(__name__)


def run_gms(target, proposal, T, N, seed=None, adapt=None):
    """Chain of weighted candidate sets.

    The initial set S_0 and ``Zhat_0`` come from one batch of N proposal
    draws (``init_evals``).  Each iteration draws N candidates and, with one
    acceptance uniform, replaces the current set by the new one with
    probability ``min(1, Zhat* / Zhat_{t-1})``.  No resampling is performed;
    a rejected iteration repeats the previous set exactly.

    With ``adapt`` the recorded output of each iteration is the weighted mean
    of the current set.
    """
    T = check_positive_int("T", T)
    N = check_positive_int("N", N)
    rng = make_rng(seed)
    log_n = np.log(N)
    q0 = proposal_at(proposal, adapt, 0)
    x0 = q0.sample(rng, size=N)
    w0, _ = independent_weights(target, q0, x0)
    set0 = WeightedSet(x0, w0)
    log_z = logsumexp(w0) - log_n
    log_z0 = log_z
    thetas = np.empty((T, N, target.dim))
    log_rho = np.empty((T, N))
    log_zs = np.empty(T)
    accepted = np.zeros(T, dtype=bool)
    cur_x, cur_w = x0, w0
    evals = 0
    degenerate = 0
    for t in range(T):
        q = proposal_at(proposal, adapt, t + 1)
        cands = q.sample(rng, size=N)
        w, _ = independent_weights(target, q, cands)
        evals += N
        log_z_star = logsumexp(w) - log_n
        if log_z_star == -np.inf:
            degenerate += 1
        moved = accept(log_z_star - log_z, rng.random())
        if moved:
            cur_x, cur_w, log_z = cands, w, log_z_star
        thetas[t] = cur_x
        log_rho[t] = cur_w
        log_zs[t] = log_z
        accepted[t] = moved
        if adapt is not None:
            adapt.record(WeightedSet(cur_x, cur_w).mean(), moved)
    return GmsRun(thetas, log_rho, log_zs, accepted, set0, log_z0, evals, N, degenerate)
