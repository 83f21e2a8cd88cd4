"""Ensemble MCMC: the next state is resampled from the N tries plus the current state.

Per iteration the random draws are the N tries and then one selection
uniform; there is no separate acceptance test.  An iteration counts as
accepted when a try (not the current state) is selected.
"""

import logging

import numpy as np

from .._util import check_positive_int, initial_state, make_rng, select_index
from ._common import Recorder, independent_weights, proposal_at, single_weight

logger = logging.getLogger(__name__)


def enmcmc_log_masses(points, log_pi, proposal):
    """Unnormalized log selection masses over an ensemble of points.

    ``mass_j = log pi(x_j) + sum_{l != j} log q(x_l | x_j)``: each point is
    scored as if it were the state that generated all the others.
    """
    K = len(points)
    lq = np.empty((K, K))
    for j in range(K):
        lq[j] = proposal.log_q(points, np.broadcast_to(points[j], points.shape))
    np.fill_diagonal(lq, 0.0)
    with np.errstate(invalid="ignore"):
        m = log_pi + lq.sum(axis=1)
    return np.where(np.isnan(m), -np.inf, m)


def run_enmcmc(target, proposal, T, N, seed=None, init=None, init_box=None):
    """Generic ensemble MCMC with a conditional proposal.

    The N tries are drawn independently from ``q(. | x_{t-1})`` and the current
    state is appended as point N + 1.  The selection step costs
    ``(N + 1)^2`` proposal evaluations but only N target evaluations.
    """
    T = check_positive_int("T", T)
    N = check_positive_int("N", N)
    rng = make_rng(seed)
    theta, lp = initial_state(target, rng, init, init_box)
    rec = Recorder(T, target.dim, initial=theta)
    for t in range(T):
        cands = proposal.sample(theta, rng, size=N)
        lpc = np.atleast_1d(target.log_pi(cands))
        rec.evals += N
        if not np.any(lpc > -np.inf):
            rec.degenerate += 1
        points = np.vstack([cands, theta[None]])
        masses = enmcmc_log_masses(points, np.append(lpc, lp), proposal)
        j = select_index(masses, rng.random())
        moved = j < N
        if moved:
            theta, lp = cands[j], float(lpc[j])
        rec.put(t, theta, lp, moved)
    return rec.trace()


def run_ienmcmc(target, proposal, T, N, seed=None, init=None, init_box=None, adapt=None):
    """Ensemble MCMC with an independent proposal.

    Selects among the N tries and the current state with probabilities
    proportional to their importance weights; with N = 1 this is Barker's
    acceptance rule.
    """
    T = check_positive_int("T", T)
    N = check_positive_int("N", N)
    rng = make_rng(seed)
    theta, lp = initial_state(target, rng, init, init_box, proposal)
    rec = Recorder(T, target.dim, initial=theta)
    w_prev = single_weight(target, proposal, theta, lp)
    for t in range(T):
        q = proposal_at(proposal, adapt, t + 1)
        if adapt is not None:
            w_prev = single_weight(target, q, theta, lp)
        cands = q.sample(rng, size=N)
        w, lpc = independent_weights(target, q, cands)
        rec.evals += N
        if not np.any(w > -np.inf):
            rec.degenerate += 1
        j = select_index(np.append(w, w_prev), rng.random())
        moved = j < N
        if moved:
            theta, lp, w_prev = cands[j], float(lpc[j]), float(w[j])
        rec.put(t, theta, lp, moved)
        if adapt is not None:
            adapt.record(theta, moved)
    return rec.trace()
