"""Single-candidate samplers: Metropolis-Hastings, independent MH and two-stage delayed rejection."""

import logging

import numpy as np

from .._util import accept, check_positive_int, initial_state, log1mexp, make_rng
from ..exceptions import ConfigurationError
from ._common import Recorder, proposal_at, single_weight

logger = logging.getLogger(__name__)


def run_mh(target, proposal, T, seed=None, init=None, init_box=None):
    """Metropolis-Hastings with a conditional proposal.

    Per iteration: one candidate draw, then one acceptance uniform.  The log
    acceptance ratio is formed as a difference of importance weights,
    ``[log pi(c) - log q(c|x)] - [log pi(x) - log q(x|c)]``, which is the
    same expression the multiple-try sampler reduces to with one try.

    Returns
    -------
    ChainTrace
        ``target_evals == T``.
    """
    T = check_positive_int("T", T)
    rng = make_rng(seed)
    theta, lp = initial_state(target, rng, init, init_box)
    rec = Recorder(T, target.dim, initial=theta)
    for t in range(T):
        cand = proposal.sample(theta, rng, size=1)[0]
        lpc = float(target.log_pi(cand))
        rec.evals += 1
        if lpc == -np.inf:
            rec.degenerate += 1
        w_fwd = lpc - float(proposal.log_q(cand, theta))
        w_rev = lp - float(proposal.log_q(theta, cand))
        moved = accept(w_fwd - w_rev, rng.random())
        if moved:
            theta, lp = cand, lpc
        rec.put(t, theta, lp, moved)
    return rec.trace()


def run_imh(target, proposal, T, seed=None, init=None, init_box=None, adapt=None):
    """Independent Metropolis-Hastings.

    Accepts with ``min(1, w(c) / w(x))`` for importance weights
    ``w = pi / q``.  With ``adapt`` (an :class:`AdaptState`) the proposal mean
    is refreshed every iteration through ``proposal.with_mean``.
    """
    T = check_positive_int("T", T)
    rng = make_rng(seed)
    theta, lp = initial_state(target, rng, init, init_box, proposal)
    rec = Recorder(T, target.dim, initial=theta)
    w_prev = single_weight(target, proposal, theta, lp)
    for t in range(T):
        q = proposal_at(proposal, adapt, t + 1)
        if adapt is not None:
            w_prev = single_weight(target, q, theta, lp)
        cand = q.sample(rng, size=1)[0]
        lpc = float(target.log_pi(cand))
        rec.evals += 1
        if lpc == -np.inf:
            rec.degenerate += 1
        wc = single_weight(target, q, cand, lpc)
        moved = accept(wc - w_prev, rng.random())
        if moved:
            theta, lp, w_prev = cand, lpc, wc
        rec.put(t, theta, lp, moved)
        if adapt is not None:
            adapt.record(theta, moved)
    return rec.trace()


def _log_alpha1(lp_from, lp_to, q1, frm, to):
    """log of the first-stage acceptance probability for a move ``frm -> to``."""
    r = (lp_to + q1.log_q(frm, to)) - (lp_from + q1.log_q(to, frm))
    if np.isnan(r):
        return -np.inf
    return min(r, 0.0)


def _log_psi(lp_a, a, b, theta1, lp_1, q1, q2):
    """log psi(a, b | theta1) = log[pi(a) q1(theta1|a) q2(b|theta1,a) (1 - alpha1(a, theta1))]."""
    if lp_a == -np.inf:
        return -np.inf
    return (lp_a + float(q1.log_q(theta1, a)) + float(q2.log_q(b, theta1, a))
            + log1mexp(_log_alpha1(lp_a, lp_1, q1, a, theta1)))


def run_drm2(target, q1, q2, T, seed=None, init=None, init_box=None):
    """Delayed-rejection Metropolis with two stages.

    Per iteration: first candidate, first acceptance uniform, and only on
    rejection a second candidate from ``q2.sample(theta1, theta_prev, rng)``
    followed by a second acceptance uniform.  The second-stage ratio is
    evaluated in the log domain; a reverse first-stage probability equal to
    one makes the corresponding ``psi`` zero and the move is rejected.

    Parameters
    ----------
    q1 : ConditionalProposal
    q2 : SecondStageProposal
        Provides ``sample(theta1, theta_prev, rng)`` and
        ``log_q(theta, theta1, theta_current)``.

    Returns
    -------
    ChainTrace
        ``extra["second_stage"]`` counts iterations that reached stage two;
        ``target_evals <= 2 T``.
    """
    T = check_positive_int("T", T)
    if not hasattr(q2, "log_q") or not hasattr(q2, "sample"):
        raise ConfigurationError("q2 must provide sample and log_q")
    rng = make_rng(seed)
    theta, lp = initial_state(target, rng, init, init_box)
    rec = Recorder(T, target.dim, initial=theta)
    second = 0
    for t in range(T):
        c1 = q1.sample(theta, rng, size=1)[0]
        lp1 = float(target.log_pi(c1))
        rec.evals += 1
        la1 = _log_alpha1(lp, lp1, q1, theta, c1)
        if accept(la1, rng.random()):
            theta, lp = c1, lp1
            rec.put(t, theta, lp, True)
            continue
        second += 1
        c2 = np.asarray(q2.sample(c1, theta, rng), dtype=float)
        lp2 = float(target.log_pi(c2))
        rec.evals += 1
        num = _log_psi(lp2, c2, theta, c1, lp1, q1, q2)
        den = _log_psi(lp, theta, c2, c1, lp1, q1, q2)
        moved = accept(num - den, rng.random())
        if moved:
            theta, lp = c2, lp2
        rec.put(t, theta, lp, moved)
    return rec.trace(second_stage=second)
