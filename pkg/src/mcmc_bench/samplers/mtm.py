"""Multiple-try Metropolis samplers.

Random draws per iteration follow the shared order: the N candidates, then
one selection uniform when N > 1, then (MTM only) the N - 1 auxiliary
points, then one acceptance uniform.  When every candidate weight is zero the
selection and acceptance uniforms are still drawn, auxiliary points are not,
and the move is rejected.
"""

import logging

import numpy as np

from .._util import accept, check_positive_int, initial_state, logsumexp, make_rng, select_index
from ..exceptions import ConfigurationError
from ._common import Recorder, independent_weights, proposal_at, single_weight
from .trace import WeightFunctionKind

logger = logging.getLogger(__name__)


def check_weight_kind(kind, proposal):
    kind = WeightFunctionKind.parse(kind)
    if kind is WeightFunctionKind.TARGET_ONLY and not getattr(proposal, "symmetric", False):
        raise ConfigurationError("target_only weights need a symmetric proposal")
    return kind


def mtm_weight(theta, theta_prev, kind, target, proposal, log_pi=None):
    """Log MTM weight ``log w(theta | theta_prev)``.

    ``theta`` may be a batch ``(n, D)``; ``log_pi`` skips re-evaluating the
    target when the caller already has it.

    * importance: ``log pi(theta) - log q(theta | theta_prev)``
    * pi_times_q: ``log pi(theta) + log q(theta_prev | theta)``
    * target_only: ``log pi(theta)``
    """
    kind = check_weight_kind(kind, proposal)
    lp = target.log_pi(theta) if log_pi is None else log_pi
    with np.errstate(invalid="ignore"):
        if kind is WeightFunctionKind.IMPORTANCE:
            w = lp - proposal.log_q(theta, theta_prev)
        elif kind is WeightFunctionKind.PI_TIMES_Q:
            theta = np.asarray(theta, dtype=float)
            w = lp + proposal.log_q(np.broadcast_to(theta_prev, theta.shape), theta)
        else:
            w = lp
    w = np.where(np.isnan(w), -np.inf, w)
    return float(w) if np.ndim(w) == 0 else w


def run_mtm(target, proposal, T, N, kind="importance", seed=None, init=None, init_box=None):
    """Multiple-try Metropolis with a conditional proposal.

    Draws N tries from ``q(. | x)``, selects one proportionally to its weight,
    draws N - 1 auxiliary points from ``q(. | selected)`` and accepts with the
    ratio of weight sums, the reference set being the auxiliary points plus
    the current state.  ``kind="target_only"`` with a symmetric proposal is
    orientational-bias Monte Carlo.

    Returns
    -------
    ChainTrace
        ``target_evals == (2N - 1) T`` in the absence of degenerate iterations.
    """
    T = check_positive_int("T", T)
    N = check_positive_int("N", N)
    kind = check_weight_kind(kind, proposal)
    rng = make_rng(seed)
    theta, lp = initial_state(target, rng, init, init_box)
    rec = Recorder(T, target.dim, initial=theta)
    for t in range(T):
        cands = proposal.sample(theta, rng, size=N)
        lpc = np.atleast_1d(target.log_pi(cands))
        rec.evals += N
        w = mtm_weight(cands, theta, kind, target, proposal, lpc)
        if not np.any(w > -np.inf):
            rec.degenerate += 1
            if N > 1:
                rng.random()
            rng.random()
            rec.put(t, theta, lp, False)
            continue
        j = select_index(w, rng.random()) if N > 1 else 0
        sel = cands[j]
        if N > 1:
            aux = proposal.sample(sel, rng, size=N - 1)
            lpa = np.atleast_1d(target.log_pi(aux))
            rec.evals += N - 1
            w_aux = np.atleast_1d(mtm_weight(aux, sel, kind, target, proposal, lpa))
        else:
            w_aux = np.empty(0)
        w_prev = mtm_weight(theta, sel, kind, target, proposal, lp)
        log_alpha = logsumexp(w) - logsumexp(np.append(w_aux, w_prev))
        moved = accept(log_alpha, rng.random())
        if moved:
            theta, lp = sel, float(lpc[j])
        rec.put(t, theta, lp, moved)
    return rec.trace()


def _imtm_log_alpha(w, j, w_prev):
    return logsumexp(w) - logsumexp(np.append(np.delete(w, j), w_prev))


def run_imtm(target, proposal, T, N, seed=None, init=None, init_box=None, adapt=None):
    """Independent multiple-try Metropolis.

    Accepts the selected try with ``min(1, Zhat_1 / Zhat_2)`` where ``Zhat_1``
    averages the N candidate weights and ``Zhat_2`` swaps the selected weight
    for that of the current state.  With N = 1 this is exactly
    :func:`run_imh` under the same seed.
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
            if N > 1:
                rng.random()
            rng.random()
            moved = False
        else:
            j = select_index(w, rng.random()) if N > 1 else 0
            moved = accept(_imtm_log_alpha(w, j, w_prev), rng.random())
            if moved:
                theta, lp, w_prev = cands[j], float(lpc[j]), float(w[j])
        rec.put(t, theta, lp, moved)
        if adapt is not None:
            adapt.record(theta, moved)
    return rec.trace()


def run_imtm2(target, proposal, T, N, seed=None, init=None, init_box=None, adapt=None):
    """I-MTM variant accepting with ``min(1, Zhat* / Zhat_{t-1})``.

    ``Zhat_{t-1}`` is the running marginal-likelihood estimate; it changes
    only on acceptance.  ``Zhat_0`` comes from one batch of N proposal draws
    made after the initial state, recorded in ``init_evals``.

    Returns
    -------
    ChainTrace
        ``log_z`` holds the running estimate after each iteration.
    """
    T = check_positive_int("T", T)
    N = check_positive_int("N", N)
    rng = make_rng(seed)
    theta, lp = initial_state(target, rng, init, init_box, proposal)
    log_n = np.log(N)
    rec = Recorder(T, target.dim, with_log_z=True, initial=theta)
    q0 = proposal_at(proposal, adapt, 0)
    w0, _ = independent_weights(target, q0, q0.sample(rng, size=N))
    rec.init_evals = N
    log_z = logsumexp(w0) - log_n
    log_z0 = log_z
    for t in range(T):
        q = proposal_at(proposal, adapt, t + 1)
        cands = q.sample(rng, size=N)
        w, lpc = independent_weights(target, q, cands)
        rec.evals += N
        log_z_star = logsumexp(w) - log_n
        if log_z_star == -np.inf:
            rec.degenerate += 1
            if N > 1:
                rng.random()
            rng.random()
            moved = False
        else:
            j = select_index(w, rng.random()) if N > 1 else 0
            moved = accept(log_z_star - log_z, rng.random())
            if moved:
                theta, lp, log_z = cands[j], float(lpc[j]), log_z_star
        rec.put(t, theta, lp, moved, log_z)
        if adapt is not None:
            adapt.record(theta, moved)
    return rec.trace(log_z0=log_z0)


def run_parallel_imtm_shared(target, proposal, T, N, C, seed=None, init=None, init_box=None):
    """C dependent I-MTM chains that share one candidate batch per iteration.

    Each iteration evaluates the target N times in total.  Chains are
    initialized one after the other; per iteration every chain draws its
    selection uniform (N > 1) and acceptance uniform in chain order.  With
    C = 1 the output equals :func:`run_imtm` under the same seed.

    Parameters
    ----------
    init : array_like, optional
        Shape ``(C, D)``.

    Returns
    -------
    list of ChainTrace
        Each trace reports the shared ``target_evals == N T``.
    """
    T = check_positive_int("T", T)
    N = check_positive_int("N", N)
    C = check_positive_int("C", C)
    rng = make_rng(seed)
    starts = [initial_state(target, rng, None if init is None else np.asarray(init)[c], init_box, proposal)
              for c in range(C)]
    thetas = [s[0] for s in starts]
    lps = [s[1] for s in starts]
    w_prevs = [single_weight(target, proposal, th, l) for th, l in starts]
    recs = [Recorder(T, target.dim, initial=thetas[c]) for c in range(C)]
    evals = 0
    for t in range(T):
        cands = proposal.sample(rng, size=N)
        w, lpc = independent_weights(target, proposal, cands)
        evals += N
        degenerate = not np.any(w > -np.inf)
        lse_w = logsumexp(w)
        for c in range(C):
            if degenerate:
                recs[c].degenerate += 1
                if N > 1:
                    rng.random()
                rng.random()
                moved = False
            else:
                j = select_index(w, rng.random()) if N > 1 else 0
                log_alpha = lse_w - logsumexp(np.append(np.delete(w, j), w_prevs[c]))
                moved = accept(log_alpha, rng.random())
                if moved:
                    thetas[c], lps[c], w_prevs[c] = cands[j], float(lpc[j]), float(w[j])
            recs[c].put(t, thetas[c], lps[c], moved)
    traces = []
    for rec in recs:
        rec.evals = evals
        traces.append(rec.trace(shared_evals=True))
    return traces
