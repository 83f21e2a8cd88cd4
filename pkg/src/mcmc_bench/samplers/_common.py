import numpy as np

from ..particles import sequential_log_weights
from ..proposals import FactorizedProposal
from ..targets import FactorizedTarget
from .trace import ChainTrace


def is_sequential_pair(target, proposal):
    return isinstance(target, FactorizedTarget) and isinstance(proposal, FactorizedProposal)


def independent_weights(target, proposal, cands):
    """Log importance weights ``log pi - log q`` and ``log pi`` of a batch of candidates.

    A factorized target with a factorized proposal accumulates the weights
    step by step, in the order the particle filter uses.
    """
    if is_sequential_pair(target, proposal):
        w, lp = sequential_log_weights(target, proposal, cands, return_log_pi=True)
    else:
        lp = np.atleast_1d(target.log_pi(cands))
        with np.errstate(invalid="ignore"):
            w = lp - np.atleast_1d(proposal.log_q(cands))
    return np.where(np.isnan(w), -np.inf, w), lp


def single_weight(target, proposal, theta, log_pi):
    """Importance weight of one state whose log target is already known."""
    if is_sequential_pair(target, proposal):
        return float(sequential_log_weights(target, proposal, theta[None])[0])
    w = log_pi - float(proposal.log_q(theta))
    return -np.inf if np.isnan(w) else w


def proposal_at(proposal, adapt, t):
    """Proposal in force at iteration ``t``; recentred when adapting."""
    if adapt is None:
        return proposal
    return proposal.with_mean(adapt.mean(t))


class Recorder:
    """Preallocated per-iteration storage turned into a :class:`ChainTrace`."""

    def __init__(self, T, dim, with_log_z=False, initial=None):
        self.initial = None if initial is None else np.array(initial, dtype=float)
        self.states = np.empty((T, dim))
        self.accepted = np.zeros(T, dtype=bool)
        self.log_pi = np.empty(T)
        self.log_z = np.empty(T) if with_log_z else None
        self.evals = 0
        self.init_evals = 0
        self.degenerate = 0

    def put(self, t, theta, log_pi, accepted, log_z=None):
        self.states[t] = theta
        self.log_pi[t] = log_pi
        self.accepted[t] = accepted
        if self.log_z is not None:
            self.log_z[t] = log_z

    def trace(self, q=None, **extra):
        T = len(self.accepted)
        return ChainTrace(self.states, self.accepted, self.log_pi, self.evals, T if q is None else q,
                          self.init_evals, self.degenerate, self.log_z, self.initial, extra)
