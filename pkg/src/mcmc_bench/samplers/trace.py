"""Result containers shared by every sampler."""

import csv
import enum
import json
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import ConfigurationError


class WeightFunctionKind(str, enum.Enum):
    """Choice of the MTM weight ``w(theta | theta_prev)``.

    ``IMPORTANCE`` is ``pi(theta) / q(theta | theta_prev)``, ``PI_TIMES_Q`` is
    ``pi(theta) q(theta_prev | theta)`` and ``TARGET_ONLY`` is ``pi(theta)``,
    which is valid only with a symmetric proposal.
    """

    IMPORTANCE = "importance"
    PI_TIMES_Q = "pi_times_q"
    TARGET_ONLY = "target_only"

    @classmethod
    def parse(cls, value):
        try:
            return cls(value)
        except ValueError:
            raise ConfigurationError(f"unknown weight kind {value!r}") from None


@dataclass
class ChainTrace:
    """States of one chain with per-iteration flags and evaluation counters.

    Attributes
    ----------
    states : ndarray, shape (T, D)
    accepted : ndarray of bool, shape (T,)
    log_pi : ndarray, shape (T,)
        Log target at each state.
    target_evals : int
        Target evaluations made inside the T iterations (E).
    samples_in_estimator : int
        Number of samples entering the final estimator (Q).
    init_evals : int
        Evaluations spent before the first iteration (initial state and any
        initial batch).
    degenerate : int
        Iterations where every candidate weight was zero.
    log_z : ndarray, optional
        Running marginal-likelihood estimate, for samplers that carry one.
    initial_state : ndarray, optional
    extra : dict
    """

    states: np.ndarray
    accepted: np.ndarray
    log_pi: np.ndarray
    target_evals: int
    samples_in_estimator: int
    init_evals: int = 0
    degenerate: int = 0
    log_z: np.ndarray = None
    initial_state: np.ndarray = None
    extra: dict = field(default_factory=dict)

    @property
    def T(self):
        return self.states.shape[0]

    @property
    def dim(self):
        return self.states.shape[1]

    @property
    def acceptance_rate(self):
        return float(np.mean(self.accepted))

    def mean(self, f=None, burn_in=0.0):
        """Arithmetic mean of ``f`` over the states, optionally after a burn-in fraction."""
        start = int(np.floor(burn_in * self.T))
        x = self.states[start:]
        vals = x if f is None else np.array([np.atleast_1d(f(s)) for s in x])
        return vals.mean(axis=0)

    def summary(self):
        return {"T": self.T, "D": self.dim, "E": int(self.target_evals), "Q": int(self.samples_in_estimator),
                "init_evals": int(self.init_evals), "degenerate": int(self.degenerate),
                "acceptance_rate": self.acceptance_rate}

    def to_json(self):
        return json.dumps(self.summary(), sort_keys=True)

    def to_csv(self, path):
        """One row per iteration: t, theta_1..theta_D, accepted, log_pi."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t"] + [f"theta_{i + 1}" for i in range(self.dim)] + ["accepted", "log_pi"])
            for t in range(self.T):
                writer.writerow([t + 1] + [repr(float(v)) for v in self.states[t]]
                                + [int(self.accepted[t]), repr(float(self.log_pi[t]))])


@dataclass
class WeightedSet:
    """One weighted candidate set ``{(theta_n, rho_n)}`` with log weights."""

    thetas: np.ndarray
    log_rho: np.ndarray

    def normalized(self):
        w = np.exp(self.log_rho - self.log_rho.max())
        return w / w.sum()

    def mean(self):
        return self.normalized() @ self.thetas


@dataclass
class GmsRun:
    """Sequence of weighted sets produced by group Metropolis sampling.

    Attributes
    ----------
    thetas : ndarray, shape (T, N, D)
    log_rho : ndarray, shape (T, N)
    log_z : ndarray, shape (T,)
    accepted : ndarray of bool, shape (T,)
    initial_set : WeightedSet
        The set S_0 used to initialize the marginal-likelihood estimate.
    log_z0 : float
    """

    thetas: np.ndarray
    log_rho: np.ndarray
    log_z: np.ndarray
    accepted: np.ndarray
    initial_set: WeightedSet
    log_z0: float
    target_evals: int
    init_evals: int
    degenerate: int = 0

    @property
    def T(self):
        return self.thetas.shape[0]

    @property
    def N(self):
        return self.thetas.shape[1]

    @property
    def dim(self):
        return self.thetas.shape[2]

    @property
    def samples_in_estimator(self):
        return self.N * self.T

    @property
    def acceptance_rate(self):
        return float(np.mean(self.accepted))

    def weighted_set(self, t):
        """Set S_t for ``t`` in 1..T; ``t = 0`` gives the initial set."""
        if t == 0:
            return self.initial_set
        return WeightedSet(self.thetas[t - 1], self.log_rho[t - 1])

    def summary(self):
        return {"T": self.T, "N": self.N, "D": self.dim, "E": int(self.target_evals),
                "Q": int(self.samples_in_estimator), "init_evals": int(self.init_evals),
                "degenerate": int(self.degenerate), "acceptance_rate": self.acceptance_rate}
