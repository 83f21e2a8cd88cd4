"""Proposal densities and mean adaptation.

Two calling conventions are used.  An independent proposal ignores the
current state::

    proposal.sample(rng, size=None)        # (D,) or (size, D)
    proposal.log_q(theta)                  # float or (n,)

A conditional proposal takes it::

    proposal.sample(theta_prev, rng, size=None)
    proposal.log_q(theta, theta_prev)      # broadcasts over leading axes

:func:`as_conditional` lifts an independent proposal to the second form.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError
from .targets import LOG_2PI

FD_STEP = 1e-5


def _check_sigma(sigma):
    sigma = float(sigma)
    if not sigma > 0.0:
        raise ConfigurationError(f"sigma must be positive, got {sigma!r}")
    return sigma


def _isotropic_logpdf(x, mean, sigma):
    x = np.asarray(x, dtype=float)
    dim = x.shape[-1]
    sq = np.sum((x - mean) ** 2, axis=-1)
    out = -0.5 * dim * (LOG_2PI + 2.0 * np.log(sigma)) - 0.5 * sq / sigma ** 2
    return float(out) if np.ndim(out) == 0 else out


class IndependentProposal:
    """Base class; subclasses define ``sample(rng, size)`` and ``log_q(theta)``."""

    independent = True
    symmetric = False
    dim = None

    def sample(self, rng, size=None):
        raise NotImplementedError

    def log_q(self, theta):
        raise NotImplementedError


class ConditionalProposal:
    """Base class; subclasses define ``sample(theta_prev, rng, size)`` and ``log_q(theta, theta_prev)``."""

    independent = False
    symmetric = False

    def sample(self, theta_prev, rng, size=None):
        raise NotImplementedError

    def log_q(self, theta, theta_prev):
        raise NotImplementedError


class GaussianIndependent(IndependentProposal):
    """Isotropic normal N(mu, sigma^2 I)."""

    def __init__(self, mu, sigma):
        self.mu = np.atleast_1d(np.asarray(mu, dtype=float))
        self.sigma = _check_sigma(sigma)
        self.dim = len(self.mu)

    def sample(self, rng, size=None):
        shape = (self.dim,) if size is None else (size, self.dim)
        return self.mu + self.sigma * rng.standard_normal(shape)

    def log_q(self, theta):
        return _isotropic_logpdf(theta, self.mu, self.sigma)

    def with_mean(self, mu):
        return GaussianIndependent(mu, self.sigma)


def gaussian_independent(mu, sigma):
    return GaussianIndependent(mu, sigma)


class GaussianRandomWalk(ConditionalProposal):
    """N(theta_prev, sigma^2 I); symmetric in its two arguments."""

    symmetric = True

    def __init__(self, sigma):
        self.sigma = _check_sigma(sigma)

    def sample(self, theta_prev, rng, size=None):
        theta_prev = np.asarray(theta_prev, dtype=float)
        shape = theta_prev.shape if size is None else (size,) + theta_prev.shape
        return theta_prev + self.sigma * rng.standard_normal(shape)

    def log_q(self, theta, theta_prev):
        return _isotropic_logpdf(theta, theta_prev, self.sigma)


def gaussian_random_walk(sigma):
    return GaussianRandomWalk(sigma)


class _IndependentAsConditional(ConditionalProposal):
    def __init__(self, base):
        self.base = base
        self.dim = base.dim

    def sample(self, theta_prev, rng, size=None):
        return self.base.sample(rng, size)

    def log_q(self, theta, theta_prev):
        return self.base.log_q(theta)


def as_conditional(proposal):
    """View an independent proposal through the conditional interface."""
    if not getattr(proposal, "independent", False):
        return proposal
    return _IndependentAsConditional(proposal)


def finite_difference_grad(log_pi, theta, h=FD_STEP):
    """Central-difference gradient of a scalar log density."""
    theta = np.asarray(theta, dtype=float)
    steps = h * np.eye(len(theta))
    return (log_pi(theta + steps) - log_pi(theta - steps)) / (2.0 * h)


class MALAProposal(ConditionalProposal):
    """Langevin proposal N(theta_prev + beta grad log pi(theta_prev), sigma^2 I).

    Uses the target's analytic gradient when it has one and central finite
    differences otherwise.  A non-finite gradient falls back to zero drift;
    ``self.fallbacks`` counts those events.
    """

    def __init__(self, target, sigma, beta=None):
        self.target = target
        self.sigma = _check_sigma(sigma)
        self.beta = 0.5 * self.sigma ** 2 if beta is None else float(beta)
        self.fallbacks = 0

    def gradient(self, theta):
        if self.target.has_gradient:
            g = self.target.grad_log_pi(theta)
        else:
            g = finite_difference_grad(self.target.log_pi, theta)
        if not np.all(np.isfinite(g)):
            self.fallbacks += 1
            return np.zeros_like(theta)
        return g

    def drift_mean(self, theta_prev):
        theta_prev = np.asarray(theta_prev, dtype=float)
        return theta_prev + self.beta * self.gradient(theta_prev)

    def sample(self, theta_prev, rng, size=None):
        mean = self.drift_mean(theta_prev)
        shape = mean.shape if size is None else (size,) + mean.shape
        return mean + self.sigma * rng.standard_normal(shape)

    def log_q(self, theta, theta_prev):
        theta = np.asarray(theta, dtype=float)
        theta_prev = np.asarray(theta_prev, dtype=float)
        if theta_prev.ndim == 1:
            return _isotropic_logpdf(theta, self.drift_mean(theta_prev), self.sigma)
        theta, theta_prev = np.broadcast_arrays(theta, theta_prev)
        means = np.array([self.drift_mean(p) for p in theta_prev])
        return _isotropic_logpdf(theta, means, self.sigma)


def mala_proposal(target, sigma, beta=None):
    return MALAProposal(target, sigma, beta)


class FactorizedProposal(IndependentProposal):
    """Sequential proposal ``q_1(x_1) prod_d q_d(x_d | x_{1:d-1})``.

    Subclasses implement :meth:`sample_step` and :meth:`log_q_step`; steps are
    indexed from 0.  Joint sampling draws step by step across all requested
    paths, the same draw order used by the particle filter.
    """

    def sample_step(self, d, history, rng, n):
        raise NotImplementedError

    def log_q_step(self, d, x, history):
        raise NotImplementedError

    def sample(self, rng, size=None):
        n = 1 if size is None else size
        x = np.empty((n, self.dim))
        for d in range(self.dim):
            x[:, d] = self.sample_step(d, x[:, :d], rng, n)
        return x[0] if size is None else x

    def log_q(self, theta):
        theta = np.asarray(theta, dtype=float)
        batch = theta.reshape(-1, self.dim)
        total = self.log_q_step(0, batch[:, 0], batch[:, :0])
        for d in range(1, self.dim):
            total = total + self.log_q_step(d, batch[:, d], batch[:, :d])
        return float(total[0]) if theta.ndim == 1 else total


class GaussianChainProposal(FactorizedProposal):
    """q_1 = N(mu_1, var_1) and q_d = N(x_{d-1}, sigma_p^2)."""

    def __init__(self, dim, mu1=-2.0, var1=4.0, sigma_p=1.0):
        self.dim = int(dim)
        self.mu1 = float(mu1)
        self.sd1 = np.sqrt(float(var1))
        self.sigma_p = _check_sigma(sigma_p)

    def _loc_scale(self, d, history):
        if d == 0:
            return self.mu1, self.sd1
        return history[:, d - 1], self.sigma_p

    def sample_step(self, d, history, rng, n):
        loc, scale = self._loc_scale(d, history)
        return loc + scale * rng.standard_normal(n)

    def log_q_step(self, d, x, history):
        loc, scale = self._loc_scale(d, history)
        return -0.5 * LOG_2PI - np.log(scale) - 0.5 * ((x - loc) / scale) ** 2


# ---------------------------------------------------------------------------
# Discrete proposals used by the kernel checks and frequency tests.  States
# are integers 0..K-1 stored as length-1 float vectors.


def _state_index(theta):
    return np.asarray(theta, dtype=float)[..., 0].astype(int)


def _draw_categorical(cdf, rng, size):
    u = rng.random(1 if size is None else size)
    idx = np.minimum(np.searchsorted(cdf, u * cdf[-1], side="right"), len(cdf) - 1)
    out = idx.astype(float)[:, None]
    return out[0] if size is None else out


class DiscreteIndependent(IndependentProposal):
    """Independent categorical proposal over the states 0..K-1."""

    def __init__(self, probs):
        probs = np.asarray(probs, dtype=float)
        if np.any(probs < 0) or not np.isclose(probs.sum(), 1.0):
            raise ConfigurationError("probs must be a probability vector")
        self.probs = probs
        self.dim = 1
        self._cdf = np.cumsum(probs)
        with np.errstate(divide="ignore"):
            self._log = np.log(probs)

    def sample(self, rng, size=None):
        return _draw_categorical(self._cdf, rng, size)

    def log_q(self, theta):
        out = self._log[_state_index(theta)]
        return float(out) if np.ndim(out) == 0 else out


class DiscreteConditional(ConditionalProposal):
    """Conditional categorical proposal with row-stochastic matrix ``M[prev, next]``."""

    def __init__(self, matrix):
        matrix = np.asarray(matrix, dtype=float)
        if np.any(matrix < 0) or not np.allclose(matrix.sum(axis=1), 1.0):
            raise ConfigurationError("matrix must be row-stochastic")
        self.matrix = matrix
        self.dim = 1
        self.symmetric = bool(np.array_equal(matrix, matrix.T))
        self._cdf = np.cumsum(matrix, axis=1)
        with np.errstate(divide="ignore"):
            self._log = np.log(matrix)

    def sample(self, theta_prev, rng, size=None):
        return _draw_categorical(self._cdf[_state_index(theta_prev)], rng, size)

    def log_q(self, theta, theta_prev):
        out = self._log[_state_index(theta_prev), _state_index(theta)]
        return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Second-stage proposals for two-stage delayed rejection


class SecondStageProposal:
    """Second-stage proposal ``q2(theta | theta1, theta_prev)`` for delayed rejection.

    Parameters
    ----------
    base : ConditionalProposal
        Gaussian random walk of the first stage.
    mode : {"shrink", "independent"}
        ``"shrink"`` centres at ``theta_prev`` with scale ``factor * sigma``;
        ``"independent"`` ignores ``theta1`` and reuses ``base`` unchanged.
    factor : float
        Scale multiplier for ``"shrink"``.
    """

    def __init__(self, base, mode="shrink", factor=0.5):
        if mode not in ("shrink", "independent"):
            raise ConfigurationError(f"unknown second-stage mode {mode!r}")
        if mode == "shrink":
            if not isinstance(base, GaussianRandomWalk):
                raise ConfigurationError("shrink mode needs a Gaussian random-walk base")
            base = GaussianRandomWalk(factor * base.sigma)
        self.inner = base
        self.mode = mode

    def sample(self, theta1, theta_prev, rng):
        return self.inner.sample(theta_prev, rng)

    def log_q(self, theta, theta1, theta_current):
        return self.inner.log_q(theta, theta_current)


# ---------------------------------------------------------------------------
# Mean adaptation


@dataclass
class AdaptState:
    """Running mean of chain outputs used to recentre an independent proposal.

    The proposal mean at iteration ``t`` (1-based) is ``mu0`` while
    ``t < eta * T`` or before anything has been recorded, and the arithmetic
    mean of all recorded outputs afterwards.
    """

    mu0: np.ndarray
    T: int
    eta: float = 0.2
    accepted_only: bool = False
    total: np.ndarray = field(default=None, repr=False)
    count: int = 0

    def __post_init__(self):
        self.mu0 = np.atleast_1d(np.asarray(self.mu0, dtype=float))
        if self.total is None:
            self.total = np.zeros_like(self.mu0)

    def record(self, output, accepted=True):
        if self.accepted_only and not accepted:
            return self
        self.total = self.total + np.asarray(output, dtype=float)
        self.count += 1
        return self

    def running_mean(self):
        return self.total / self.count if self.count else self.mu0.copy()

    def mean(self, t):
        if t < self.eta * self.T or self.count == 0:
            return self.mu0.copy()
        return self.running_mean()


def adapt_mean(state, new_output, t, T, accepted=True):
    """Record ``new_output`` at iteration ``t`` of ``T`` and return the state."""
    if not 1 <= t <= T:
        raise ConfigurationError(f"t must lie in [1, {T}], got {t}")
    return state.record(new_output, accepted)


class DiscreteSecondStage:
    """Discrete second-stage proposal.

    ``array`` is either ``(K, K)`` giving ``q2(b | a)`` (ignoring the first
    candidate) or ``(K, K, K)`` indexed ``[theta1, a, b]``.
    """

    def __init__(self, array):
        array = np.asarray(array, dtype=float)
        self.array = array if array.ndim == 3 else np.broadcast_to(array, (len(array),) + array.shape)
        if not np.allclose(self.array.sum(axis=-1), 1.0):
            raise ConfigurationError("second-stage rows must sum to one")
        self._cdf = np.cumsum(self.array, axis=-1)
        with np.errstate(divide="ignore"):
            self._log = np.log(self.array)

    def sample(self, theta1, theta_prev, rng):
        cdf = self._cdf[_state_index(theta1), _state_index(theta_prev)]
        return _draw_categorical(cdf, rng, None)

    def log_q(self, theta, theta1, theta_current):
        return float(self._log[_state_index(theta1), _state_index(theta_current), _state_index(theta)])
