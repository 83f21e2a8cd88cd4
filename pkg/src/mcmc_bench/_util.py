"""Small numerical helpers shared by the samplers.

The random-draw helpers here define the shared RNG-stream protocol: every
sampler draws, per iteration, (1) its candidates, (2) one selection uniform
when there is more than one candidate to choose from, and (3) one acceptance
uniform.  Keeping the order fixed is what makes reductions such as
I-MTM(N=1) == I-MH bit-exact rather than only equal in distribution.
"""

import numpy as np

from .exceptions import ConfigurationError, InitializationError

LOG_2 = np.log(2.0)


def logsumexp(a):
    """log(sum(exp(a))) over a 1-D array.

    Plain max-shift implementation; scipy's version is several times slower on
    the short arrays used inside sampler loops.  Returns ``a[0]`` exactly for a
    single finite element.
    """
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return -np.inf
    m = a.max()
    if not np.isfinite(m):
        return m
    return m + np.log(np.exp(a - m).sum())


def log_mean_exp(a):
    return logsumexp(a) - np.log(len(a))


def normalized_weights(log_w):
    """Normalized weights from log-weights; raises nothing, all -inf gives nan."""
    log_w = np.asarray(log_w, dtype=float)
    p = np.exp(log_w - log_w.max())
    return p / p.sum()


def select_index(log_w, u):
    """Inverse-CDF selection on max-shifted exponentiated weights.

    ``u`` is a uniform in [0, 1).  Ties go to the lowest index and zero-weight
    entries are never selected.
    """
    log_w = np.asarray(log_w, dtype=float)
    cdf = np.cumsum(np.exp(log_w - log_w.max()))
    j = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    return min(j, len(cdf) - 1)


def select_indices(log_w, u):
    """Vectorized :func:`select_index` for an array of uniforms."""
    log_w = np.asarray(log_w, dtype=float)
    cdf = np.cumsum(np.exp(log_w - log_w.max()))
    j = np.searchsorted(cdf, np.asarray(u) * cdf[-1], side="right")
    return np.minimum(j, len(cdf) - 1)


def accept(log_ratio, u):
    """Metropolis test ``u < min(1, exp(log_ratio))``; nan counts as reject."""
    if np.isnan(log_ratio):
        return False
    return bool(u < np.exp(min(log_ratio, 0.0)))


def log1mexp(x):
    """log(1 - exp(x)) for x <= 0, accurate near both ends."""
    if x == 0.0:
        return -np.inf
    if x > -LOG_2:
        return float(np.log(-np.expm1(x)))
    return float(np.log1p(-np.exp(x)))


def make_rng(seed):
    """``np.random.Generator`` from an int, a SeedSequence or a Generator."""
    return np.random.default_rng(seed)


def initial_state(target, rng, init=None, init_box=None, proposal=None):
    """Return a valid starting point and its log target value.

    A user supplied ``init`` takes precedence.  Otherwise the state is drawn
    uniformly from ``init_box`` (or the target support), consuming
    ``target.dim`` uniforms, or failing that as one draw from the independent
    ``proposal``.
    """
    if init is not None:
        theta = np.atleast_1d(np.asarray(init, dtype=float)).copy()
        if theta.shape != (target.dim,):
            raise ConfigurationError(f"init has shape {theta.shape}, expected ({target.dim},)")
    else:
        box = init_box if init_box is not None else target.support
        if box is not None:
            lower, upper = (np.broadcast_to(np.asarray(b, dtype=float), (target.dim,)) for b in box)
            theta = lower + (upper - lower) * rng.random(target.dim)
        elif proposal is not None and getattr(proposal, "independent", False):
            theta = np.asarray(proposal.sample(rng), dtype=float)
        else:
            raise ConfigurationError("no initial state and no box to draw one from")
    log_pi = float(target.log_pi(theta))
    if not np.isfinite(log_pi):
        raise InitializationError(f"log target at initial state is {log_pi}")
    return theta, log_pi


def check_positive_int(name, value, minimum=1):
    if int(value) != value or value < minimum:
        raise ConfigurationError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
