"""Exact transition kernels of the samplers on small discrete state spaces.

The kernels are built by summing over every candidate tuple, auxiliary tuple,
selection outcome and acceptance outcome.  The code here is written from the
algorithm definitions directly and does not call the sampler implementations,
so agreement between the two is evidence that both are right.
"""

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .exceptions import ConfigurationError
from .proposals import FactorizedProposal
from .targets import FactorizedTarget

KERNEL_KINDS = ("MH", "I-MH", "MTM", "I-MTM", "I-EnMCMC", "EnMCMC", "DRM2")


@dataclass
class DiscreteInstance:
    """Small discrete problem.

    Attributes
    ----------
    pi : ndarray, shape (K,)
        Target masses (need not be normalized).
    q : ndarray, shape (K,) or (K, K)
        Independent proposal vector or row-stochastic conditional matrix.
    N : int
        Number of tries.
    q2 : ndarray, optional
        Second-stage proposal for DRM2, ``(K, K)`` as ``[a, b]`` or
        ``(K, K, K)`` as ``[theta1, a, b]``.  Defaults to ``q``.
    """

    pi: np.ndarray
    q: np.ndarray
    N: int = 1
    q2: np.ndarray = None

    @property
    def K(self):
        return len(self.pi)

    @property
    def pi_bar(self):
        return np.asarray(self.pi, dtype=float) / np.sum(self.pi)


def random_instance(rng, K=4, N=2, conditional=False, symmetric=False):
    """Instance with strictly positive masses drawn from ``rng``."""
    pi = rng.uniform(0.1, 1.0, K)
    if conditional:
        q = rng.uniform(0.1, 1.0, (K, K))
        if symmetric:
            q = q + q.T
            # Sinkhorn balancing keeps symmetry and makes rows sum to one.
            for _ in range(500):
                q = q / q.sum(axis=1, keepdims=True)
                q = 0.5 * (q + q.T)
        else:
            q = q / q.sum(axis=1, keepdims=True)
    else:
        q = rng.uniform(0.1, 1.0, K)
        q = q / q.sum()
    return DiscreteInstance(pi, q, N)


def _weight_fn(kind, pi, Q):
    """``w(c | x)`` for the three MTM weight choices on a discrete space."""
    if kind == "importance":
        return lambda c, x: pi[c] / Q[x, c]
    if kind == "pi_times_q":
        return lambda c, x: pi[c] * Q[c, x]
    if kind == "target_only":
        if not np.allclose(Q, Q.T, atol=1e-14):
            raise ConfigurationError("target_only weights need a symmetric proposal")
        return lambda c, x: pi[c]
    raise ConfigurationError(f"unknown weight kind {kind!r}")


def _mh(pi, Q):
    K = len(pi)
    P = np.zeros((K, K))
    for i in range(K):
        for j in range(K):
            if j != i:
                P[i, j] = Q[i, j] * min(1.0, pi[j] * Q[j, i] / (pi[i] * Q[i, j]))
        P[i, i] = 1.0 - P[i].sum()
    return P


def _imh(pi, q):
    w = pi / q
    K = len(pi)
    P = np.zeros((K, K))
    for i in range(K):
        for j in range(K):
            if j != i:
                P[i, j] = q[j] * min(1.0, w[j] / w[i])
        P[i, i] = 1.0 - P[i].sum()
    return P


def _mtm(pi, Q, N, weight):
    K = len(pi)
    P = np.zeros((K, K))
    for i in range(K):
        for cands in itertools.product(range(K), repeat=N):
            p_c = np.prod([Q[i, c] for c in cands])
            w = np.array([weight(c, i) for c in cands])
            for n, c in enumerate(cands):
                p_sel = p_c * w[n] / w.sum()
                for aux in itertools.product(range(K), repeat=N - 1):
                    p_a = np.prod([Q[c, a] for a in aux]) if aux else 1.0
                    den = sum(weight(a, c) for a in aux) + weight(i, c)
                    alpha = min(1.0, w.sum() / den)
                    P[i, c] += p_sel * p_a * alpha
                    P[i, i] += p_sel * p_a * (1.0 - alpha)
    return P


def _imtm(pi, q, N):
    K = len(pi)
    wt = pi / q
    P = np.zeros((K, K))
    for i in range(K):
        for cands in itertools.product(range(K), repeat=N):
            p_c = np.prod(q[list(cands)])
            w = wt[list(cands)]
            for n, c in enumerate(cands):
                p_sel = p_c * w[n] / w.sum()
                alpha = min(1.0, w.sum() / (w.sum() - w[n] + wt[i]))
                P[i, c] += p_sel * alpha
                P[i, i] += p_sel * (1.0 - alpha)
    return P


def _ienmcmc(pi, q, N):
    K = len(pi)
    wt = pi / q
    P = np.zeros((K, K))
    for i in range(K):
        for cands in itertools.product(range(K), repeat=N):
            p_c = np.prod(q[list(cands)])
            total = wt[list(cands)].sum() + wt[i]
            for c in cands:
                P[i, c] += p_c * wt[c] / total
            P[i, i] += p_c * wt[i] / total
    return P


def _enmcmc(pi, Q, N):
    K = len(pi)
    P = np.zeros((K, K))
    for i in range(K):
        for cands in itertools.product(range(K), repeat=N):
            p_c = np.prod([Q[i, c] for c in cands])
            pts = list(cands) + [i]
            mass = np.array([pi[pj] * np.prod([Q[pj, pl] for l, pl in enumerate(pts) if l != j])
                             for j, pj in enumerate(pts)])
            mass /= mass.sum()
            for j, pj in enumerate(pts):
                P[i, pj] += p_c * mass[j]
    return P


def _drm2(pi, Q1, Q2):
    K = len(pi)
    if Q2.ndim == 2:
        Q2 = np.broadcast_to(Q2, (K, K, K))

    def a1(x, y):
        return min(1.0, pi[y] * Q1[y, x] / (pi[x] * Q1[x, y]))

    def psi(a, b, t1):
        return pi[a] * Q1[a, t1] * Q2[t1, a, b] * (1.0 - a1(a, t1))

    P = np.zeros((K, K))
    for i in range(K):
        for c1 in range(K):
            alpha1 = a1(i, c1)
            P[i, c1] += Q1[i, c1] * alpha1
            reject1 = Q1[i, c1] * (1.0 - alpha1)
            for c2 in range(K):
                p2 = reject1 * Q2[c1, i, c2]
                if p2 == 0.0:
                    continue
                num, den = psi(c2, i, c1), psi(i, c2, c1)
                alpha2 = min(1.0, num / den) if den > 0 else 0.0
                P[i, c2] += p2 * alpha2
                P[i, i] += p2 * (1.0 - alpha2)
    return P


def enumerate_kernel(instance, sampler_kind, weight_kind="importance"):
    """Exact K x K transition matrix of one sampler on a discrete instance.

    Parameters
    ----------
    instance : DiscreteInstance
    sampler_kind : str
        One of ``MH``, ``I-MH``, ``MTM``, ``I-MTM``, ``I-EnMCMC``, ``EnMCMC``,
        ``DRM2``.  Independent kinds need a vector ``q``; the others a matrix.
    weight_kind : str
        MTM weight choice.
    """
    pi = np.asarray(instance.pi, dtype=float)
    q = np.asarray(instance.q, dtype=float)
    N = instance.N
    independent = q.ndim == 1
    needs_independent = sampler_kind in ("I-MH", "I-MTM", "I-EnMCMC")
    if sampler_kind not in KERNEL_KINDS:
        raise ConfigurationError(f"no enumeration for sampler kind {sampler_kind!r}")
    if needs_independent != independent:
        raise ConfigurationError(f"{sampler_kind} needs {'a vector' if needs_independent else 'a matrix'} q")
    if sampler_kind == "MH":
        return _mh(pi, q)
    if sampler_kind == "I-MH":
        return _imh(pi, q)
    if sampler_kind == "MTM":
        return _mtm(pi, q, N, _weight_fn(weight_kind, pi, q))
    if sampler_kind == "I-MTM":
        return _imtm(pi, q, N)
    if sampler_kind == "I-EnMCMC":
        return _ienmcmc(pi, q, N)
    if sampler_kind == "EnMCMC":
        return _enmcmc(pi, q, N)
    q2 = q if instance.q2 is None else np.asarray(instance.q2, dtype=float)
    return _drm2(pi, q, q2)


def check_stationarity(P, pi_bar, tol=None):
    """Return ``max |pi_bar P - pi_bar|``; with ``tol`` also return whether it is within tolerance."""
    dev = float(np.max(np.abs(np.asarray(pi_bar) @ np.asarray(P) - np.asarray(pi_bar))))
    return dev if tol is None else (dev, dev <= tol)


def detailed_balance_gap(P, pi_bar):
    flow = np.asarray(pi_bar)[:, None] * np.asarray(P)
    return float(np.max(np.abs(flow - flow.T)))


STATIONARITY_CASES = (
    ("MH", None, "conditional"), ("I-MH", None, "independent"),
    ("MTM", "importance", "conditional"), ("MTM", "pi_times_q", "conditional"),
    ("MTM", "target_only", "symmetric"), ("I-MTM", None, "independent"),
    ("I-EnMCMC", None, "independent"), ("EnMCMC", None, "conditional"), ("DRM2", None, "conditional"),
)


def stationarity_report(instances=20, K=4, N=2, seed=0):
    """Worst stationarity deviation and row-sum error of every enumerated kernel over random instances.

    Returns
    -------
    list of (label, max_deviation, max_row_error)
    """
    rng = np.random.default_rng(seed)
    report = []
    for kind, weight, shape in STATIONARITY_CASES:
        dev = row = 0.0
        for _ in range(instances):
            inst = random_instance(rng, K, N, conditional=shape != "independent", symmetric=shape == "symmetric")
            P = enumerate_kernel(inst, kind, weight or "importance")
            dev = max(dev, check_stationarity(P, inst.pi_bar))
            row = max(row, float(np.max(np.abs(P.sum(axis=1) - 1.0))))
        report.append((kind if weight is None else f"{kind}[{weight}]", dev, row))
    return report


class DiscreteSequentialTarget(FactorizedTarget):
    """Factorized target on ``{0..K-1}^D`` with factors ``g1[x_1]`` and ``g[d-1][x_{d-1}, x_d]``."""

    def __init__(self, g1, g):
        self.g1 = np.asarray(g1, dtype=float)
        self.g = np.asarray(g, dtype=float)
        super().__init__(1 + len(self.g))

    def log_gamma(self, d, x, history):
        x = np.asarray(x).astype(int)
        with np.errstate(divide="ignore"):
            if d == 0:
                return np.log(self.g1[x])
            return np.log(self.g[d - 1][history[:, d - 1].astype(int), x])

    def exact_log_z(self):
        """``log Z`` by summing the product of factors over all ``K^D`` paths."""
        K = len(self.g1)
        total = 0.0
        for path in itertools.product(range(K), repeat=self.dim):
            v = self.g1[path[0]]
            for d in range(1, self.dim):
                v *= self.g[d - 1][path[d - 1], path[d]]
            total += v
        return float(np.log(total))


class DiscreteSequentialProposal(FactorizedProposal):
    """Markov proposal with initial masses ``q1`` and row-stochastic transitions ``trans[d-1]``."""

    def __init__(self, q1, trans):
        self.q1 = np.asarray(q1, dtype=float)
        self.trans = np.asarray(trans, dtype=float)
        self.dim = 1 + len(self.trans)

    def sample_step(self, d, history, rng, n):
        u = rng.random(n)
        if d == 0:
            cdf = np.cumsum(self.q1)
            return np.minimum(np.searchsorted(cdf, u * cdf[-1], side="right"), len(cdf) - 1).astype(float)
        cdf = np.cumsum(self.trans[d - 1][history[:, d - 1].astype(int)], axis=1)
        return np.minimum((cdf <= (u * cdf[:, -1])[:, None]).sum(axis=1), cdf.shape[1] - 1).astype(float)

    def log_q_step(self, d, x, history):
        x = np.asarray(x).astype(int)
        if d == 0:
            return np.log(self.q1[x])
        return np.log(self.trans[d - 1][history[:, d - 1].astype(int), x])


def random_sequential_system(rng, D=3, K=4):
    """Random positive target factors and a random Markov proposal on ``{0..K-1}^D``."""
    g1 = rng.uniform(0.1, 1.0, K)
    g = rng.uniform(0.1, 1.0, (D - 1, K, K))
    q1 = rng.uniform(0.1, 1.0, K)
    trans = rng.uniform(0.1, 1.0, (D - 1, K, K))
    return (DiscreteSequentialTarget(g1, g),
            DiscreteSequentialProposal(q1 / q1.sum(), trans / trans.sum(axis=2, keepdims=True)))


def _bin_masses(target, edges, sub=20):
    """Target probability of each histogram bin, by midpoint quadrature normalized over the grid."""
    if hasattr(target, "means") and hasattr(target, "variances") and target.dim == 1:
        w = np.exp(target.log_weights)
        cdf = sum(wk * stats.norm.cdf(edges, m[0], np.sqrt(v))
                  for wk, m, v in zip(w, target.means, target.variances))
        return np.diff(cdf)
    fine = np.linspace(edges[0], edges[-1], (len(edges) - 1) * sub + 1)
    mids = 0.5 * (fine[1:] + fine[:-1])
    dens = np.exp(target.log_pi(mids[:, None]))
    mass = (dens * np.diff(fine)).reshape(len(edges) - 1, sub).sum(axis=1)
    return mass / mass.sum()


def _resampled_draws(target, proposal, N, draws, rng, chunk=2_000_000):
    out = np.empty(draws)
    per = max(1, chunk // N)
    done = 0
    while done < draws:
        m = min(per, draws - done)
        cands = proposal.sample(rng, size=m * N)
        with np.errstate(invalid="ignore"):
            lw = (target.log_pi(cands) - proposal.log_q(cands)).reshape(m, N)
        lw = np.where(np.isnan(lw), -np.inf, lw)
        if N == 1:
            out[done:done + m] = cands[:, 0]
        else:
            cdf = np.cumsum(np.exp(lw - lw.max(axis=1, keepdims=True)), axis=1)
            u = rng.random(m) * cdf[:, -1]
            idx = np.minimum((cdf <= u[:, None]).sum(axis=1), N - 1)
            out[done:done + m] = cands[:, 0].reshape(m, N)[np.arange(m), idx]
        done += m
    return out


def tv_from_samples(samples, edges, bin_masses):
    counts, _ = np.histogram(samples, bins=edges)
    return 0.5 * float(np.abs(counts / len(samples) - bin_masses).sum())


@dataclass
class ResampledDensityResult:
    """Total-variation distances from the target for each N, plus the histogram noise floor."""

    N: list
    tv: np.ndarray
    noise_mean: float
    noise_std: float


def resampled_density_check(target, proposal, Ns, edges, mc_draws, seed=None, noise_reps=20, exact_sampler=None):
    """Distance between the law of one resampled candidate and the target.

    For each N, ``mc_draws`` times: draw N candidates from the independent
    proposal, resample one by importance weight, and histogram the results on
    ``edges``.  The distance reported is the total variation between the
    histogram and the target's bin masses.  The noise floor is measured with
    ``noise_reps`` histograms of ``mc_draws`` exact target draws when
    ``exact_sampler`` (``(rng, size) -> samples``) or ``target.sample`` exists.
    """
    rng = np.random.default_rng(seed)
    edges = np.asarray(edges, dtype=float)
    masses = _bin_masses(target, edges)
    tv = np.array([tv_from_samples(_resampled_draws(target, proposal, N, mc_draws, rng), edges, masses)
                   for N in Ns])
    sampler = exact_sampler or (lambda r, n: target.sample(r, n)[:, 0] if hasattr(target, "sample") else None)
    noise = []
    for _ in range(noise_reps):
        s = sampler(rng, mc_draws)
        if s is None:
            break
        noise.append(tv_from_samples(np.ravel(s), edges, masses))
    noise = np.array(noise) if noise else np.array([np.nan])
    return ResampledDensityResult(list(Ns), tv, float(noise.mean()), float(noise.std(ddof=1)) if len(noise) > 1
                                  else float("nan"))


def empirical_transition_counts(states, K):
    """Transition count matrix of an integer-valued chain."""
    s = np.asarray(states).reshape(-1).astype(int)
    counts = np.zeros((K, K))
    np.add.at(counts, (s[:-1], s[1:]), 1.0)
    return counts


__all__ = ["DiscreteInstance", "random_instance", "enumerate_kernel", "check_stationarity", "detailed_balance_gap",
           "stationarity_report", "DiscreteSequentialTarget", "DiscreteSequentialProposal",
           "random_sequential_system", "resampled_density_check", "ResampledDensityResult", "empirical_transition_counts", "KERNEL_KINDS"]
