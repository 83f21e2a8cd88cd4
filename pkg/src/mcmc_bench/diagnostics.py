"""Chain statistics, estimators and the repeated-run MSE harness."""

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ._util import check_positive_int, select_indices
from .exceptions import ConfigurationError, DegenerateWeightsError, UndefinedAutocorrelationError
from .samplers.trace import ChainTrace

logger = logging.getLogger(__name__)


def chain_mean_estimator(trace, f=None, burn_in=0.0):
    """Mean of ``f`` over the chain states; all states are used by default."""
    return trace.mean(f, burn_in)


def acceptance_rate(trace):
    return float(np.mean(trace.accepted))


def autocorr(series, tau):
    """Normalized autocorrelation at lag ``tau`` with the biased 1/T normalization.

    Raises
    ------
    UndefinedAutocorrelationError
        For a constant series.
    """
    x = np.asarray(series, dtype=float)
    T = len(x)
    if not 0 <= tau < T:
        raise ConfigurationError(f"lag must lie in [0, {T - 1}], got {tau}")
    x = x - x.mean()
    c0 = np.dot(x, x)
    if c0 == 0.0:
        raise UndefinedAutocorrelationError("series has zero variance")
    if tau == 0:
        return 1.0
    return float(np.dot(x[:-tau], x[tau:]) / c0)


def ess_of_chain(series, tau_max=10):
    """Autocorrelation-discounted sample size ``T / (1 + 2 sum_tau phi(tau))``.

    The sum is cut at ``tau_max``; the denominator is floored at 1e-6 and the
    result capped at T.  A ``(T, D)`` series is handled per column and the
    mean across columns returned.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim == 2:
        return float(np.mean([ess_of_chain(x[:, d], tau_max) for d in range(x.shape[1])]))
    T = len(x)
    rho = sum(autocorr(x, tau) for tau in range(1, min(tau_max, T - 1) + 1))
    return float(min(T, T / max(1e-6, 1.0 + 2.0 * rho)))


def mean_autocorr(states, tau):
    """Autocorrelation at lag ``tau`` averaged over the columns of a ``(T, D)`` array."""
    states = np.asarray(states, dtype=float).reshape(len(states), -1)
    return float(np.mean([autocorr(states[:, d], tau) for d in range(states.shape[1])]))


def gms_estimate(run, f=None):
    """``(1/T) sum_t sum_n rho_bar_{n,t} f(theta_{n,t})`` with per-set normalization.

    Raises
    ------
    DegenerateWeightsError
        If some set has all weights zero; the error carries its 1-based index.
    """
    lw = run.log_rho
    m = lw.max(axis=1, keepdims=True)
    bad = np.flatnonzero(~np.isfinite(m[:, 0]))
    if bad.size:
        raise DegenerateWeightsError("weighted set has all weights zero", step=int(bad[0]) + 1)
    w = np.exp(lw - m)
    w /= w.sum(axis=1, keepdims=True)
    vals = run.thetas if f is None else np.apply_along_axis(lambda v: np.atleast_1d(f(v)), 2, run.thetas)
    return np.einsum("tn,tnd->d", w, vals) / run.T


def recover_parallel_chains(run, C, rng, f=None):
    """Rebuild C dependent I-MTM2 chains from a GMS run.

    The initial state of every chain is resampled from S_0.  At each iteration
    whose set was accepted, each chain draws a fresh member of the new set
    (C uniforms in chain order); otherwise all chains repeat their state.
    No target evaluations are made.

    Returns
    -------
    traces : list of ChainTrace
    estimate : ndarray
        Average over chains of the per-chain state means.
    """
    C = check_positive_int("C", C)
    set0 = run.initial_set
    idx = select_indices(set0.log_rho, rng.random(C))
    cur = set0.thetas[idx]
    states = np.empty((C, run.T, run.dim))
    moved = np.zeros((C, run.T), dtype=bool)
    for t in range(run.T):
        if run.accepted[t]:
            new_idx = select_indices(run.log_rho[t], rng.random(C))
            cur = run.thetas[t][new_idx]
            moved[:, t] = True
        states[:, t] = cur
    nan = np.full(run.T, np.nan)
    traces = [ChainTrace(states[c], moved[c], nan.copy(), run.target_evals, run.T, run.init_evals,
                         run.degenerate, run.log_z.copy(), set0.thetas[idx[c]], {"recovered": True})
              for c in range(C)]
    vals = states if f is None else np.apply_along_axis(lambda v: np.atleast_1d(f(v)), 2, states)
    return traces, vals.mean(axis=1).mean(axis=0)


def recover_imtm2_chain(run, rng):
    """One I-MTM2 chain from a GMS run: resample from S_t when the set changed, else repeat."""
    set0 = run.initial_set
    j = int(select_indices(set0.log_rho, rng.random(1))[0])
    cur = set0.thetas[j]
    theta0 = cur
    states = np.empty((run.T, run.dim))
    for t in range(run.T):
        if run.accepted[t]:
            j = int(select_indices(run.log_rho[t], rng.random(1))[0])
            cur = run.thetas[t][j]
        states[t] = cur
    return ChainTrace(states, run.accepted.copy(), np.full(run.T, np.nan), run.target_evals, run.T,
                      run.init_evals, run.degenerate, run.log_z.copy(), theta0, {"recovered": True})


@dataclass
class RunSummary:
    """Scalar summary of one chain, serializable to JSON."""

    estimate: list
    acceptance_rate: float
    autocorrelation: list
    ess: float
    E: int
    Q: int
    mse: float = None

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)


def summarize(trace, truth=None, tau_max=10):
    est = trace.mean()
    try:
        phis = [mean_autocorr(trace.states, tau) for tau in range(1, tau_max + 1)]
        ess = ess_of_chain(trace.states, tau_max)
    except UndefinedAutocorrelationError:
        phis, ess = [float("nan")] * tau_max, float("nan")
    mse = None if truth is None else float(np.mean((est - np.asarray(truth)) ** 2))
    return RunSummary(est.tolist(), trace.acceptance_rate, phis, ess, int(trace.target_evals),
                      int(trace.samples_in_estimator), mse)


@dataclass
class MseResult:
    """Mean squared error over repeated runs, with standard error and averaged side statistics."""

    mse: float
    stderr: float
    errors: np.ndarray = field(repr=False)
    stats: dict = field(default_factory=dict)

    @property
    def runs(self):
        return len(self.errors)

    def interval(self, k=3.0):
        return self.mse - k * self.stderr, self.mse + k * self.stderr


def run_seeds(master_seed, runs):
    """Per-run seed sequences spawned from one master seed.

    Run ``r`` receives the same child sequence whatever sampler is being
    evaluated, so samplers compared at one master seed share their streams.
    """
    return np.random.SeedSequence(master_seed).spawn(runs)


def _call(args):
    fn, seed = args
    return fn(seed)


def mse_harness(run_fn, truth, runs, seed, jobs=1):
    """Repeat ``run_fn`` over independent seeds and average squared errors.

    Parameters
    ----------
    run_fn : callable
        ``seed -> estimate`` or ``seed -> dict`` with an ``"estimate"`` key and
        optional numeric side statistics (for example ``"ar"``).  Must be
        picklable when ``jobs > 1``.
    truth : array_like
    runs : int
        At least 2.
    seed : int
        Master seed.
    jobs : int
        Worker processes; results are assembled in run order.

    Returns
    -------
    MseResult
        ``mse`` is the mean over runs of the per-run squared error averaged
        over the components of ``truth``.
    """
    runs = check_positive_int("runs", runs, minimum=2)
    truth = np.asarray(truth, dtype=float)
    seeds = run_seeds(seed, runs)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(_call, [(run_fn, s) for s in seeds]))
    else:
        outputs = [run_fn(s) for s in seeds]
    errors = np.empty(runs)
    stats = {}
    for r, out in enumerate(outputs):
        est = out["estimate"] if isinstance(out, dict) else out
        errors[r] = np.mean((np.asarray(est, dtype=float) - truth) ** 2)
        if isinstance(out, dict):
            for k, v in out.items():
                if k != "estimate":
                    stats.setdefault(k, []).append(v)
    stats = {k: float(np.mean(v)) for k, v in stats.items()}
    return MseResult(float(errors.mean()), float(errors.std(ddof=1) / np.sqrt(runs)), errors, stats)
