"""Experiment definitions behind the ``mcmc-bench`` command.

Each experiment turns an :class:`ExperimentConfig` into rows of
``(param_name, param_value, N, T, mse, stderr, ar, ess_ratio, E)``.  Run ``r``
of every cell uses the ``r``-th child of the master seed, so different
samplers and sweep values see the same per-run streams.
"""

import csv
import io
import itertools
import json
import logging
from dataclasses import asdict, dataclass

import numpy as np

from .diagnostics import ess_of_chain, gms_estimate, mse_harness, recover_parallel_chains
from .exceptions import ConfigurationError, UndefinedAutocorrelationError
from .proposals import AdaptState, GaussianChainProposal, GaussianIndependent, GaussianRandomWalk, MALAProposal
from .samplers import (run_gms, run_ienmcmc, run_imh, run_imtm, run_imtm2, run_mh, run_mtm, run_pmh,
                       run_var_pmh)
from .targets import (RSSTarget, WSN_SENSORS, WSN_Z_STAR, WSN_ZETA_STAR, GPPosteriorTarget, WSNTarget,
                      generate_gp_data, generate_rss_observations, generate_wsn_observations, grid_posterior_mean,
                      mixture_moments, benchmark_factorized_target, benchmark_mixture)

logger = logging.getLogger(__name__)

EXPERIMENTS = {
    "mixture": ("imtm", "imtm2", "ienmcmc", "imh"),
    "factorized": ("imtm", "imtm2", "pmh", "var_pmh"),
    "gp": ("gms", "imtm2", "amh", "is"),
    "wsn": ("gms", "imtm", "parallel_mh"),
    "rss": ("mh", "mala", "mtm"),
}

DEFAULTS = {
    "mixture": dict(sampler="imtm", N=[1, 5, 50, 500], T=[500], sigma=[np.sqrt(2.0)], D=1),
    "factorized": dict(sampler="var_pmh", N=[3], T=[1000], sigma=[1.0], D=10, eta=1.0),
    "gp": dict(sampler="gms", N=[100], T=[20], sigma=[5.0], D=2),
    "wsn": dict(sampler="gms", N=[500], T=[20], sigma=[1.0], D=8),
    "rss": dict(sampler="mtm", N=[10, 100, 1000], T=[1000], sigma=[1.0], D=2),
}

DESK_RUNS = 200
FULL_SCALE_RUNS = {"mixture": 3000, "factorized": 500, "gp": 1000, "wsn": 500, "rss": 2000}
RSS_LABEL = "synthetic stand-in for real data"


@dataclass
class ExperimentConfig:
    """Validated settings of one experiment invocation.

    ``N``, ``T`` and ``sigma`` are sweep lists; every combination is one
    output row.  When ``budget`` is set, ``T`` is derived as ``budget // N``.
    """

    experiment: str
    sampler: str = None
    N: list = None
    T: list = None
    sigma: list = None
    D: int = None
    eta: float = 1.0
    C: int = 1
    runs: int = DESK_RUNS
    seed: int = 0
    jobs: int = 1
    out: str = "results"
    paper_scale: bool = False
    burn_in: float = 0.0
    budget: int = None
    grid_size: int = 400
    data_seed: int = 0
    sigma_p: float = 1.0

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(f"unknown experiment {self.experiment!r}; choose from {sorted(EXPERIMENTS)}")
        d = DEFAULTS[self.experiment]
        for key in ("sampler", "N", "T", "sigma", "D"):
            if getattr(self, key) is None:
                setattr(self, key, d[key])
        if self.paper_scale:
            self.runs = FULL_SCALE_RUNS[self.experiment]
        self.N = [int(n) for n in np.atleast_1d(self.N)]
        self.T = [int(t) for t in np.atleast_1d(self.T)]
        self.sigma = [float(s) for s in np.atleast_1d(self.sigma)]
        self.validate()

    def validate(self):
        if self.sampler not in EXPERIMENTS[self.experiment]:
            raise ConfigurationError(f"sampler {self.sampler!r} not available for {self.experiment}; "
                                     f"choose from {EXPERIMENTS[self.experiment]}")
        if not self.N or min(self.N) < 1:
            raise ConfigurationError("N values must be >= 1")
        if not self.T or min(self.T) < 1:
            raise ConfigurationError("T values must be >= 1")
        if min(self.sigma) <= 0:
            raise ConfigurationError("sigma must be positive")
        if self.runs < 2:
            raise ConfigurationError("runs must be >= 2")
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigurationError("eta must lie in [0, 1]")
        if not 0.0 <= self.burn_in < 1.0:
            raise ConfigurationError("burn-in fraction must lie in [0, 1)")
        if self.jobs < 1 or self.C < 1:
            raise ConfigurationError("jobs and C must be >= 1")
        if self.grid_size < 2:
            raise ConfigurationError("grid size must be >= 2")
        if self.D < 1:
            raise ConfigurationError("D must be >= 1")
        if self.experiment == "factorized" and self.sampler in ("pmh", "var_pmh") and self.eta > 0 and min(self.N) < 2:
            raise ConfigurationError("particle samplers with resampling need N >= 2")
        if self.experiment == "mixture" and self.sampler == "imh" and self.N != [1]:
            raise ConfigurationError("imh uses a single candidate; set N to 1")
        if self.experiment in ("gp", "wsn", "rss") and self.D != DEFAULTS[self.experiment]["D"]:
            raise ConfigurationError(f"{self.experiment} has fixed dimension {DEFAULTS[self.experiment]['D']}")
        if self.budget is not None:
            bad = [n for n in self.N if self.budget % n]
            if self.budget < 1 or bad:
                raise ConfigurationError(f"budget {self.budget} is not a multiple of N in {bad}")

    def cells(self):
        """``(N, T, sigma)`` for every output row, in output order."""
        Ts = [None] if self.budget is not None else self.T
        for n, t, s in itertools.product(self.N, Ts, self.sigma):
            yield n, (self.budget // n if self.budget is not None else t), s

    def swept(self):
        for name, vals in (("N", self.N), ("T", self.T), ("sigma", self.sigma)):
            if len(vals) > 1:
                return name
        return "N"

    def echo(self):
        d = asdict(self)
        d.pop("out")
        d.pop("jobs")
        return d


# ---------------------------------------------------------------------------
# Per-run callables.  They are module-level classes so worker processes can
# unpickle them.


def _ess_ratio(states, T):
    try:
        return ess_of_chain(states) / T
    except UndefinedAutocorrelationError:
        return 0.0


def _chain_result(trace, burn_in, estimate=None):
    start = int(np.floor(burn_in * trace.T))
    est = trace.states[start:].mean(axis=0) if estimate is None else estimate
    return {"estimate": est, "ar": trace.acceptance_rate, "ess_ratio": _ess_ratio(trace.states, trace.T),
            "E": trace.target_evals}


class MixtureRun:
    def __init__(self, sampler, N, T, sigma, D, burn_in):
        self.sampler, self.N, self.T, self.sigma, self.D, self.burn_in = sampler, N, T, sigma, D, burn_in
        self.target = benchmark_mixture(D)

    def __call__(self, seed):
        q = GaussianIndependent(np.zeros(self.D), self.sigma)
        if self.sampler == "imtm":
            tr = run_imtm(self.target, q, self.T, self.N, seed=seed)
        elif self.sampler == "imtm2":
            tr = run_imtm2(self.target, q, self.T, self.N, seed=seed)
        elif self.sampler == "ienmcmc":
            tr = run_ienmcmc(self.target, q, self.T, self.N, seed=seed)
        else:
            tr = run_imh(self.target, q, self.T, seed=seed)
        start = int(np.floor(self.burn_in * tr.T))
        x = tr.states[start:]
        res = _chain_result(tr, self.burn_in, np.concatenate([x.mean(axis=0), x.var(axis=0)]))
        return res


def mixture_truth(D):
    mean, var = mixture_moments(benchmark_mixture(D))
    return np.concatenate([mean, var])


class FactorizedRun:
    def __init__(self, sampler, N, T, eta, sigma_p, burn_in):
        self.sampler, self.N, self.T, self.eta, self.burn_in = sampler, N, T, eta, burn_in
        self.target = benchmark_factorized_target()
        self.proposal = GaussianChainProposal(self.target.dim, sigma_p=sigma_p)

    def __call__(self, seed):
        f, q = self.target, self.proposal
        if self.sampler == "imtm":
            tr = run_imtm(f, q, self.T, self.N, seed=seed)
        elif self.sampler == "imtm2":
            tr = run_imtm2(f, q, self.T, self.N, seed=seed)
        elif self.sampler == "pmh":
            tr = run_pmh(f, q, self.T, self.N, eta=self.eta, seed=seed)
        else:
            tr = run_var_pmh(f, q, self.T, self.N, eta=self.eta, seed=seed)
        return _chain_result(tr, self.burn_in)


GP_MU0 = np.array([1.0, 1.0])


def _gms_result(run, C, seed):
    """GMS estimate, or with ``C > 1`` the average of C chains recovered from the run."""
    if C == 1:
        est = gms_estimate(run)
    else:
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        # A child key outside the run's own spawn tree keeps the sampler stream untouched.
        rng = np.random.default_rng(np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + (2 ** 31,)))
        _, est = recover_parallel_chains(run, C, rng)
    return {"estimate": est, "ar": run.acceptance_rate, "ess_ratio": float("nan"), "E": run.target_evals}


class GPRun:
    def __init__(self, sampler, N, T, sigma, target, burn_in, C=1):
        self.sampler, self.N, self.T, self.sigma, self.target, self.burn_in = sampler, N, T, sigma, target, burn_in
        self.C = C

    def __call__(self, seed):
        q = GaussianIndependent(GP_MU0, self.sigma)
        adapt = AdaptState(GP_MU0, self.T)
        if self.sampler == "gms":
            return _gms_result(run_gms(self.target, q, self.T, self.N, seed=seed, adapt=adapt), self.C, seed)
        if self.sampler == "is":
            return static_is(self.target, q, self.N * self.T, seed)
        if self.sampler == "amh":
            tr = run_imh(self.target, q, self.N * self.T, seed=seed, init=GP_MU0, adapt=AdaptState(GP_MU0, self.N * self.T))
            return _chain_result(tr, self.burn_in)
        tr = run_imtm2(self.target, q, self.T, self.N, seed=seed, init=GP_MU0, adapt=adapt)
        return _chain_result(tr, self.burn_in)


def static_is(target, proposal, n, seed):
    """Self-normalized importance sampling with one batch of ``n`` draws."""
    rng = np.random.default_rng(seed)
    x = proposal.sample(rng, size=n)
    with np.errstate(invalid="ignore"):
        lw = target.log_pi(x) - proposal.log_q(x)
    lw = np.where(np.isnan(lw), -np.inf, lw)
    w = np.exp(lw - lw.max())
    return {"estimate": (w / w.sum()) @ x, "ar": float("nan"), "ess_ratio": float("nan"), "E": n}


def gp_problem(data_seed, grid_size, P=200, delta_star=3.0, sigma_star=10.0):
    """Seeded dataset, posterior target and grid ground truth of the GP experiment."""
    Z, y = generate_gp_data(data_seed, P, delta_star, sigma_star)
    target = GPPosteriorTarget(Z, y)
    truth = grid_posterior_mean(target, [0.0, 0.0], [20.0, 20.0], grid_size)
    return target, truth


class WSNRun:
    def __init__(self, sampler, N, T, sigma, target, burn_in, C=1):
        self.sampler, self.N, self.T, self.sigma, self.target, self.burn_in = sampler, N, T, sigma, target, burn_in
        self.C = C

    def __call__(self, seed):
        # Fresh copy so repeated calls with one seed object split identically.
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        init_seed, run_seed = np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key).spawn(2)
        init_rng = np.random.default_rng(init_seed)
        D = self.target.dim
        if self.sampler == "parallel_mh":
            starts = init_rng.uniform(1.0, 5.0, size=(self.N, D))
            q = GaussianRandomWalk(self.sigma)
            children = run_seed.spawn(self.N)
            states, ar, evals = [], [], 0
            for n in range(self.N):
                tr = run_mh(self.target, q, self.T, seed=children[n], init=starts[n])
                start = int(np.floor(self.burn_in * tr.T))
                states.append(tr.states[start:])
                ar.append(tr.acceptance_rate)
                evals += tr.target_evals
            all_states = np.vstack(states)
            return {"estimate": all_states.mean(axis=0), "ar": float(np.mean(ar)), "ess_ratio": float("nan"),
                    "E": evals}
        mu0 = init_rng.uniform(1.0, 5.0, size=D)
        q = GaussianIndependent(mu0, self.sigma)
        adapt = AdaptState(mu0, self.T)
        if self.sampler == "gms":
            return _gms_result(run_gms(self.target, q, self.T, self.N, seed=run_seed, adapt=adapt), self.C, seed)
        tr = run_imtm(self.target, q, self.T, self.N, seed=run_seed, init=mu0, adapt=adapt)
        return _chain_result(tr, self.burn_in)


def wsn_problem(data_seed):
    Y = generate_wsn_observations(data_seed, WSN_Z_STAR, WSN_ZETA_STAR, 20, WSN_SENSORS)
    return WSNTarget(Y), np.concatenate([WSN_Z_STAR, WSN_ZETA_STAR])


class RSSRun:
    def __init__(self, sampler, N, T, sigma, target, burn_in):
        self.sampler, self.N, self.T, self.sigma, self.target, self.burn_in = sampler, N, T, sigma, target, burn_in

    def __call__(self, seed):
        rw = GaussianRandomWalk(self.sigma)
        if self.sampler == "mh":
            tr = run_mh(self.target, rw, self.T, seed=seed)
        elif self.sampler == "mala":
            tr = run_mh(self.target, MALAProposal(self.target, self.sigma), self.T, seed=seed)
        else:
            tr = run_mtm(self.target, rw, self.T, self.N, seed=seed)
        return _chain_result(tr, self.burn_in)


def rss_problem(data_seed, grid_size):
    target = RSSTarget(generate_rss_observations(data_seed))
    return target, grid_posterior_mean(target, [0.0, 0.0], [4.0, 4.0], grid_size)


# ---------------------------------------------------------------------------


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list
    truth: np.ndarray
    label: str = None

    COLUMNS = ("param_name", "param_value", "N", "T", "mse", "stderr", "ar", "ess_ratio", "E")

    def to_csv(self):
        buf = io.StringIO()
        buf.write(f"# config: {json.dumps(self.config.echo(), sort_keys=True)}\n")
        if self.label:
            buf.write(f"# {self.label}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.COLUMNS)
        for row in self.rows:
            writer.writerow([row[c] if isinstance(row[c], str) else repr(row[c]) for c in self.COLUMNS])
        return buf.getvalue()

    def summary(self):
        return {"experiment": self.config.experiment, "sampler": self.config.sampler,
                "truth": [float(v) for v in self.truth], "label": self.label,
                "rows": [{k: (v if isinstance(v, str) else float(v)) for k, v in r.items()} for r in self.rows]}


def _make_run(cfg, N, T, sigma, problem):
    exp = cfg.experiment
    if exp == "mixture":
        return MixtureRun(cfg.sampler, N, T, sigma, cfg.D, cfg.burn_in)
    if exp == "factorized":
        return FactorizedRun(cfg.sampler, N, T, cfg.eta, cfg.sigma_p, cfg.burn_in)
    if exp == "rss":
        return RSSRun(cfg.sampler, N, T, sigma, problem, cfg.burn_in)
    cls = GPRun if exp == "gp" else WSNRun
    return cls(cfg.sampler, N, T, sigma, problem, cfg.burn_in, cfg.C)


def run_experiment(cfg):
    """Run every cell of ``cfg`` and return an :class:`ExperimentResult`."""
    label = None
    problem = None
    if cfg.experiment == "mixture":
        truth = mixture_truth(cfg.D)
    elif cfg.experiment == "factorized":
        truth = benchmark_factorized_target().mu
    elif cfg.experiment == "gp":
        problem, truth = gp_problem(cfg.data_seed, cfg.grid_size)
    elif cfg.experiment == "wsn":
        problem, truth = wsn_problem(cfg.data_seed)
    else:
        problem, truth = rss_problem(cfg.data_seed, cfg.grid_size)
        label = RSS_LABEL
    swept = cfg.swept()
    rows = []
    for N, T, sigma in cfg.cells():
        logger.info("%s/%s N=%d T=%d sigma=%g runs=%d", cfg.experiment, cfg.sampler, N, T, sigma, cfg.runs)
        res = mse_harness(_make_run(cfg, N, T, sigma, problem), truth, cfg.runs, cfg.seed, cfg.jobs)
        E = int(round(res.stats["E"]))
        if cfg.budget is not None and E != cfg.budget:
            raise ConfigurationError(f"cell N={N} T={T} used E={E}, expected {cfg.budget}")
        value = {"N": N, "T": T, "sigma": sigma}[swept]
        rows.append({"param_name": swept, "param_value": value, "N": N, "T": T, "mse": res.mse,
                     "stderr": res.stderr, "ar": res.stats.get("ar", float("nan")),
                     "ess_ratio": res.stats.get("ess_ratio", float("nan")), "E": E})
    return ExperimentResult(cfg, rows, np.asarray(truth), label)
