"""Target densities.

Every density is exposed in the log domain only.  A target evaluates a single
point of shape ``(D,)`` to a float, or a batch of shape ``(n, D)`` to an array
of shape ``(n,)``.  Points outside the declared support evaluate to ``-inf``.
"""

import numpy as np
from scipy.linalg import lapack

from .exceptions import ConfigurationError, SingularGeometryError, SingularKernelError

LOG_2PI = np.log(2.0 * np.pi)

# Sensor layouts and true parameters of the two localization problems.
WSN_SENSORS = np.array([[3.0, -8.0], [8.0, 10.0], [-4.0, -6.0], [-8.0, 1.0], [10.0, 0.0], [0.0, 10.0]])
WSN_Z_STAR = np.array([2.5, 2.5])
WSN_ZETA_STAR = np.array([1.0, 2.0, 1.0, 0.5, 3.0, 0.2])
RSS_SENSORS = np.array([[0.5, 1.0], [3.5, 1.0], [2.0, 3.0]])
RSS_Z = np.array([2.5, 2.0])
RSS_KAPPA = -26.58
RSS_ZETA = 4.73


def path_loss(z, sensors):
    """``20 log10 ||z - h_j||`` for every sensor; ``z`` is ``(2,)`` or ``(n, 2)``."""
    diff = np.asarray(z, dtype=float)[..., None, :] - sensors
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10((diff * diff).sum(axis=-1))


class LogTarget:
    """Unnormalized log density on R^D.

    Parameters
    ----------
    dim : int
        Dimension D.
    log_pi : callable, optional
        Maps an ``(n, D)`` array of in-support points to ``(n,)`` log values.
        Subclasses override :meth:`_log_density` instead.
    support : tuple of array_like, optional
        ``(lower, upper)`` bounds of an axis-aligned box.
    grad_log_pi : callable, optional
        Maps a ``(D,)`` point to the gradient of the log density.
    """

    def __init__(self, dim, log_pi=None, support=None, grad_log_pi=None):
        if int(dim) != dim or dim < 1:
            raise ConfigurationError(f"dim must be a positive integer, got {dim!r}")
        self.dim = int(dim)
        self._fn = log_pi
        self._grad_fn = grad_log_pi
        if support is not None:
            lower, upper = (np.broadcast_to(np.asarray(b, dtype=float), (self.dim,)).copy() for b in support)
            support = (lower, upper)
        self.support = support

    def in_support(self, theta):
        theta = np.atleast_2d(theta)
        if self.support is None:
            return np.ones(len(theta), dtype=bool)
        lower, upper = self.support
        return np.all((theta >= lower) & (theta <= upper), axis=1)

    def log_pi(self, theta):
        theta = np.asarray(theta, dtype=float)
        single = theta.ndim == 1
        batch = theta.reshape(-1, self.dim)
        out = np.full(len(batch), -np.inf)
        inside = self.in_support(batch) & np.all(np.isfinite(batch), axis=1)
        if inside.any():
            out[inside] = self._log_density(batch[inside])
        return float(out[0]) if single else out

    __call__ = log_pi

    def _log_density(self, theta):
        if self._fn is None:
            raise NotImplementedError
        return np.asarray(self._fn(theta), dtype=float)

    @property
    def has_gradient(self):
        return self._grad_fn is not None or type(self)._grad is not LogTarget._grad

    def grad_log_pi(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self._grad_fn is not None:
            return np.asarray(self._grad_fn(theta), dtype=float)
        return self._grad(theta)

    def _grad(self, theta):
        raise NotImplementedError("target has no analytic gradient")


class FactorizedTarget(LogTarget):
    """Target written as ``gamma_1(x_1) prod_d gamma_d(x_d | x_{1:d-1})``.

    Subclasses implement :meth:`log_gamma`.  Steps are indexed from 0.
    """

    def log_gamma(self, d, x, history):
        """Log factor of step ``d``.

        ``x`` has shape ``(n,)`` (the values of x_d) and ``history`` has shape
        ``(n, d)`` (the values x_{1:d-1}); returns shape ``(n,)``.
        """
        raise NotImplementedError

    def _log_density(self, theta):
        total = self.log_gamma(0, theta[:, 0], theta[:, :0])
        for d in range(1, self.dim):
            total = total + self.log_gamma(d, theta[:, d], theta[:, :d])
        return total


class FactorizedGaussianTarget(FactorizedTarget):
    """Product of independent normals N(x_d | mu_d, sigma^2); normalized, Z = 1."""

    def __init__(self, mu, sigma):
        mu = np.asarray(mu, dtype=float)
        if sigma <= 0:
            raise ConfigurationError("sigma must be positive")
        super().__init__(len(mu))
        self.mu = mu
        self.sigma = float(sigma)

    def log_gamma(self, d, x, history):
        return -0.5 * LOG_2PI - np.log(self.sigma) - 0.5 * ((x - self.mu[d]) / self.sigma) ** 2


def benchmark_factorized_target():
    """The D = 10 product-of-normals target with sigma = 1/2."""
    mu = np.array([2.0] * 3 + [4.0] * 4 + [-1.0] * 3)
    return FactorizedGaussianTarget(mu, 0.5)


class MixtureGaussianTarget(LogTarget):
    """Equally weighted mixture of isotropic normals N(mu_i, delta_i I)."""

    def __init__(self, means, variances):
        means = np.atleast_2d(np.asarray(means, dtype=float))
        variances = np.asarray(variances, dtype=float)
        if np.any(variances <= 0):
            raise ConfigurationError("component variances must be positive")
        super().__init__(means.shape[1])
        self.means = means
        self.variances = np.broadcast_to(variances, (len(means),)).copy()
        self.log_weights = np.full(len(means), -np.log(len(means)))

    def _component_logpdf(self, theta):
        # (n, K)
        sq = ((theta[:, None, :] - self.means[None]) ** 2).sum(axis=2)
        return (self.log_weights - 0.5 * self.dim * (LOG_2PI + np.log(self.variances))
                - 0.5 * sq / self.variances)

    def _log_density(self, theta):
        c = self._component_logpdf(theta)
        m = c.max(axis=1, keepdims=True)
        return (m + np.log(np.exp(c - m).sum(axis=1, keepdims=True)))[:, 0]

    def _grad(self, theta):
        theta = np.atleast_2d(theta)
        c = self._component_logpdf(theta)
        r = np.exp(c - c.max(axis=1, keepdims=True))
        r /= r.sum(axis=1, keepdims=True)
        g = np.einsum("nk,nkd->nd", r, (self.means[None] - theta[:, None, :]) / self.variances[None, :, None])
        return g[0] if g.shape[0] == 1 else g

    def sample(self, rng, size):
        """Exact i.i.d. draws, shape ``(size, D)``."""
        k = rng.integers(len(self.means), size=size)
        return self.means[k] + np.sqrt(self.variances[k])[:, None] * rng.standard_normal((size, self.dim))


def benchmark_mixture(dim=1):
    """Three-component mixture with means -3, 0, 2 in every coordinate and variances 0.5."""
    means = np.array([[-3.0], [0.0], [2.0]]) * np.ones((1, dim))
    return MixtureGaussianTarget(means, [0.5, 0.5, 0.5])


def mixture_moments(target):
    """Analytic per-dimension mean and variance of a :class:`MixtureGaussianTarget`."""
    w = np.exp(target.log_weights)[:, None]
    mean = (w * target.means).sum(axis=0)
    second = (w * (target.variances[:, None] + target.means ** 2)).sum(axis=0)
    return mean, second - mean ** 2


# ---------------------------------------------------------------------------
# Gaussian-process hyperparameter posterior


def _pairwise_sq(Z):
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    diff = Z[:, None, :] - Z[None, :, :]
    return (diff ** 2).sum(axis=2)


def _gp_log_marginal_sq(delta, sigma, sq, y):
    C = np.exp(sq * (-0.5 / delta ** 2))
    C.flat[::len(y) + 1] += sigma ** 2
    chol, info = lapack.dpotrf(C, lower=1, clean=0, overwrite_a=1)
    if info != 0:
        raise SingularKernelError(f"K + sigma^2 I not positive definite at delta={delta}, sigma={sigma}")
    v, _ = lapack.dtrtrs(chol, y, lower=1)
    return float(-0.5 * (v @ v) - np.log(np.diag(chol)).sum())


def gp_log_marginal(delta, sigma, Z, y, box=20.0):
    """Log unnormalized posterior of (delta, sigma) under a flat prior on (0, box]^2.

    ``-0.5 y^T (K + sigma^2 I)^{-1} y - 0.5 log det(K + sigma^2 I)`` with the
    squared-exponential kernel of length-scale ``delta``; the additive constant
    is fixed to 0.  Evaluated through a Cholesky factor and one triangular
    solve.  Raises :class:`SingularKernelError` when the factorization fails.
    """
    if not (0.0 < delta <= box and 0.0 < sigma <= box):
        return -np.inf
    return _gp_log_marginal_sq(delta, sigma, _pairwise_sq(Z), np.asarray(y, dtype=float))


class GPPosteriorTarget(LogTarget):
    """Posterior of theta = [delta, sigma] for GP regression with data (Z, y).

    Factorization failures at numerically degenerate points map to ``-inf``
    so that a chain simply rejects them.
    """

    def __init__(self, Z, y, box=20.0):
        super().__init__(2, support=([0.0, 0.0], [box, box]))
        self.Z = np.asarray(Z, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.box = float(box)
        self._sq = _pairwise_sq(self.Z)

    def _log_density(self, theta):
        # A per-point LAPACK loop beats batched numpy Cholesky for P ~ 200.
        out = np.full(len(theta), -np.inf)
        for i, (delta, sigma) in enumerate(theta):
            if delta > 0.0 and sigma > 0.0:
                try:
                    out[i] = _gp_log_marginal_sq(delta, sigma, self._sq, self.y)
                except SingularKernelError:
                    pass
        return out


def generate_gp_data(seed, P, delta_star, sigma_star, L=1):
    """Draw P input/output pairs from the GP model.

    Inputs are uniform on [0, 10]^L.  The latent function is drawn through a
    symmetric eigen-factorization of the kernel matrix over the distinct inputs,
    so repeated inputs share one latent value exactly.
    """
    if P < 1:
        raise ConfigurationError("P must be >= 1")
    rng = np.random.default_rng(seed)
    Z = rng.uniform(0.0, 10.0, size=(P, L))
    uniq, inverse = np.unique(Z, axis=0, return_inverse=True)
    K = np.exp(-_pairwise_sq(uniq) / (2.0 * delta_star ** 2))
    evals, evecs = np.linalg.eigh(K)
    factor = evecs * np.sqrt(np.clip(evals, 0.0, None))
    f = (factor @ rng.standard_normal(len(uniq)))[np.ravel(inverse)]
    y = f + sigma_star * rng.standard_normal(P)
    return Z, y


def save_gp_data(path, Z, y):
    Z = np.asarray(Z, dtype=float).reshape(len(y), -1)
    header = ",".join([f"z_{i + 1}" for i in range(Z.shape[1])] + ["y"])
    np.savetxt(path, np.column_stack([Z, y]), delimiter=",", header=header, comments="", fmt="%.17g")


def load_gp_data(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, :-1], data[:, -1]


# ---------------------------------------------------------------------------
# Wireless-sensor-network localization


def wsn_log_posterior(z, zeta, Y, sensors=WSN_SENSORS, z_box=30.0, zeta_box=20.0, stats=None):
    """Log posterior of position ``z`` and noise scales ``zeta`` given ``Y``.

    Observations follow ``y_kj = 20 log10 ||z - h_j|| + N(0, zeta_j^2)`` with
    flat priors on [-z_box, z_box]^2 and (0, zeta_box]^NS.  A position equal to
    a sensor gives ``-inf``; pass a dict as ``stats`` to count those events
    under the key ``"singular"``.
    """
    z = np.asarray(z, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    if np.any(np.abs(z) > z_box) or np.any(zeta <= 0.0) or np.any(zeta > zeta_box):
        return -np.inf
    mean = path_loss(z, sensors)
    if not np.all(np.isfinite(mean)):
        if stats is not None:
            stats["singular"] = stats.get("singular", 0) + 1
        return -np.inf
    resid = np.asarray(Y, dtype=float) - mean
    return float(np.sum(-0.5 * (LOG_2PI + 2.0 * np.log(zeta)) - 0.5 * (resid / zeta) ** 2))


class WSNTarget(LogTarget):
    """Posterior over theta = [z_1, z_2, zeta_1..zeta_NS]."""

    def __init__(self, Y, sensors=WSN_SENSORS, z_box=30.0, zeta_box=20.0):
        self.sensors = np.asarray(sensors, dtype=float)
        self.Y = np.asarray(Y, dtype=float)
        ns = len(self.sensors)
        lower = np.r_[-z_box, -z_box, np.zeros(ns)]
        upper = np.r_[z_box, z_box, np.full(ns, zeta_box)]
        super().__init__(2 + ns, support=(lower, upper))

    def _log_density(self, theta):
        zeta = theta[:, 2:]
        out = np.full(len(theta), -np.inf)
        ok = np.all(zeta > 0.0, axis=1)
        mean = path_loss(theta[:, :2], self.sensors)  # (n, NS)
        ok &= np.all(np.isfinite(mean), axis=1)
        if ok.any():
            resid = (self.Y[None] - mean[ok, None, :]) / zeta[ok, None, :]
            n_obs = self.Y.shape[0]
            out[ok] = (-0.5 * n_obs * (LOG_2PI * zeta.shape[1] + 2.0 * np.log(zeta[ok]).sum(axis=1))
                       - 0.5 * (resid ** 2).sum(axis=(1, 2)))
        return out


def generate_wsn_observations(seed, z_star=WSN_Z_STAR, zeta_star=WSN_ZETA_STAR, N_O=20, sensors=WSN_SENSORS):
    """``N_O x N_S`` observation matrix from the path-loss model."""
    mean = path_loss(z_star, np.asarray(sensors, dtype=float))
    if not np.all(np.isfinite(mean)):
        raise SingularGeometryError("z_star coincides with a sensor position")
    rng = np.random.default_rng(seed)
    return mean + rng.standard_normal((N_O, len(mean))) * np.asarray(zeta_star, dtype=float)


def save_wsn_observations(path, Y):
    header = ",".join(f"sensor_{j + 1}" for j in range(Y.shape[1]))
    np.savetxt(path, Y, delimiter=",", header=header, comments="", fmt="%.17g")


def load_wsn_observations(path):
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


# ---------------------------------------------------------------------------
# Received-signal-strength localization with a fitted model


class RSSTarget(LogTarget):
    """Posterior of a 2-D position under ``y_i = kappa - 20 log10 ||z - h_i|| + N(0, zeta^2)``.

    Flat prior on the square ``[0, side]^2``.
    """

    def __init__(self, Y, sensors=RSS_SENSORS, kappa=RSS_KAPPA, zeta=RSS_ZETA, side=4.0):
        super().__init__(2, support=([0.0, 0.0], [side, side]))
        self.Y = np.asarray(Y, dtype=float)
        self.sensors = np.asarray(sensors, dtype=float)
        self.kappa = float(kappa)
        self.zeta = float(zeta)
        self._n_obs = len(self.Y)
        self._y_bar = self.Y.mean(axis=0)
        self._ss = float(((self.Y - self._y_bar) ** 2).sum())

    def _log_density(self, theta):
        mean = self.kappa - path_loss(theta, self.sensors)  # (n, S)
        # Sum of squares split into the part around the sample mean and the rest.
        out = -0.5 * (self._n_obs * ((self._y_bar - mean) ** 2).sum(axis=1) + self._ss) / self.zeta ** 2
        return np.where(np.isfinite(out), out, -np.inf)

    def _grad(self, theta):
        theta = np.asarray(theta, dtype=float)
        diff = theta - self.sensors  # (S, 2)
        r2 = (diff ** 2).sum(axis=1)
        mean = self.kappa - 10.0 * np.log10(r2)
        resid_sum = (self.Y - mean).sum(axis=0)  # (S,)
        # d mean / dz = -20 / ln(10) * diff / r^2
        dmean = -(20.0 / np.log(10.0)) * diff / r2[:, None]
        return (resid_sum[:, None] * dmean).sum(axis=0) / self.zeta ** 2


def generate_rss_observations(seed, z=RSS_Z, kappa=RSS_KAPPA, zeta=RSS_ZETA, N_O=5, sensors=RSS_SENSORS):
    sensors = np.asarray(sensors, dtype=float)
    mean = kappa - path_loss(z, sensors)
    if not np.all(np.isfinite(mean)):
        raise SingularGeometryError("position coincides with a sensor")
    rng = np.random.default_rng(seed)
    return mean + zeta * rng.standard_normal((N_O, len(sensors)))


def grid_posterior_mean(target, lower, upper, n, batch=4096):
    """Posterior mean of a 2-D target by midpoint quadrature on an ``n x n`` grid."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    axes = [lower[i] + (np.arange(n) + 0.5) * (upper[i] - lower[i]) / n for i in range(2)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 2)
    logp = np.concatenate([target.log_pi(pts[i:i + batch]) for i in range(0, len(pts), batch)])
    w = np.exp(logp - logp.max())
    return (w[:, None] * pts).sum(axis=0) / w.sum()


class DiscreteTarget(LogTarget):
    """Unnormalized mass on the integer states 0..K-1, stored as length-1 vectors."""

    def __init__(self, masses):
        masses = np.asarray(masses, dtype=float)
        if masses.ndim != 1 or np.any(masses < 0) or not np.any(masses > 0):
            raise ConfigurationError("masses must be a non-negative, non-zero vector")
        # No box: a uniform draw from one would almost never hit a state.
        super().__init__(1)
        self.masses = masses
        with np.errstate(divide="ignore"):
            self._log = np.log(masses)

    @property
    def pi_bar(self):
        return self.masses / self.masses.sum()

    def _log_density(self, theta):
        x = theta[:, 0]
        out = np.full(len(x), -np.inf)
        ok = (x == np.round(x)) & (x >= 0) & (x < len(self.masses))
        out[ok] = self._log[x[ok].astype(int)]
        return out


class LinearGaussianStateSpace(FactorizedTarget):
    """Joint density of a scalar random walk and its noisy observations.

    ``x_1 ~ N(0, s0^2)``, ``x_d = a x_{d-1} + N(0, s^2)`` and
    ``y_d = x_d + N(0, lam^2)``; the factor of step ``d`` is the transition
    density times the observation likelihood, so the normalizing constant is
    the marginal likelihood ``p(y_{1:D})``.
    """

    def __init__(self, y, a=0.9, s=1.0, lam=1.0, s0=1.0):
        self.y = np.asarray(y, dtype=float)
        super().__init__(len(self.y))
        self.a, self.s, self.lam, self.s0 = float(a), float(s), float(lam), float(s0)

    def log_gamma(self, d, x, history):
        if d == 0:
            loc, scale = 0.0, self.s0
        else:
            loc, scale = self.a * history[:, d - 1], self.s
        trans = -0.5 * LOG_2PI - np.log(scale) - 0.5 * ((x - loc) / scale) ** 2
        obs = -0.5 * LOG_2PI - np.log(self.lam) - 0.5 * ((self.y[d] - x) / self.lam) ** 2
        return trans + obs

    def kalman_log_marginal(self):
        """Exact ``log p(y_{1:D})`` by the Kalman filter."""
        m, v = 0.0, self.s0 ** 2
        total = 0.0
        for d, yd in enumerate(self.y):
            if d > 0:
                m, v = self.a * m, self.a ** 2 * v + self.s ** 2
            S = v + self.lam ** 2
            total += -0.5 * (LOG_2PI + np.log(S) + (yd - m) ** 2 / S)
            gain = v / S
            m, v = m + gain * (yd - m), (1.0 - gain) * v
        return total
