"""Target distributions with analytic log-densities and gradients.

Log-densities are unnormalized (constant offsets dropped); the samplers
only consume gradients. The exponential-mixture target is sampled in
log-space, so the sampler never sees the positivity constraint.
"""
import math

import numpy as np
from scipy.special import logsumexp


class TargetError(ValueError):
    pass


class TargetDistribution:
    """Base class: a named d-dimensional unnormalized log-density."""

    dim: int
    name: str

    def log_density(self, z):
        raise NotImplementedError

    def grad_log_density(self, z):
        raise NotImplementedError

    def _check(self, z):
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.dim,):
            raise TargetError(
                f"{self.name}: expected point of shape ({self.dim},), got {z.shape}"
            )
        return z

    def ensemble_grad(self, particles):
        """Gradients for a K x d array of particles. Subclasses vectorize."""
        return np.stack([self.grad_log_density(z) for z in particles])

    def init_sample(self, rng, count):
        """Default init policy: iid standard normal in the sampling space."""
        return rng.standard_normal((count, self.dim))

    def prepare_step(self, iteration, rng):
        """Hook for stochastic-gradient targets; no-op for analytic ones."""

    def describe(self):
        """Config-shaped description, enough to rebuild the target."""
        return {"name": self.name}


class StandardGaussian(TargetDistribution):
    """N(0, I_d) calibration target: log pi = -||z||^2 / 2."""

    def __init__(self, dim=1):
        if dim < 1:
            raise TargetError("dim must be >= 1")
        self.dim = int(dim)
        self.name = "gauss-std"

    def describe(self):
        return {"name": self.name, "dim": self.dim}

    def log_density(self, z):
        z = self._check(z)
        return -0.5 * float(z @ z)

    def grad_log_density(self, z):
        return -self._check(z)

    def ensemble_grad(self, particles):
        return -np.asarray(particles, dtype=np.float64)


class MixtureOfExponentials(TargetDistribution):
    """Mixture of exponentials on (0, inf): p(z) = sum_i pi_i lam_i exp(-lam_i z)."""

    def __init__(self, rates=(1.5, 0.5), weights=(1.0 / 3.0, 2.0 / 3.0)):
        rates = np.asarray(rates, dtype=np.float64)
        weights = np.asarray(weights, dtype=np.float64)
        if rates.shape != weights.shape or rates.ndim != 1:
            raise TargetError("rates and weights must be 1-d and equally long")
        if np.any(rates <= 0):
            raise TargetError("all rates must be strictly positive")
        if abs(weights.sum() - 1.0) > 1e-12 or np.any(weights < 0):
            raise TargetError("weights must be nonnegative and sum to 1")
        self.rates = rates
        self.weights = weights
        self.dim = 1
        self.name = "moe"

    def log_density(self, z):
        z = self._check(z)
        x = float(z[0])
        if x <= 0:
            return -np.inf
        return float(logsumexp(np.log(self.weights) + np.log(self.rates) - self.rates * x))

    def grad_log_density(self, z):
        z = self._check(z)
        x = float(z[0])
        if x <= 0:
            raise TargetError("moe gradient requested outside support z > 0")
        logits = np.log(self.weights) + np.log(self.rates) - self.rates * x
        w = np.exp(logits - logsumexp(logits))
        return np.array([-float(w @ self.rates)])

    def analytic_moment(self, n):
        """E[z^n] = sum_i pi_i n! / lam_i^n."""
        if n < 1 or int(n) != n:
            raise TargetError("moment order must be a positive integer")
        return float(np.sum(self.weights * math.factorial(int(n)) / self.rates ** n))

    def describe(self):
        return {"name": "moe", "rates": self.rates.tolist(), "weights": self.weights.tolist()}

    def sample_base(self, rng, count):
        """Exact draws from the base mixture by inverse CDF, for test oracles."""
        comp = rng.choice(len(self.rates), size=count, p=self.weights)
        u = rng.random(count)
        return -np.log1p(-u) / self.rates[comp]


class LogReparameterizedTarget(TargetDistribution):
    """Change of variables y = log z for a base target on (0, inf).

    p(y) = p_base(exp(y)) * exp(y), so log p(y) = log p_base(exp(y)) + y.
    """

    def __init__(self, base):
        if base.dim != 1:
            raise TargetError("log reparameterization implemented for 1-d bases")
        self.base = base
        self.dim = 1
        self.name = base.name + "-log"

    def describe(self):
        return self.base.describe()

    def log_density(self, z):
        z = self._check(z)
        y = float(z[0])
        return self.base.log_density(np.array([math.exp(y)])) + y

    def grad_log_density(self, z):
        z = self._check(z)
        y = float(z[0])
        x = math.exp(y)
        gbase = self.base.grad_log_density(np.array([x]))[0]
        return np.array([gbase * x + 1.0])

    def ensemble_grad(self, particles):
        p = np.asarray(particles, dtype=np.float64)
        if isinstance(self.base, MixtureOfExponentials):
            x = np.exp(p[:, 0])
            logits = (
                np.log(self.base.weights)[None, :]
                + np.log(self.base.rates)[None, :]
                - self.base.rates[None, :] * x[:, None]
            )
            w = np.exp(logits - logsumexp(logits, axis=1, keepdims=True))
            return (-(w @ self.base.rates) * x + 1.0)[:, None]
        return super().ensemble_grad(p)


class GaussianGridMixture(TargetDistribution):
    """3 x 3 grid of isotropic 2-d Gaussians at {-2, 0, 2}^2, Sigma = diag(0.1, 0.1)."""

    def __init__(self, spacing=2.0, variance=0.1):
        ticks = np.array([-spacing, 0.0, spacing])
        self.centers = np.array([(a, b) for a in ticks for b in ticks])
        self.covariance_diagonal = np.array([variance, variance])
        self.dim = 2
        self.name = "mog3x3"

    def describe(self):
        return {"name": self.name}

    def _logits(self, z):
        diff = self.centers - z[None, :]
        return -0.5 * np.sum(diff ** 2 / self.covariance_diagonal[None, :], axis=1)

    def log_density(self, z):
        z = self._check(z)
        return float(logsumexp(self._logits(z)))

    def grad_log_density(self, z):
        z = self._check(z)
        logits = self._logits(z)
        w = np.exp(logits - logsumexp(logits))
        return (w @ (self.centers - z[None, :])) / self.covariance_diagonal

    def ensemble_grad(self, particles):
        p = np.asarray(particles, dtype=np.float64)
        diff = self.centers[None, :, :] - p[:, None, :]  # K x 9 x 2
        logits = -0.5 * np.sum(diff ** 2 / self.covariance_diagonal, axis=2)
        w = np.exp(logits - logsumexp(logits, axis=1, keepdims=True))
        return np.einsum("km,kmc->kc", w, diff) / self.covariance_diagonal


def finite_diff_gradient(target, z, h=1e-5):
    """Central-difference gradient of log_density, the analytic-gradient oracle."""
    if h <= 0:
        raise TargetError("finite-difference step must be positive")
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    for i in range(z.size):
        zp, zm = z.copy(), z.copy()
        zp[i] += h
        zm[i] -= h
        fp, fm = target.log_density(zp), target.log_density(zm)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise TargetError(f"non-finite log-density at finite-difference probe near {z}")
        out[i] = (fp - fm) / (2.0 * h)
    return out


def make_target(name, params=None):
    """Build a target from its config name; see also sgldr.bnn.BnnTarget."""
    params = dict(params or {})
    if name == "moe":
        base = MixtureOfExponentials(
            rates=params.pop("rates", (1.5, 0.5)),
            weights=params.pop("weights", (1.0 / 3.0, 2.0 / 3.0)),
        )
        _reject_extra(name, params)
        return LogReparameterizedTarget(base)
    if name == "mog3x3":
        _reject_extra(name, params)
        return GaussianGridMixture()
    if name == "gauss-std":
        dim = params.pop("dim", 1)
        _reject_extra(name, params)
        return StandardGaussian(dim)
    raise TargetError(f"unknown target name: {name!r}")


def target_truth(target):
    """(truth vector, per-sample transform) for the first-moment error metric."""
    if isinstance(target, LogReparameterizedTarget) and isinstance(
        target.base, MixtureOfExponentials
    ):
        return np.array([target.base.analytic_moment(1)]), np.exp
    if isinstance(target, GaussianGridMixture):
        return np.zeros(2), None
    if isinstance(target, StandardGaussian):
        return np.zeros(target.dim), None
    raise TargetError(f"no analytic first moment known for target {target.name!r}")


def _reject_extra(name, params):
    if params:
        raise TargetError(f"unknown parameters for target {name!r}: {sorted(params)}")
