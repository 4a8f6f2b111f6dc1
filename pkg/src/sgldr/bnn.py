"""Bayesian regression network: one hidden layer of 50 ReLU units, Gaussian
likelihood with latent log-precision, manual backpropagation, and the
minibatch posterior-gradient estimator grad log p(z) + (N/|B|) sum grad log p(D_i|z).

Priors: N(0, 1) on all weights and biases; Gamma(1, 0.1) on the noise
precision, parameterized through log-precision with its Jacobian term.
"""
import csv
import math
from dataclasses import dataclass

import numpy as np

from .targets import TargetDistribution, TargetError

N_HIDDEN = 50
GAMMA_SHAPE = 1.0
GAMMA_RATE = 0.1


class DataError(ValueError):
    pass


def param_count(d_in, n_hidden=N_HIDDEN):
    return d_in * n_hidden + n_hidden + n_hidden + 1 + 1


def unpack(v, d_in, n_hidden=N_HIDDEN):
    """Split the flat vector into (W1, b1, W2, b2, log_precision)."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (param_count(d_in, n_hidden),):
        raise TargetError(
            f"parameter vector must have length {param_count(d_in, n_hidden)}, got {v.shape}"
        )
    i = 0
    W1 = v[i:i + d_in * n_hidden].reshape(n_hidden, d_in)
    i += d_in * n_hidden
    b1 = v[i:i + n_hidden]
    i += n_hidden
    W2 = v[i:i + n_hidden]
    i += n_hidden
    b2 = v[i]
    log_prec = v[i + 1]
    return W1, b1, W2, b2, log_prec


def pack(W1, b1, W2, b2, log_prec):
    return np.concatenate(
        [np.ravel(W1), np.ravel(b1), np.ravel(W2), [float(b2)], [float(log_prec)]]
    )


def forward(params, x, d_in=None, n_hidden=N_HIDDEN):
    """Scalar network output W2 . relu(W1 x + b1) + b2."""
    x = np.asarray(x, dtype=np.float64)
    if d_in is None:
        d_in = x.shape[-1]
    if x.shape != (d_in,):
        raise TargetError(f"input must have shape ({d_in},), got {x.shape}")
    W1, b1, W2, b2, _ = unpack(params, d_in, n_hidden)
    return float(W2 @ np.maximum(W1 @ x + b1, 0.0) + b2)


def forward_batch(params, X, n_hidden=N_HIDDEN):
    X = np.asarray(X, dtype=np.float64)
    W1, b1, W2, b2, _ = unpack(params, X.shape[1], n_hidden)
    return np.maximum(X @ W1.T + b1, 0.0) @ W2 + b2


@dataclass
class RegressionDataset:
    """Standardized regression data with a seeded train/test split.

    Features and target are standardized with TRAIN statistics only;
    constant columns map to zero with a unit divisor.
    """

    features: np.ndarray  # N x d_in, standardized
    targets: np.ndarray  # N, standardized
    feature_mean: np.ndarray
    feature_std: np.ndarray
    target_mean: float
    target_std: float
    train_idx: np.ndarray
    test_idx: np.ndarray

    @property
    def d_in(self):
        return self.features.shape[1]

    @property
    def n_train(self):
        return self.train_idx.size

    def train_xy(self):
        return self.features[self.train_idx], self.targets[self.train_idx]

    def test_xy(self):
        return self.features[self.test_idx], self.targets[self.test_idx]

    def denormalize_y(self, y):
        return y * self.target_std + self.target_mean


def _safe_std(x, axis=0):
    s = x.std(axis=axis)
    return np.where(s < 1e-12, 1.0, s)


def build_dataset(features, targets, split_seed=0, test_fraction=0.1):
    features = np.asarray(features, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    n = features.shape[0]
    if n < 2:
        raise DataError("need at least two rows to split")
    rng = np.random.default_rng(split_seed)
    perm = rng.permutation(n)
    n_test = max(1, int(round(n * test_fraction)))
    test_idx, train_idx = np.sort(perm[:n_test]), np.sort(perm[n_test:])
    fm = features[train_idx].mean(axis=0)
    fs = _safe_std(features[train_idx])
    tm = float(targets[train_idx].mean())
    ts = float(_safe_std(targets[train_idx][:, None])[0])
    return RegressionDataset(
        features=(features - fm) / fs,
        targets=(targets - tm) / ts,
        feature_mean=fm,
        feature_std=fs,
        target_mean=tm,
        target_std=ts,
        train_idx=train_idx,
        test_idx=test_idx,
    )


def load_uci_csv(path, target_column, split_seed=0, test_fraction=0.1):
    """Numeric CSV with header; standardize on train stats, seeded 90/10 split."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if target_column not in header:
            raise DataError(f"target column {target_column!r} not in header {header}")
        tcol = header.index(target_column)
        rows = []
        for rnum, row in enumerate(reader, start=2):
            try:
                rows.append([float(v) for v in row])
            except ValueError as err:
                col = next(i for i, v in enumerate(row) if not _is_float(v))
                raise DataError(
                    f"non-numeric cell at row {rnum}, column {header[col]!r}: {row[col]!r}"
                ) from err
    data = np.array(rows)
    y = data[:, tcol]
    X = np.delete(data, tcol, axis=1)
    return build_dataset(X, y, split_seed=split_seed, test_fraction=test_fraction)


def _is_float(v):
    try:
        float(v)
        return True
    except ValueError:
        return False


def _log_prior_and_grad(params, d_in):
    W1, b1, W2, b2, log_prec = unpack(params, d_in)
    weights = params[:-1]
    prec = math.exp(log_prec)
    # N(0,1) on weights/biases; Gamma(shape, rate) on precision via log_prec,
    # including the exp Jacobian: log p(theta) = shape*theta - rate*e^theta + const
    logp = -0.5 * float(weights @ weights) + GAMMA_SHAPE * log_prec - GAMMA_RATE * prec
    grad = np.empty_like(params)
    grad[:-1] = -weights
    grad[-1] = GAMMA_SHAPE - GAMMA_RATE * prec
    return logp, grad


def _log_lik_and_grad(params, X, y):
    """Summed Gaussian log-likelihood over (X, y) and its parameter gradient."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d_in = X.shape
    W1, b1, W2, b2, log_prec = unpack(params, d_in)
    prec = math.exp(log_prec)

    pre = X @ W1.T + b1  # n x H
    hidden = np.maximum(pre, 0.0)
    pred = hidden @ W2 + b2
    resid = y - pred
    logp = 0.5 * n * (log_prec - math.log(2.0 * math.pi)) - 0.5 * prec * float(resid @ resid)

    dpred = prec * resid  # d logp / d pred_i
    gW2 = hidden.T @ dpred
    gb2 = float(dpred.sum())
    back = np.where(pre > 0.0, dpred[:, None] * W2[None, :], 0.0)  # n x H
    gW1 = back.T @ X
    gb1 = back.sum(axis=0)
    glog_prec = 0.5 * n - 0.5 * prec * float(resid @ resid)
    return logp, pack(gW1, gb1, gW2, gb2, glog_prec)


def log_posterior(params, dataset):
    X, y = dataset.train_xy()
    lp, _ = _log_prior_and_grad(params, dataset.d_in)
    ll, _ = _log_lik_and_grad(params, X, y)
    return lp + ll


def log_posterior_grad_minibatch(params, dataset, batch_indices):
    """Unbiased estimator: grad log p(z) + (N/|B|) sum_{i in B} grad log p(D_i|z)."""
    batch_indices = np.asarray(batch_indices, dtype=np.intp)
    if batch_indices.size == 0:
        raise TargetError("minibatch must be non-empty")
    X, y = dataset.train_xy()
    _, gprior = _log_prior_and_grad(params, dataset.d_in)
    _, glik = _log_lik_and_grad(params, X[batch_indices], y[batch_indices])
    scale = dataset.n_train / batch_indices.size
    return gprior + scale * glik


class BnnTarget(TargetDistribution):
    """Posterior over network parameters as a sampling target.

    With minibatch_size set, each sampler iteration draws one batch (shared by
    all particles) via prepare_step; otherwise gradients use the full data.
    """

    def __init__(self, dataset, minibatch_size=100):
        self.dataset = dataset
        self.dim = param_count(dataset.d_in)
        self.name = "bnn"
        n = dataset.n_train
        self.minibatch_size = None if (minibatch_size is None or n <= minibatch_size) else minibatch_size
        self._batch = None

    def log_density(self, z):
        return log_posterior(self._check(z), self.dataset)

    def grad_log_density(self, z):
        z = self._check(z)
        X, y = self.dataset.train_xy()
        idx = self._batch if self._batch is not None else np.arange(self.dataset.n_train)
        return log_posterior_grad_minibatch(z, self.dataset, idx)

    def prepare_step(self, iteration, rng):
        if self.minibatch_size is not None:
            self._batch = rng.choice(
                self.dataset.n_train, size=self.minibatch_size, replace=False
            )

    def init_sample(self, rng, count):
        """Fan-in-scaled Gaussian weights, zero biases, unit noise precision.

        A raw prior draw (unit-variance weights) produces initial network
        outputs with standard deviation ~sqrt(n_hidden) in normalized target
        units, which short runs cannot recover from.  The scaled init keeps
        initial predictions near the target mean.
        """
        d_in = self.dataset.d_in
        out = np.empty((count, self.dim))
        for i in range(count):
            W1 = rng.standard_normal((N_HIDDEN, d_in)) / math.sqrt(d_in)
            W2 = rng.standard_normal(N_HIDDEN) / math.sqrt(N_HIDDEN)
            out[i] = pack(W1, np.zeros(N_HIDDEN), W2, 0.0, 0.0)
        return out


def predict(trace, x, dataset):
    """Posterior predictive mean and variance at one input, in original units."""
    if not trace.snapshots:
        raise TargetError("trace is empty")
    x = (np.asarray(x, dtype=np.float64) - dataset.feature_mean) / dataset.feature_std
    preds, noise_vars = [], []
    for snap in trace.snapshots:
        for p in range(snap.shape[0]):
            params = snap[p]
            preds.append(forward(params, x, d_in=dataset.d_in))
            noise_vars.append(math.exp(-params[-1]))
    preds = dataset.denormalize_y(np.array(preds))
    noise = np.mean(noise_vars) * dataset.target_std ** 2
    return float(preds.mean()), float(preds.var() + noise)


def evaluate(trace, dataset):
    """(test RMSE in original units, mean test log-likelihood)."""
    if dataset.test_idx.size == 0:
        raise DataError("test split is empty")
    if not trace.snapshots:
        raise TargetError("trace is empty")
    Xte, yte = dataset.test_xy()
    yte_orig = dataset.denormalize_y(yte)
    preds, noise_vars = [], []
    for snap in trace.snapshots:
        for p in range(snap.shape[0]):
            params = snap[p]
            preds.append(forward_batch(params, Xte))
            noise_vars.append(math.exp(-params[-1]))
    preds = dataset.denormalize_y(np.array(preds))  # S x n_test
    noise = np.array(noise_vars) * dataset.target_std ** 2  # S
    mean_pred = preds.mean(axis=0)
    rmse = float(np.sqrt(np.mean((mean_pred - yte_orig) ** 2)))
    # log of the predictive mixture density, averaged over test points
    log_comp = (
        -0.5 * np.log(2.0 * math.pi * noise)[:, None]
        - 0.5 * (yte_orig[None, :] - preds) ** 2 / noise[:, None]
    )
    from scipy.special import logsumexp

    test_ll = float(np.mean(logsumexp(log_comp, axis=0) - math.log(preds.shape[0])))
    return rmse, test_ll


def select_step_size(dataset, grid, run_fn, val_fraction=0.1, seed=0):
    """Pick the grid step size with lowest RMSE on a validation fold carved
    from the training split. `run_fn(train_dataset, eps)` returns a trace."""
    rng = np.random.default_rng(seed)
    train = dataset.train_idx.copy()
    rng.shuffle(train)
    n_val = max(1, int(round(train.size * val_fraction)))
    val_idx, sub_idx = np.sort(train[:n_val]), np.sort(train[n_val:])
    inner = RegressionDataset(
        features=dataset.features,
        targets=dataset.targets,
        feature_mean=dataset.feature_mean,
        feature_std=dataset.feature_std,
        target_mean=dataset.target_mean,
        target_std=dataset.target_std,
        train_idx=sub_idx,
        test_idx=val_idx,
    )
    best_eps, best_rmse = None, math.inf
    for eps in grid:
        trace = run_fn(inner, eps)
        rmse, _ = evaluate(trace, inner)
        if rmse < best_rmse:
            best_eps, best_rmse = eps, rmse
    return best_eps, best_rmse
