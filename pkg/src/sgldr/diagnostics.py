"""Trace diagnostics: effective sample size, moment error, mode coverage."""
from dataclasses import dataclass

import numpy as np


class DiagnosticsError(ValueError):
    pass


@dataclass(frozen=True)
class EssReport:
    per_particle_ess: np.ndarray
    mean_ess: float
    min_ess: float
    ess_per_second: float


@dataclass(frozen=True)
class MomentErrorReport:
    estimate: np.ndarray
    truth: np.ndarray
    error: float


def ess_univariate(series):
    """ESS = n / (1 + 2 sum_k rho_k) with Geyer initial-positive-sequence
    truncation of the empirical autocorrelations. Clipped to [1, n].
    """
    x = np.asarray(series, dtype=np.float64)
    n = x.size
    if n < 10:
        raise DiagnosticsError("ESS needs a series of at least 10 values")
    var = np.var(x)
    if var == 0.0:
        return 1.0  # constant series: degenerate
    # autocovariance via FFT, biased normalization by n
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x - x.mean(), m)
    acov = np.fft.irfft(f * np.conj(f), m)[:n].real / n
    rho = acov / acov[0]
    # sum consecutive pairs while their sum stays positive
    tau = -1.0
    for k in range(0, n - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
    ess = n / max(tau, 1.0 / n)
    return float(np.clip(ess, 1.0, n))


def ess_report(trace, coord=0):
    """Per-particle ESS on one coordinate of each particle's snapshot series."""
    K = trace.particle_count
    per = np.array([ess_univariate(trace.particle_series(p, coord)) for p in range(K)])
    seconds = trace.meta.get("post_burnin_seconds", float("nan"))
    mean = float(per.mean())
    return EssReport(
        per_particle_ess=per,
        mean_ess=mean,
        min_ess=float(per.min()),
        ess_per_second=mean / seconds if seconds and seconds > 0 else float("nan"),
    )


def moment_error(trace, truth, transform=None):
    """||mean over all particles and snapshots of transform(z) - truth||_2."""
    if not trace.snapshots:
        raise DiagnosticsError("trace is empty")
    samples = trace.pooled()
    if transform is not None:
        samples = transform(samples)
    estimate = samples.mean(axis=0)
    truth = np.asarray(truth, dtype=np.float64)
    return MomentErrorReport(
        estimate=estimate, truth=truth, error=float(np.linalg.norm(estimate - truth))
    )


def mode_coverage(trace, centers, radius):
    """Number of centers with a final-snapshot particle within `radius`."""
    if radius <= 0:
        raise DiagnosticsError("radius must be positive")
    if not trace.snapshots:
        raise DiagnosticsError("trace is empty")
    final = trace.snapshots[-1]
    centers = np.asarray(centers, dtype=np.float64)
    dists = np.linalg.norm(centers[:, None, :] - final[None, :, :], axis=2)
    return int(np.sum(dists.min(axis=1) <= radius))
