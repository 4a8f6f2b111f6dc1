"""Update rules (parallel SGLD, SVGD, SGLD+R), correlated repulsion noise,
and the run loop with burn-in and thinned collection.

RNG discipline: a master 64-bit seed plus a Philox counter offset per
(purpose, iteration, particle) gives every particle its own stream each
step, so changing the particle count never perturbs other particles'
draws and runs are bit-reproducible.
"""
import csv
import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kernels import (
    KERNEL_MODES,
    MODE_IDENTITY,
    MODE_RBF_FIXED,
    MODE_RBF_MEDIAN,
    KernelState,
    build_kernel_state,
)

METHODS = ("sgld", "svgd", "sgld_r")

_PURPOSE_INIT = 0
_PURPOSE_STEP_NOISE = 1
_PURPOSE_DATA = 2


class ConfigError(ValueError):
    pass


class SamplerError(RuntimeError):
    def __init__(self, message, iteration=None):
        super().__init__(message if iteration is None
                         else f"{message} (iteration {iteration})")
        self.iteration = iteration


@dataclass(frozen=True)
class StepSchedule:
    """Constant step size eps, or polynomial a * (b + t)^(-gamma)."""

    kind: str = "constant"
    eps: float = 1e-3
    a: float = 1.0
    b: float = 1.0
    gamma: float = 0.0

    def validate(self):
        if self.kind not in ("constant", "polynomial"):
            raise ConfigError(f"unknown step-size kind {self.kind!r}")
        if self.kind == "constant" and self.eps <= 0:
            raise ConfigError("constant step size must be positive")
        if self.kind == "polynomial" and (self.a <= 0 or self.b <= 0):
            raise ConfigError("polynomial schedule requires a > 0 and b > 0")


def step_size(schedule, t):
    if t < 0:
        raise ConfigError("iteration index must be >= 0")
    if schedule.kind == "constant":
        return schedule.eps
    return schedule.a * (schedule.b + t) ** (-schedule.gamma)


@dataclass(frozen=True)
class SamplerConfig:
    method: str = "sgld_r"
    particle_count: int = 10
    schedule: StepSchedule = field(default_factory=StepSchedule)
    total_iterations: int = 1000
    burn_in: int = 500
    thin: int = 10
    kernel_mode: str = MODE_RBF_MEDIAN
    kernel_h: float | None = None
    noise_enabled: bool = True
    repulsion_cutoff_fraction: float = 1.0
    seed: int = 0

    def validate(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.particle_count < 1:
            raise ConfigError("particle_count must be >= 1")
        if not 0 <= self.burn_in < self.total_iterations:
            raise ConfigError("burn_in must satisfy 0 <= burn_in < total_iterations")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")
        if self.kernel_mode not in KERNEL_MODES:
            raise ConfigError(f"unknown kernel mode {self.kernel_mode!r}")
        if self.kernel_mode == MODE_RBF_FIXED and (self.kernel_h is None or self.kernel_h <= 0):
            raise ConfigError("kernel.h must be a positive number under rbf-fixed")
        if not 0.0 <= self.repulsion_cutoff_fraction <= 1.0:
            raise ConfigError("repulsion_cutoff_fraction must lie in [0, 1]")
        self.schedule.validate()

    def to_dict(self):
        return {
            "method": self.method,
            "particle_count": self.particle_count,
            "step_size": {
                "kind": self.schedule.kind,
                "eps": self.schedule.eps,
                "a": self.schedule.a,
                "b": self.schedule.b,
                "gamma": self.schedule.gamma,
            },
            "total_iterations": self.total_iterations,
            "burn_in": self.burn_in,
            "thin": self.thin,
            "kernel_mode": self.kernel_mode,
            "kernel_h": self.kernel_h,
            "noise_enabled": self.noise_enabled,
            "repulsion_cutoff_fraction": self.repulsion_cutoff_fraction,
            "seed": self.seed,
        }

    def fingerprint(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass
class ParticleEnsemble:
    particles: np.ndarray  # K x d
    step_index: int = 0

    def __post_init__(self):
        self.particles = np.atleast_2d(np.asarray(self.particles, dtype=np.float64))

    @property
    def count(self):
        return self.particles.shape[0]

    @property
    def dim(self):
        return self.particles.shape[1]


def stream(seed, purpose, t=0, i=0):
    """Independent Philox stream for one (purpose, iteration, particle) slot."""
    counter = (purpose << 200) | (((t << 32) | i) << 128)
    return np.random.Generator(np.random.Philox(key=seed & (2 ** 64 - 1), counter=counter))


def step_noise_matrix(seed, t, K, d):
    """K x d standard-normal draws; row i comes from particle i's own stream."""
    out = np.empty((K, d))
    for i in range(K):
        out[i] = stream(seed, _PURPOSE_STEP_NOISE, t, i).standard_normal(d)
    return out


def _finite_or_raise(particles, iteration):
    if not np.all(np.isfinite(particles)):
        bad = np.argwhere(~np.isfinite(particles))[0]
        raise SamplerError(
            f"non-finite value for particle {bad[0]}, coordinate {bad[1]}", iteration
        )


def _drift(ensemble, target, kernel):
    """Deterministic SVGD/SGLD+R drift (without the step size factor)."""
    grads = target.ensemble_grad(ensemble.particles)
    if kernel.identity:
        return grads / ensemble.count
    from . import _core

    return _core.svgd_drift(ensemble.particles, grads, kernel.gram, kernel.bandwidth)


def svgd_step(ensemble, target, kernel, eps):
    """z_i += (eps/K) sum_j [k(z_j,z_i) grad log pi(z_j) + grad_{z_j} k(z_j,z_i)]."""
    new = ensemble.particles + eps * _drift(ensemble, target, kernel)
    _finite_or_raise(new, ensemble.step_index)
    return ParticleEnsemble(new, ensemble.step_index + 1)


def sgld_step(ensemble, target, eps, xi):
    """Independent per particle: z_i += eps * grad log pi(z_i) + N(0, 2 eps I)."""
    grads = target.ensemble_grad(ensemble.particles)
    new = ensemble.particles + eps * grads
    if xi is not None:
        new = new + math.sqrt(2.0 * eps) * xi
    _finite_or_raise(new, ensemble.step_index)
    return ParticleEnsemble(new, ensemble.step_index + 1)


def sample_repulsion_noise(kernel, eps, K, d, xi):
    """Noise with flattened covariance (2 eps / K) * big_K.

    Applied dimension-wise: eta[:, c] = sqrt(2 eps / K) * L @ xi[:, c];
    coordinates are independent, particles correlate through the gram matrix.
    """
    xi = np.asarray(xi, dtype=np.float64)
    if xi.shape != (K, d):
        raise SamplerError(f"noise draws must have shape ({K}, {d}), got {xi.shape}")
    return math.sqrt(2.0 * eps / K) * (kernel.psd_factor @ xi)


def sgld_r_step(ensemble, target, kernel, eps, xi=None):
    """SVGD drift plus the correlated repulsion noise (noise off => exactly SVGD)."""
    stepped = svgd_step(ensemble, target, kernel, eps)
    if xi is None:
        return stepped
    eta = sample_repulsion_noise(kernel, eps, ensemble.count, ensemble.dim, xi)
    new = stepped.particles + eta
    _finite_or_raise(new, ensemble.step_index)
    return ParticleEnsemble(new, stepped.step_index)


@dataclass
class TraceStore:
    """Post-burn-in ensemble snapshots with wall-clock stamps."""

    iterations: list
    wall_times: list
    snapshots: list  # K x d arrays
    config_fingerprint: str
    meta: dict

    @property
    def particle_count(self):
        return self.snapshots[0].shape[0] if self.snapshots else 0

    @property
    def dim(self):
        return self.snapshots[0].shape[1] if self.snapshots else 0

    def pooled(self):
        """All samples stacked as an (n_snapshots * K) x d array."""
        return np.concatenate(self.snapshots, axis=0)

    def particle_series(self, particle, coord=0):
        return np.array([s[particle, coord] for s in self.snapshots])

    def save(self, out_dir):
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        d = self.dim
        with open(out_dir / "trace.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "wall_s", "particle"] + [f"dim_{c}" for c in range(d)])
            for it, wall, snap in zip(self.iterations, self.wall_times, self.snapshots):
                for p in range(snap.shape[0]):
                    writer.writerow([it, repr(float(wall)), p] + [repr(float(v)) for v in snap[p]])
        sidecar = {"config_fingerprint": self.config_fingerprint, **self.meta}
        with open(out_dir / "trace_meta.json", "w") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)
        return out_dir / "trace.csv"

    @classmethod
    def load(cls, trace_csv, meta_json=None):
        trace_csv = Path(trace_csv)
        if meta_json is None:
            meta_json = trace_csv.with_name("trace_meta.json")
        with open(meta_json) as fh:
            sidecar = json.load(fh)
        rows = {}
        with open(trace_csv, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[:3] != ["iter", "wall_s", "particle"]:
                raise SamplerError(f"unrecognized trace header in {trace_csv}")
            for row in reader:
                it, wall = int(row[0]), float(row[1])
                rows.setdefault((it, wall), []).append(
                    (int(row[2]), [float(v) for v in row[3:]])
                )
        iterations, wall_times, snapshots = [], [], []
        for (it, wall), entries in sorted(rows.items()):
            entries.sort()
            iterations.append(it)
            wall_times.append(wall)
            snapshots.append(np.array([vals for _, vals in entries]))
        fingerprint = sidecar.pop("config_fingerprint")
        return cls(iterations, wall_times, snapshots, fingerprint, sidecar)


def run(config, target):
    """Algorithm loop: init from the target's prior policy, iterate the
    configured update, collect thinned snapshots after burn-in."""
    config.validate()
    K = config.particle_count
    ensemble = ParticleEnsemble(
        target.init_sample(stream(config.seed, _PURPOSE_INIT), K), 0
    )
    if ensemble.dim != target.dim:
        raise ConfigError(
            f"target dimension {target.dim} inconsistent with init {ensemble.dim}"
        )
    d = target.dim
    cutoff = config.repulsion_cutoff_fraction * config.total_iterations

    iterations, wall_times, snapshots = [], [], []
    jitter_counts = {}
    bandwidths = []
    start = time.monotonic()
    burnin_done_at = None

    for t in range(config.total_iterations):
        eps = step_size(config.schedule, t)
        if eps <= 0:
            raise ConfigError(f"step size is not positive at iteration {t}")
        target.prepare_step(t, stream(config.seed, _PURPOSE_DATA, t))
        try:
            if config.method == "sgld":
                xi = step_noise_matrix(config.seed, t, K, d) if config.noise_enabled else None
                ensemble = sgld_step(ensemble, target, eps, xi)
            else:
                mode = config.kernel_mode
                if config.method == "sgld_r" and t >= cutoff:
                    mode = MODE_IDENTITY
                kernel = build_kernel_state(ensemble.particles, mode, config.kernel_h)
                if not kernel.identity:
                    bandwidths.append(kernel.bandwidth)
                jitter_counts[kernel.jitter_used] = jitter_counts.get(kernel.jitter_used, 0) + 1
                if config.method == "svgd":
                    ensemble = svgd_step(ensemble, target, kernel, eps)
                else:
                    xi = step_noise_matrix(config.seed, t, K, d) if config.noise_enabled else None
                    ensemble = sgld_r_step(ensemble, target, kernel, eps, xi)
        except SamplerError as err:
            raise SamplerError(str(err), iteration=t) from err

        now = time.monotonic()
        iteration = t + 1
        if iteration == config.burn_in:
            burnin_done_at = now
        if iteration > config.burn_in and (iteration - config.burn_in) % config.thin == 0:
            iterations.append(iteration)
            wall_times.append(now - start)
            snapshots.append(ensemble.particles.copy())

    if burnin_done_at is None:  # burn_in == 0
        burnin_done_at = start
    meta = {
        "seed": config.seed,
        "config": config.to_dict(),
        "target": target.describe(),
        "dim": d,
        "post_burnin_seconds": time.monotonic() - burnin_done_at,
        "jitter_counts": {repr(k): v for k, v in sorted(jitter_counts.items())},
        "bandwidth_summary": (
            {
                "min": float(np.min(bandwidths)),
                "max": float(np.max(bandwidths)),
                "mean": float(np.mean(bandwidths)),
            }
            if bandwidths
            else None
        ),
    }
    return TraceStore(iterations, wall_times, snapshots, config.fingerprint(), meta)
