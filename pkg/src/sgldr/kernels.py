"""RBF kernel machinery: gram matrices, bandwidth, PSD factors, and the
dense permuted block-diagonal reference construction used as a test oracle.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import _core

JITTER_LADDER = (0.0, 1e-10, 1e-8, 1e-6, 1e-4)

MODE_RBF_MEDIAN = "rbf-median"
MODE_RBF_FIXED = "rbf-fixed"
MODE_IDENTITY = "identity"
KERNEL_MODES = (MODE_RBF_MEDIAN, MODE_RBF_FIXED, MODE_IDENTITY)


class KernelError(ValueError):
    pass


class FactorizationError(RuntimeError):
    def __init__(self, gram):
        super().__init__("Cholesky factorization failed at maximum jitter")
        self.gram = gram


@dataclass(frozen=True)
class KernelState:
    """Per-step kernel data: bandwidth h, gram K_bar, and its PSD factor."""

    bandwidth: float
    gram: np.ndarray
    psd_factor: np.ndarray
    jitter_used: float
    identity: bool = False


@dataclass(frozen=True)
class PermutationSpec:
    """Bijection between dimension-major and particle-major flat indices."""

    particle_count: int
    dim: int
    index_map: np.ndarray  # index_map[c*K + p] = p*d + c

    def matrix(self):
        n = self.particle_count * self.dim
        P = np.zeros((n, n))
        P[np.arange(n), self.index_map] = 1.0
        return P


def rbf(z, z_prime, h):
    """k(z, z') = exp(-||z - z'||^2 / h)."""
    if h <= 0:
        raise KernelError("bandwidth must be positive")
    z = np.asarray(z, dtype=np.float64)
    z_prime = np.asarray(z_prime, dtype=np.float64)
    if z.shape != z_prime.shape:
        raise KernelError("rbf arguments must have equal dimension")
    diff = z - z_prime
    return float(np.exp(-(diff @ diff) / h))


def rbf_grad_first(z_j, z_i, h):
    """Gradient of k(z_j, z_i) with respect to z_j: -(2/h)(z_j - z_i) k."""
    if h <= 0:
        raise KernelError("bandwidth must be positive")
    z_j = np.asarray(z_j, dtype=np.float64)
    z_i = np.asarray(z_i, dtype=np.float64)
    return -(2.0 / h) * (z_j - z_i) * rbf(z_j, z_i, h)


def gram_matrix(particles, h):
    """K x K symmetric gram matrix with unit diagonal."""
    particles = np.atleast_2d(np.asarray(particles, dtype=np.float64))
    if particles.shape[0] < 1:
        raise KernelError("ensemble must be non-empty")
    if h <= 0:
        raise KernelError("bandwidth must be positive")
    return _core.rbf_gram(particles, h)


def median_bandwidth(particles):
    """h = med^2 / log(K + 1) from lower-triangle pairwise distances.

    The median of an even count is the lower middle value (deterministic).
    Floored at 1e-8 when all particles coincide.
    """
    particles = np.atleast_2d(np.asarray(particles, dtype=np.float64))
    K = particles.shape[0]
    if K < 2:
        raise KernelError("median bandwidth needs at least two particles")
    sq = _core.pairwise_sq_dists(particles)
    tri = np.sqrt(sq[np.tril_indices(K, k=-1)])
    med = np.sort(tri)[(tri.size - 1) // 2]
    return max(med * med / math.log(K + 1), 1e-8)


def psd_factor(gram):
    """Lower Cholesky factor of gram + jitter*I, escalating jitter as needed."""
    gram = np.asarray(gram, dtype=np.float64)
    for jitter in JITTER_LADDER:
        try:
            L = np.linalg.cholesky(gram + jitter * np.eye(gram.shape[0]))
            return L, jitter
        except np.linalg.LinAlgError:
            continue
    raise FactorizationError(gram)


def build_kernel_state(particles, mode=MODE_RBF_MEDIAN, h=None):
    """Assemble the per-step KernelState for an ensemble."""
    particles = np.atleast_2d(np.asarray(particles, dtype=np.float64))
    K = particles.shape[0]
    if mode == MODE_IDENTITY:
        eye = np.eye(K)
        return KernelState(bandwidth=float("inf"), gram=eye, psd_factor=eye,
                           jitter_used=0.0, identity=True)
    if mode == MODE_RBF_FIXED:
        if h is None or h <= 0:
            raise KernelError("rbf-fixed mode requires a positive bandwidth h")
        bw = float(h)
    elif mode == MODE_RBF_MEDIAN:
        bw = 1.0 if K == 1 else median_bandwidth(particles)
    else:
        raise KernelError(f"unknown kernel mode {mode!r}")
    gram = gram_matrix(particles, bw)
    L, jitter = psd_factor(gram)
    return KernelState(bandwidth=bw, gram=gram, psd_factor=L, jitter_used=jitter)


def build_permutation(K, d):
    """Bijection taking dimension-major flat index c*K + p to particle-major p*d + c."""
    if K < 1 or d < 1:
        raise KernelError("K and d must be >= 1")
    c, p = np.divmod(np.arange(K * d), K)
    return PermutationSpec(particle_count=K, dim=d, index_map=p * d + c)


def build_big_K(gram, d):
    """Dense Kd x Kd expansion of the gram matrix, in particle-major ordering.

    Built from the block-diagonal of d gram copies conjugated by the
    ordering permutation, so big_K[p*d+c, q*d+c'] = gram[p, q] * delta(c, c').
    Test oracle only; the sampler never materializes this matrix.
    """
    gram = np.asarray(gram, dtype=np.float64)
    K = gram.shape[0]
    P = build_permutation(K, d).matrix()
    block = np.kron(np.eye(d), gram)  # dimension-major layout
    return P.T @ block @ P
