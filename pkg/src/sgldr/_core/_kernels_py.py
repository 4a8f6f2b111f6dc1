"""Pure-numpy implementations of the hot per-step kernels.

Used as a fallback when the compiled extension is unavailable; also the
reference the extension is tested against.
"""
import numpy as np


def pairwise_sq_dists(z):
    """K x K matrix of squared Euclidean distances between particle rows."""
    z = np.asarray(z, dtype=np.float64)
    diff = z[:, None, :] - z[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def rbf_gram(z, h):
    """Gram matrix of exp(-||z_i - z_j||^2 / h)."""
    sq = pairwise_sq_dists(z)
    gram = np.exp(-sq / h)
    # enforce exact symmetry and unit diagonal against rounding
    gram = 0.5 * (gram + gram.T)
    np.fill_diagonal(gram, 1.0)
    return gram


def svgd_drift(z, grad_logp, gram, h):
    """Kernel-weighted drift: (1/K) sum_j [k_ij * grad_j + grad_zj k(z_j, z_i)].

    The second term expands to (2/h) * (z_i * rowsum_i - (gram @ z)_i).
    """
    z = np.asarray(z, dtype=np.float64)
    g = np.asarray(grad_logp, dtype=np.float64)
    K = z.shape[0]
    weighted = gram @ g
    repulsion = (2.0 / h) * (z * gram.sum(axis=1)[:, None] - gram @ z)
    return (weighted + repulsion) / K
