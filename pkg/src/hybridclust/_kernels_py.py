"""Pure-NumPy implementations of the hot evaluation loops.

Same signatures as the compiled module ``hybridclust._kernels``; the
dispatcher in :mod:`hybridclust.kernels` picks whichever is available.

Conventions: ``points`` is (n, d), ``means`` is (K, d), ``inv_chols`` is
(K, d, d) holding the lower-triangular inverse Cholesky factor of each
covariance, and ``log_norms`` is (K,) holding
``-log det(L_k) - d/2 * log(2*pi)`` so that the component log-density is
``log_norms[k] - 0.5 * ||inv_chols[k] @ (x - means[k])||^2``.
"""

import numpy as np


def component_logpdfs(points, means, inv_chols, log_norms, out=None):
    """Per-component Gaussian log-densities, shape (n, K)."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    K = means.shape[0]
    if out is None:
        out = np.empty((n, K))
    for k in range(K):
        y = (points - means[k]) @ inv_chols[k].T
        out[:, k] = log_norms[k] - 0.5 * np.einsum("ij,ij->i", y, y)
    return out


def mixture_logpdf(points, means, inv_chols, log_norms, log_coefs, out=None):
    """Mixture log-density via log-sum-exp over components, shape (n,)."""
    lp = component_logpdfs(points, means, inv_chols, log_norms)
    lp += log_coefs
    m = lp.max(axis=1)
    res = m + np.log(np.exp(lp - m[:, None]).sum(axis=1))
    if out is None:
        return res
    out[:] = res
    return out
