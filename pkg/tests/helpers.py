"""Shared construction helpers and independent brute-force oracles.

The oracles deliberately avoid the package's own integration machinery:
entropy/overlap/KL oracles use dense trapezoid grids over wide intervals,
and the assignment oracle enumerates every surjective labelling.
"""

from itertools import product

import numpy as np

from hybridclust.dissim import WeightedPair
from hybridclust.mixture import MixtureDensity, Subcluster


def gauss1d(mean: float, sd: float) -> MixtureDensity:
    return MixtureDensity.single([mean], [[sd * sd]])


def mix1d(*terms) -> MixtureDensity:
    """mix1d((coef, mean, sd), ...) with coefs summing to 1."""
    from hybridclust.mixture import GaussianComponent

    return MixtureDensity(
        tuple((c, GaussianComponent(np.array([m]), np.array([[s * s]]))) for c, m, s in terms)
    )


def sub(idx: int, weight: float, mean: float, sd: float) -> Subcluster:
    return Subcluster(id=idx, weight=weight, density=gauss1d(mean, sd), members=frozenset({idx}))


def make_pair(w0, m0, s0, w1, m1, s1) -> WeightedPair:
    return WeightedPair(sub(0, w0, m0, s0), sub(1, w1, m1, s1))


def norm_pdf(x, mean=0.0, sd=1.0):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * ((x - mean) / sd) ** 2) / (sd * np.sqrt(2 * np.pi))


def grid_integral(fn, lo=-80.0, hi=80.0, n=2_000_001) -> float:
    """Dense trapezoid rule; the independent numeric oracle for 1-D integrals."""
    x = np.linspace(lo, hi, n)
    trapezoid = getattr(np, "trapezoid", None) or np.trapz
    return float(trapezoid(fn(x), x))


def exhaustive_min_misclassification(map_labels, true_labels) -> float:
    """Enumerate every surjective subcluster -> class assignment (K <= 12)."""
    map_labels = np.asarray(map_labels)
    true_labels = np.asarray(true_labels)
    classes = np.unique(true_labels)
    C = len(classes)
    K = int(map_labels.max()) + 1
    counts = np.zeros((K, C), dtype=np.int64)
    for ci, cls in enumerate(classes):
        sel = true_labels == cls
        vals, ns = np.unique(map_labels[sel], return_counts=True)
        counts[vals, ci] = ns
    total = int(counts.sum())
    best = -1
    for assign in product(range(C), repeat=K):
        if len(set(assign)) != C:
            continue
        gain = sum(counts[k, assign[k]] for k in range(K))
        if gain > best:
            best = gain
    return (total - best) / total
