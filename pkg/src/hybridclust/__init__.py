"""hybridclust: model-based hybrid clustering.

Gaussian-mixture partitioning followed by hierarchical merging of mixture
components under density-based dissimilarity measures, plus the checking
harness for the measures' data-independent properties.
"""

__version__ = "0.1.0"

from .kernels import BACKEND as kernel_backend  # noqa: F401
