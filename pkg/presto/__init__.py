"""Topological comparison of latent-space multiverses.

Embeddings are projected, reduced to persistence diagrams and vectorized as
persistence landscapes; distances, variances and sensitivities of those
landscapes drive outlier detection, clustering and search-space compression.
"""

from .const import VERSION

__version__ = VERSION
