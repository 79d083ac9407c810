"""Average-case approximation complexity of tensor-product random elements.

Exact and certified-interval computation of the minimal rank n(eps)
needed to approximate tensor-product Hilbertian random elements with
relative 2-average error eps, plus the limit-law machinery (normal,
stable, Dickman) that predicts ln n(eps) for large tensor order d.
"""

from . import asympt, cli, dist, families, spectra, tensor  # noqa: F401

__version__ = "0.1.0"
