"""Concrete problem families used across experiments and diagnostics.

The Euler product family needs a nondecreasing integer sequence r_j whose
second normalized eigenvalues 3^(-2 r_j - 2) track beta/(j (ln j)^p).  An
integer sequence cannot match that shape termwise (consecutive values jump
by factors of 9), so the rule below matches the partial sums greedily:
the quantities that drive the product-case asymptotics are exactly these
tail sums, not individual terms.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .spectra import MarginalSpectrum, euler_spectrum
from .tensor import TensorProblem

__all__ = [
    "euler_smoothness_rule",
    "euler_product_problem",
    "euler_marginal",
]


def euler_smoothness_rule(beta: float, p: float, d: int,
                          r_head: int = 1) -> np.ndarray:
    """Nondecreasing integers r_j with sum_j 3^(-2 r_j - 2) tracking
    sum_j beta/(j (ln j)^p).

    Increments are capped at the r_head level: the shape constraint is
    asymptotic, and an uncapped head would pile up many low-r marginals
    whose means shift ln n by a constant that fades only like 1/ln d.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    if d < 1:
        raise ValueError("d must be >= 1")
    cap = 3.0 ** (-2 * r_head - 2)
    out = np.empty(d, dtype=np.int64)
    actual = 0.0
    goal = 0.0
    r = r_head
    for j in range(1, d + 1):
        f = beta / (j * math.log(j) ** p) if j >= 2 else math.inf
        goal += min(f, cap)
        best_r, best_err = r, None
        rr = r
        while True:
            err = abs(actual + 3.0 ** (-2 * rr - 2) - goal)
            if best_err is None or err < best_err:
                best_err, best_r = err, rr
            else:
                break  # error is unimodal in rr
            rr += 1
        r = best_r
        actual += 3.0 ** (-2 * r - 2)
        out[j - 1] = r
    return out


def _euler_K_for_tail(r: int, tail_bound: float) -> int:
    """Smallest K with the integral tail bound below tail_bound."""
    q = 2 * r + 2
    # omega_r <= 1; tail <= (2K-1)^(1-q) / (2(q-1))
    val = (2.0 * (q - 1.0) * tail_bound) ** (-1.0 / (q - 1.0))
    return max(4, int(math.ceil((val + 1.0) / 2.0)) + 1)


@lru_cache(maxsize=None)
def euler_marginal(r: int, tail_bound: float = 1e-7) -> MarginalSpectrum:
    return euler_spectrum(r, _euler_K_for_tail(r, tail_bound))


def euler_product_problem(beta: float, p: float, d: int,
                          tail_bound: float = 1e-7) -> TensorProblem:
    """Tensor product of Euler marginals with smoothness r_j from the rule."""
    rule = euler_smoothness_rule(beta, p, d)
    marginals = [euler_marginal(int(r), tail_bound) for r in rule]
    return TensorProblem.product(marginals)
