"""Shared independent oracles for the test suite.

These deliberately re-derive quantities through different routes than the
library (Stieltjes sums, Monte Carlo, quadrature), so agreement is
evidence rather than tautology.
"""

import math

import numpy as np
import pytest

from tensorac import dist


def stieltjes_convolve_cdf(law_a, law_b, xs):
    """CDF of the sum of two independent Dickman laws by Stieltjes sums.

    Cell representatives on the singular first panel use the exact
    conditional median of the x^(beta-1) density; midpoints elsewhere.
    """
    d = np.diff(law_a.cdf)
    mids = 0.5 * (law_a.xs[1:] + law_a.xs[:-1])
    beta = law_a.beta
    n1 = int(round(1.0 / law_a.h))
    a = law_a.xs[:-1][:n1]
    b = law_a.xs[1:][:n1]
    mids[:n1] = ((a ** beta + b ** beta) / 2.0) ** (1.0 / beta)
    vals = np.zeros_like(xs)
    for m, dm in zip(mids, d):
        if dm:
            vals += dm * np.interp(xs - m, law_b.xs, law_b.cdf,
                                   left=0.0, right=float(law_b.cdf[-1]))
    return vals


def cms_standard_stable(alpha, beta, n, rng):
    """Chambers-Mallows-Stuck samples mapped to the A-form standard law."""
    V = rng.uniform(-math.pi / 2, math.pi / 2, n)
    W = rng.exponential(1.0, n)
    if alpha != 1.0:
        t = beta * math.tan(math.pi * alpha / 2)
        B = math.atan(t) / alpha
        S = (1.0 + t * t) ** (1.0 / (2.0 * alpha))
        X = (S * np.sin(alpha * (V + B)) / np.cos(V) ** (1.0 / alpha)
             * (np.cos(V - alpha * (V + B)) / W) ** ((1.0 - alpha) / alpha))
        return dist.kappa_alpha(alpha) ** (1.0 / alpha) * X
    X = (2.0 / math.pi) * ((math.pi / 2 + beta * V) * np.tan(V)
                           - beta * np.log((math.pi / 2 * W * np.cos(V))
                                           / (math.pi / 2 + beta * V)))
    return (math.pi / 2.0) * X + beta * math.log(math.pi / 2.0)


def brute_force_sum_cdf(positions, masses, d, xs):
    """Exact CDF of the d-fold sum of a small atomic law (full expansion)."""
    pos = np.array([0.0])
    mas = np.array([1.0])
    for _ in range(d):
        pos = np.add.outer(pos, positions).ravel()
        mas = np.multiply.outer(mas, masses).ravel()
    order = np.argsort(pos, kind="stable")
    pos, mas = pos[order], mas[order]
    cum = np.cumsum(mas)
    idx = np.searchsorted(pos, np.asarray(xs) + 1e-12, side="right")
    return np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)


@pytest.fixture(scope="session")
def dickman_one():
    return dist.dickman_build(1.0)
