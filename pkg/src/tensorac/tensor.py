"""Approximation complexity of tensor-product problems.

n(eps) is the minimal number of largest normalized product eigenvalues
whose mass reaches 1 - eps^2.  Three routes are implemented:

  * best-first heap enumeration over the product lattice (exact, small n),
  * an exact big-integer closed form for two-atom tensor degrees,
  * certified CDF envelopes of the log-eigenvalue sum (the U-variable
    reduction) computed by grid convolution, for problems far beyond
    enumeration range.

The convolution envelopes must stay sharp for tensor orders d ~ 1e5, so
atoms are snapped to the grid by mean-preserving proportional splitting
(not one-sided rounding, whose bias grows linearly in d).  The snap error
of the summed variables is then a martingale with increments bounded by
the grid pitch, and an Azuma-Hoeffding shift (t, eta) converts it into a
certified horizontal/vertical envelope margin.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np
from scipy.signal import fftconvolve

from .errors import (BadEpsilonOrder, CapExceeded, GridOverflow, InvalidAtom,
                     InvalidEps, QuantileOutsideGrid, TooLarge)
from .spectra import MarginalSpectrum, u_distribution

__all__ = [
    "TensorProblem",
    "ComplexityInterval",
    "GriddedCDF",
    "QuantileInterval",
    "exact_complexity",
    "enumeration_oracle",
    "binomial_degree_complexity",
    "convolve_G",
    "lambda_quantile",
    "complexity_bounds",
    "best_lower_bound",
]


# ---------------------------------------------------------------------------
# problem container
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TensorProblem:
    """Product of d marginal spectra, given explicitly or as (spectrum)^d."""

    marginals: Optional[tuple] = None          # tuple[MarginalSpectrum, ...]
    base: Optional[MarginalSpectrum] = None    # degree case
    d: Optional[int] = None

    def __post_init__(self):
        if (self.marginals is None) == (self.base is None):
            raise ValueError("give either marginals or (base, d)")
        if self.base is not None:
            if self.d is None or self.d < 1:
                raise ValueError("degree case needs d >= 1")
        else:
            object.__setattr__(self, "marginals", tuple(self.marginals))
            if len(self.marginals) < 1:
                raise ValueError("need at least one marginal")
            object.__setattr__(self, "d", len(self.marginals))
        if self.total_defect >= 0.5:
            raise ValueError("total truncation defect >= 0.5; refuse to certify")

    @classmethod
    def degree(cls, spec: MarginalSpectrum, d: int) -> "TensorProblem":
        return cls(base=spec, d=d)

    @classmethod
    def product(cls, marginals: Sequence[MarginalSpectrum]) -> "TensorProblem":
        return cls(marginals=tuple(marginals))

    @property
    def dimension(self) -> int:
        return int(self.d)

    def marginal_list(self) -> list[MarginalSpectrum]:
        if self.base is not None:
            return [self.base] * self.d
        return list(self.marginals)

    def groups(self) -> list[tuple[MarginalSpectrum, int]]:
        """Distinct marginals with their multiplicities (order-stable)."""
        if self.base is not None:
            return [(self.base, self.d)]
        out: list[tuple[MarginalSpectrum, int]] = []
        index: dict = {}
        for spec in self.marginals:
            key = (spec.weights.tobytes(), spec.tail_bound)
            if key in index:
                i = index[key]
                out[i] = (out[i][0], out[i][1] + 1)
            else:
                index[key] = len(out)
                out.append((spec, 1))
        return out

    @property
    def total_defect(self) -> float:
        """1 - prod_j (1 - tail_bound_j)."""
        acc = 0.0
        for spec, count in self.groups():
            if spec.tail_bound > 0.0:
                acc += count * math.log1p(-min(spec.tail_bound, 1.0 - 1e-300))
        return -math.expm1(acc)


def _lnint(n: int) -> float:
    """log of a (possibly huge) positive integer."""
    if n <= 0:
        raise ValueError("n must be positive")
    return math.log(n)


@dataclass(frozen=True)
class ComplexityInterval:
    """Rigorous bracket on n(eps); counts are exact ints when representable."""

    n_lower: Optional[int]
    n_upper: Optional[int]
    ln_lower: float
    ln_upper: float
    method: str

    def __post_init__(self):
        if self.n_lower is not None and self.n_upper is not None:
            if self.n_lower > self.n_upper:
                raise ValueError("n_lower > n_upper")
        if self.ln_lower > self.ln_upper + 1e-12:
            raise ValueError("ln_lower > ln_upper")

    @classmethod
    def exact(cls, n: int, method: str) -> "ComplexityInterval":
        ln = _lnint(n)
        return cls(n_lower=n, n_upper=n, ln_lower=ln, ln_upper=ln, method=method)

    @property
    def is_exact(self) -> bool:
        return self.n_lower is not None and self.n_lower == self.n_upper

    def contains(self, n: int) -> bool:
        ok_lo = self.n_lower is None or self.n_lower <= n
        ok_hi = self.n_upper is None or n <= self.n_upper
        return ok_lo and ok_hi and (self.ln_lower - 1e-12 <= _lnint(n)
                                    <= self.ln_upper + 1e-12)


# ---------------------------------------------------------------------------
# exact enumeration
# ---------------------------------------------------------------------------

def _validate_eps(eps: float) -> None:
    if not 0.0 < eps < 1.0:
        raise InvalidEps(f"eps must be in (0,1), got {eps}")


def _flat_closed_form(problem: TensorProblem, eps: float) -> Optional[ComplexityInterval]:
    """ceil((1-eps^2) * prod l_j) when every marginal is exactly flat."""
    lattice = 1
    for spec, count in problem.groups():
        w = spec.weights
        if spec.tail_bound != 0.0 or w[0] != w[-1]:
            return None
        lattice *= w.size ** count
    frac = 1 - Fraction(eps) ** 2
    n = -((-frac.numerator * lattice) // frac.denominator)  # ceil
    return ComplexityInterval.exact(int(n), "Flat")


def exact_complexity(problem: TensorProblem, eps: float,
                     n_cap: int = 2_000_000,
                     use_closed_forms: bool = True) -> ComplexityInterval:
    """Best-first count of product eigenvalues until mass 1-eps^2.

    The max-heap is seeded with the all-ones index vector; popping a
    vector pushes successors that increment coordinate i only for i at or
    after the vector's last incremented position, so every lattice point
    is generated exactly once.  With a nonzero truncation defect the count
    is bracketed by the targets 1-eps^2 (upper) and 1-eps^2-defect (lower).

    Exactly flat problems dispatch to the exact rational closed form
    ceil((1-eps^2) prod l_j); mass ties at the target are then honored
    exactly.  The float heap honors ties only up to double rounding.
    """
    _validate_eps(eps)
    if use_closed_forms:
        flat = _flat_closed_form(problem, eps)
        if flat is not None:
            return flat

    weights = [np.asarray(s.weights) for s in problem.marginal_list()]
    d = len(weights)
    target_hi = 1.0 - eps * eps
    target_lo = target_hi - problem.total_defect

    top = 1.0
    for w in weights:
        top *= w[0]

    # heap entries: (-weight, seq, weight, sparse_vec, min_coord); the
    # sparse vec holds only coordinates with index > 0 (0-based)
    heap = [(-top, 0, top, (), 0)]
    seq = 1
    cum = 0.0
    pops = 0
    n_lower = None
    prev_w = math.inf
    while heap:
        _, _, w, vec, p = heapq.heappop(heap)
        if w > prev_w * (1.0 + 1e-12):
            raise AssertionError("heap emitted weights out of order")
        prev_w = w
        pops += 1
        if pops > n_cap:
            raise CapExceeded(n_cap)
        cum += w
        if n_lower is None and cum >= target_lo:
            n_lower = pops
        if cum >= target_hi:
            nl = n_lower if n_lower is not None else pops
            return ComplexityInterval(n_lower=nl, n_upper=pops,
                                      ln_lower=_lnint(nl), ln_upper=_lnint(pops),
                                      method="Enumeration")
        vd = dict(vec)
        for i in range(p, d):
            ki = vd.get(i, 0)
            wi = weights[i]
            if ki + 1 >= wi.size:
                continue
            child_w = w * (wi[ki + 1] / wi[ki])
            child_vec = tuple(sorted({**vd, i: ki + 1}.items()))
            heapq.heappush(heap, (-child_w, seq, child_w, child_vec, i))
            seq += 1
    raise CapExceeded(n_cap)  # lattice exhausted below target: defect too large


def enumeration_oracle(problem: TensorProblem, eps: float,
                       max_lattice: int = 10_000_000) -> ComplexityInterval:
    """Materialize the full product lattice, sort, count.  Test oracle."""
    _validate_eps(eps)
    weights = [np.asarray(s.weights) for s in problem.marginal_list()]
    size = 1
    for w in weights:
        size *= w.size
        if size > max_lattice:
            raise TooLarge(f"lattice size exceeds {max_lattice}")
    prod = np.array([1.0])
    for w in weights:
        prod = np.multiply.outer(prod, w).ravel()
    prod = np.sort(prod)[::-1]
    cum = np.cumsum(prod)
    target_hi = 1.0 - eps * eps
    target_lo = target_hi - problem.total_defect
    i_hi = int(np.searchsorted(cum, target_hi, side="left"))
    i_lo = int(np.searchsorted(cum, target_lo, side="left"))
    if i_hi >= cum.size:
        raise TooLarge("defect too large: lattice mass below target")
    return ComplexityInterval(n_lower=i_lo + 1, n_upper=i_hi + 1,
                              ln_lower=_lnint(i_lo + 1), ln_upper=_lnint(i_hi + 1),
                              method="Enumeration")


# ---------------------------------------------------------------------------
# two-atom tensor degrees: exact big-integer route
# ---------------------------------------------------------------------------

def binomial_degree_complexity(a: Union[float, Fraction, str], d: int,
                               eps: Union[float, Fraction, str]) -> ComplexityInterval:
    """Exact n(eps) for marginal (a, 1-a) tensored d times, 0.5 < a < 1.

    Product eigenvalues come in levels m = 0..d with value a^(d-m)(1-a)^m
    and multiplicity C(d,m); levels are strictly decreasing in m, so the
    count is all full levels below the mass target plus a partial count at
    the crossing level.  All arithmetic is exact (integers/rationals), so
    the crossing level cannot be misplaced by rounding.
    """
    af = Fraction(a)
    ef = Fraction(eps)
    if not Fraction(1, 2) < af < 1:
        raise InvalidAtom("need 0.5 < a < 1")
    if not 0 < ef < 1:
        raise InvalidEps(f"eps={eps}")
    if d < 1:
        raise ValueError("d >= 1 required")

    P, Q = af.numerator, af.denominator   # a = P/Q, 1-a = (Q-P)/Q
    R = Q - P
    target = 1 - ef * ef                  # mass target, exact rational
    # compare cumulative sums S_M = sum_{m<=M} C(d,m) P^(d-m) R^m against
    # target * Q^d, all in integers
    tgt_num = target.numerator
    tgt_den = target.denominator
    threshold = tgt_num * Q ** d          # compare tgt_den * S against this

    comb = 1                 # C(d, m)
    pw_p = P ** d            # P^(d-m)
    pw_r = 1                 # R^m
    S = 0                    # running mass numerator (scaled by Q^d)
    count_below = 0          # items in full levels m' < m
    for m in range(d + 1):
        term = comb * pw_p * pw_r
        if tgt_den * (S + term) >= threshold:
            # crossing level: partial count of its C(d,m) items
            item = pw_p * pw_r
            need_num = threshold - tgt_den * S
            c = -(-need_num // (tgt_den * item))  # ceil
            n = count_below + int(c)
            return ComplexityInterval.exact(n, "Binomial")
        S += term
        count_below += comb
        comb = comb * (d - m) // (m + 1)
        pw_p //= P
        pw_r *= R
    raise InvalidAtom("mass target not reached; inconsistent inputs")


# ---------------------------------------------------------------------------
# certified convolution envelopes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GriddedCDF:
    """Envelope pair for G(x) = P(sum_j U_j <= a_d + x b_d) on a uniform grid.

    lo <= G <= hi holds pointwise at the grid points.  defect_right is
    mass certified to lie at or beyond the grid end.  fold_mass_error is
    the worst per-fold conservation slip observed while building.
    """

    origin: float
    step: float
    lo: np.ndarray
    hi: np.ndarray
    a_d: float = 0.0
    b_d: float = 1.0
    defect_right: float = 0.0
    fold_mass_error: float = 0.0
    slack: float = 0.0       # horizontal certification margin, natural units
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64)
        hi = np.asarray(self.hi, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 1 or lo.size < 2:
            raise ValueError("lo/hi must be equal-length 1-D arrays")
        if np.any(np.diff(lo) < -1e-12) or np.any(np.diff(hi) < -1e-12):
            raise ValueError("envelopes must be nondecreasing")
        if np.any(lo > hi + 1e-12):
            raise ValueError("lower envelope exceeds upper")
        for arr in (lo, hi):
            arr.flags.writeable = False
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def xs(self) -> np.ndarray:
        return self.origin + self.step * np.arange(self.lo.size)

    def to_csv(self) -> str:
        lines = ["x,cdf_lo,cdf_hi"]
        for x, l, u in zip(self.xs, self.lo, self.hi):
            lines.append(f"{x!r},{l!r},{u!r}")
        return "\n".join(lines) + "\n"


class _GridLaw:
    """PMF on h * (start + 0..n-1); mass may be < 1 (defects live elsewhere)."""

    __slots__ = ("start", "pmf")

    def __init__(self, start: int, pmf: np.ndarray):
        self.start = start
        self.pmf = pmf


def _split_atoms(positions: np.ndarray, masses: np.ndarray, h: float) -> _GridLaw:
    """Mean-preserving proportional split of atoms onto the h-grid."""
    scaled = positions / h
    base = np.floor(scaled).astype(np.int64)
    frac = scaled - base
    lo = int(base.min())
    size = int(base.max()) - lo + 2
    pmf = np.zeros(size)
    np.add.at(pmf, base - lo, masses * (1.0 - frac))
    np.add.at(pmf, base - lo + 1, masses * frac)
    return _GridLaw(lo, pmf)


class _FoldAccumulator:
    """Tracks chopped mass, fft slack and the conservation audit across folds."""

    def __init__(self, chop_tol: float = 1e-13):
        self.chop_tol = chop_tol
        self.unlocated = 0.0       # chopped mass with no retained location
        self.vertical = 0.0        # certified vertical slack (fft roundoff)
        self.max_mass_err = 0.0

    def fold(self, a: _GridLaw, b: _GridLaw) -> _GridLaw:
        ma, mb = float(a.pmf.sum()), float(b.pmf.sum())
        if a.pmf.size * b.pmf.size <= 65536:
            out = np.convolve(a.pmf, b.pmf)
        else:
            out = fftconvolve(a.pmf, b.pmf)
            neg = out < 0.0
            if np.any(neg):
                self.vertical += float(-out[neg].sum())
                out[neg] = 0.0
            # per-entry fft roundoff, as seen by the later cumsum
            self.vertical += 2e-14 * out.size
        mass = float(out.sum())
        self.max_mass_err = max(self.max_mass_err, abs(mass - ma * mb))
        start = a.start + b.start
        # trim tails below the chop tolerance (mass tracked, location dropped)
        cum = np.cumsum(out)
        i0 = int(np.searchsorted(cum, self.chop_tol))
        cum_r = np.cumsum(out[::-1])
        i1 = out.size - int(np.searchsorted(cum_r, self.chop_tol))
        if i0 > 0 or i1 < out.size:
            i0 = min(i0, out.size - 2)
            i1 = max(i1, i0 + 2)
            self.unlocated += float(out[:i0].sum()) + float(out[i1:].sum())
            out = out[i0:i1].copy()
            start += i0
        return _GridLaw(start, out)

    def power(self, base: _GridLaw, count: int) -> _GridLaw:
        result: Optional[_GridLaw] = None
        while count > 0:
            if count & 1:
                result = base if result is None else self.fold(result, base)
            count >>= 1
            if count:
                base = self.fold(base, base)
        assert result is not None
        return result


def convolve_G(problem: TensorProblem, a_d: float, b_d: float, step: float,
               x_max: float, x_min: Optional[float] = None,
               slack: Optional[float] = None,
               defect_budget: float = 0.25) -> GriddedCDF:
    """Certified envelope pair for G^{X_d}_{a_d, b_d} on the requested grid.

    Marginal U-laws are split mean-preservingly onto an internal fine grid
    whose pitch follows the Azuma-Hoeffding balance h = t/sqrt(2 d ln(2/eta)):
    the snap drift of the d-variable sum then stays within the horizontal
    margin t except with probability eta per side.  Identical marginals are
    folded by exponentiation-by-squaring; grid support keeps every fold
    exact apart from tracked tail chops and fft roundoff.
    """
    if step <= 0 or b_d <= 0:
        raise ValueError("step and b_d must be positive")
    groups = [(u_distribution(spec), count) for spec, count in problem.groups()]
    d = problem.dimension

    h_y = step * b_d
    if slack is None:
        slack = min(0.2, 2.0 * h_y)
    slack = max(slack, 1e-9)
    eta = 1e-12
    h_int = min(h_y, slack / math.sqrt(2.0 * d * math.log(2.0 / eta)))

    acc = _FoldAccumulator()
    total: Optional[_GridLaw] = None
    for law, count in groups:
        g = _split_atoms(law.positions, law.masses, h_int)
        g = acc.power(g, count)
        total = g if total is None else acc.fold(total, g)
    assert total is not None

    kept = float(total.pmf.sum())
    missing = max(0.0, 1.0 - kept)   # marginal defects + chopped tails
    eta_v = 2.0 * eta + acc.vertical

    cum = np.cumsum(total.pmf)
    y0 = total.start * h_int

    def kept_cdf(y: np.ndarray, shift: float) -> np.ndarray:
        idx = np.floor((y + shift - y0) / h_int + 1e-9).astype(np.int64)
        vals = cum[np.clip(idx, 0, cum.size - 1)]
        return np.where(idx < 0, 0.0, vals)

    if x_min is None:
        x_min = (min(0.0, y0) - slack - a_d) / b_d - step
        x_min = math.floor(x_min / step) * step
    npts = int(math.floor((x_max - x_min) / step + 1e-9)) + 1
    if npts < 2:
        raise ValueError("x grid needs at least two points")
    xs = x_min + step * np.arange(npts)
    ys = a_d + b_d * xs

    lo = np.clip(kept_cdf(ys, -slack) - eta_v, 0.0, 1.0)
    hi = np.clip(kept_cdf(ys, +slack) + eta_v + missing, 0.0, 1.0)
    lo = np.minimum(lo, hi)

    defect_right = max(0.0, 1.0 - float(hi[-1]))
    if defect_right > defect_budget:
        raise GridOverflow(
            f"mass {defect_right:.3g} beyond x_max exceeds budget {defect_budget}")
    return GriddedCDF(origin=float(xs[0]), step=step, lo=lo, hi=hi,
                      a_d=a_d, b_d=b_d, defect_right=defect_right,
                      fold_mass_error=acc.max_mass_err, slack=slack,
                      meta={"h_int": h_int, "eta": eta,
                            "unlocated": acc.unlocated,
                            "total_defect": problem.total_defect,
                            "kept": kept})


@dataclass(frozen=True)
class QuantileInterval:
    """Bracket of |ln lambda(eps)| in natural units (nats)."""

    lower: float
    upper: float

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError("empty quantile interval")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def mid(self) -> float:
        return 0.5 * (self.lower + self.upper)


def lambda_quantile(G: GriddedCDF, eps: float) -> QuantileInterval:
    """Bracket inf{y : G(y) >= 1-eps^2} from the two envelopes.

    A grid point with lo >= level certifies the quantile at or below it;
    the last grid point with hi < level certifies it strictly above.
    """
    _validate_eps(eps)
    level = 1.0 - eps * eps
    xs = G.xs
    above = np.nonzero(G.lo >= level)[0]
    if above.size == 0:
        raise QuantileOutsideGrid(
            f"level {level} not reached by lower envelope (max {G.lo[-1]:.6f})")
    i_up = int(above[0])
    below = np.nonzero(G.hi < level)[0]
    i_lo = int(below[-1]) if below.size else -1
    y_up = G.a_d + G.b_d * xs[i_up]
    y_lo = G.a_d + G.b_d * (xs[i_lo] if i_lo >= 0 else xs[0] - G.step)
    return QuantileInterval(lower=y_lo, upper=y_up)


def complexity_bounds(q1: QuantileInterval, q2: QuantileInterval,
                      eps1: float, eps2: float) -> ComplexityInterval:
    """Bracket ln n(eps1) from quantiles at eps1 and some eps2 > eps1:
    n <= 1/lambda(eps1) and n >= (eps2^2 - eps1^2)/lambda(eps2)."""
    _validate_eps(eps1)
    _validate_eps(eps2)
    if not eps1 < eps2:
        raise BadEpsilonOrder("need eps1 < eps2")
    ln_upper = q1.upper
    gap = eps2 * eps2 - eps1 * eps1
    ln_lower = max(0.0, q2.lower + math.log(gap))
    ln_lower = min(ln_lower, ln_upper)
    n_lower: Optional[int] = None
    n_upper: Optional[int] = None
    if ln_lower < 43.0:  # stay within exact float->int territory
        n_lower = max(1, math.ceil(math.exp(ln_lower) * (1.0 - 1e-12)))
    if ln_upper < 43.0:
        n_upper = math.floor(math.exp(ln_upper) * (1.0 + 1e-12))
    return ComplexityInterval(n_lower=n_lower, n_upper=n_upper,
                              ln_lower=ln_lower, ln_upper=ln_upper,
                              method="ConvolutionBounds")


def best_lower_bound(G: GriddedCDF, eps: float,
                     eps2_grid: Optional[Sequence[float]] = None) -> ComplexityInterval:
    """complexity_bounds maximized over a grid of eps2 values."""
    _validate_eps(eps)
    q1 = lambda_quantile(G, eps)
    if eps2_grid is None:
        eps2_grid = [eps + t * (1.0 - eps) for t in
                     (0.01, 0.02, 0.05, 0.1, 0.2, 0.35, 0.5, 0.7)]
    best: Optional[ComplexityInterval] = None
    for e2 in eps2_grid:
        if not eps < e2 < 1.0:
            continue
        try:
            q2 = lambda_quantile(G, e2)
        except QuantileOutsideGrid:
            continue
        cand = complexity_bounds(q1, q2, eps, e2)
        if best is None or cand.ln_lower > best.ln_lower:
            best = cand
    if best is None:
        raise QuantileOutsideGrid("no usable eps2 on the grid")
    return best
