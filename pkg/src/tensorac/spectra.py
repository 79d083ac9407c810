"""Marginal eigenvalue sequences.

A marginal spectrum is a finite, nonincreasing sequence of normalized
covariance eigenvalues together with a certified upper bound on the mass
that was discarded at truncation.  Discarded mass is never lumped into a
synthetic eigenvalue: that would distort complexity counts, so it is
carried as an interval defect instead.

For the analytic families (Euler integrated processes, regular-variation
and log-log shapes) the spectrum also carries a tail model that can
evaluate tail mass and truncated log-moments far beyond the stored range,
where enumeration is impossible.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import quad

from .errors import (EmptySpectrum, InfeasibleBeta, NegativeEigenvalue,
                     SpectrumError)

__all__ = [
    "MarginalSpectrum",
    "SpectrumStats",
    "AtomicDistribution",
    "TailModel",
    "euler_spectrum",
    "regvar_spectrum",
    "loglog_spectrum",
    "normalize",
    "flat_spectrum",
    "two_atom_spectrum",
    "spectrum_stats",
    "tail_mass",
    "truncated_moment",
    "u_distribution",
    "spectrum_to_json",
    "spectrum_from_json",
    "spectrum_to_csv",
]

# Relative tolerance for grouping floating-point ties into one multiplicity.
MULTIPLICITY_RTOL = 1e-12


def _psum(arr) -> float:
    """Compensated sum (80-bit accumulate) for mass/moment bookkeeping."""
    a = np.asarray(arr)
    if a.size == 0:
        return 0.0
    return float(np.sum(a.astype(np.longdouble)))


# ---------------------------------------------------------------------------
# tail models for analytic families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TailModel:
    """Analytic description of eigenvalues beyond the stored range.

    kind/params:
      "euler":  lam_k = scale * (2k-1)^(-q),           params q, scale
      "regvar": lam_k = beta / (k^p (ln k)^(1+r)),     params beta, p, r
      "loglog": lam_k = beta / (k ln k (lnln k)^(1+s)) params beta, s

    All evaluations work in log space so thresholds like exp(-1e4) are
    safe.  Sums over k are bracketed by integral bounds for decreasing
    terms: integral <= sum <= first term + integral.
    """

    kind: str
    params: dict
    k_start: int  # model covers indices k >= k_start (1-based)

    # -- scalar term and log-term -------------------------------------

    def log_term(self, k: float) -> float:
        return self._log_term_logk(math.log(k))

    def _log_term_logk(self, logk: float) -> float:
        """ln lam_k as a function of ln k (safe for astronomical k)."""
        p = self.params
        if self.kind == "euler":
            # ln(2k-1) = logk + ln(2 - e^{-logk})
            l2k1 = logk + math.log(2.0 - math.exp(-min(logk, 700.0)))
            return math.log(p["scale"]) - p["q"] * l2k1
        if self.kind == "regvar":
            return (math.log(p["beta"]) - p["p"] * logk
                    - (1.0 + p["r"]) * math.log(logk))
        if self.kind == "loglog":
            return (math.log(p["beta"]) - logk - math.log(logk)
                    - (1.0 + p["s"]) * math.log(math.log(logk)))
        raise ValueError(self.kind)

    def _log_k_at_threshold(self, x: float) -> float:
        """ln k_x with k_x = min{k : lam_k < exp(-x)}, solved in log space."""
        p = self.params
        if self.kind == "euler":
            # (2k-1)^q = scale * e^x
            return math.log(0.5 * (math.exp(
                (x + math.log(p["scale"])) / p["q"]) + 1.0))
        if self.kind == "regvar":
            # p*L + (1+r) ln L = x + ln beta, L = ln k
            target = x + math.log(p["beta"])
            pp, r = p["p"], p["r"]
            L = max(target / pp, math.log(max(self.k_start, 3)))
            for _ in range(200):
                f = pp * L + (1.0 + r) * math.log(L) - target
                df = pp + (1.0 + r) / L
                step = f / df
                L -= step
                if abs(step) < 1e-13 * max(1.0, abs(L)):
                    break
            return L
        if self.kind == "loglog":
            # L + ln L + (1+s) ln ln L = x + ln beta, L = ln k
            target = x + math.log(p["beta"])
            s = p["s"]
            L = max(target, math.log(max(self.k_start, 16)))
            for _ in range(200):
                lL = math.log(L)
                f = L + lL + (1.0 + s) * math.log(lL) - target
                df = 1.0 + 1.0 / L + (1.0 + s) / (L * lL)
                step = f / df
                L = max(L - step, 1.05 * math.log(math.log(self.k_start + 1.0)))
                if abs(step) < 1e-13 * max(1.0, abs(L)):
                    break
            return L

        raise ValueError(self.kind)

    # -- integral machinery (log substitution u = ln t) -----------------

    def _mass_integral(self, logk_lo: float) -> float:
        """integral_{e^logk_lo}^inf lam(t) dt, closed form where available."""
        p = self.params
        if self.kind == "euler":
            q, scale = p["q"], p["scale"]
            l2k1 = logk_lo + math.log(2.0 - math.exp(-min(logk_lo, 700.0)))
            return scale * math.exp((1.0 - q) * l2k1) / (2.0 * (q - 1.0))
        if self.kind == "regvar":
            beta, pp, r = p["beta"], p["p"], p["r"]
            if pp == 1.0:
                # exact: beta / (r * L^r)
                return beta / (r * logk_lo ** r)
            # integrand in u: beta * e^{(1-p)u} / u^{1+r}
            def f(u):
                return beta * math.exp((1.0 - pp) * u) / u ** (1.0 + r)
            hi = logk_lo + 200.0 / max(pp - 1.0, 1e-2)
            val, err = quad(f, logk_lo, hi, limit=200)
            return val + abs(err)
        if self.kind == "loglog":
            beta, s = p["beta"], p["s"]
            return beta / (s * math.log(logk_lo) ** s)
        raise ValueError(self.kind)

    def _moment_integral(self, logk_lo: float, logk_hi: float, p_ord: int) -> float:
        """integral lam(t) |ln lam(t)|^p dt over [e^lo, e^hi] (u = ln t)."""
        def f(u):
            lt = self._log_term_logk(u)
            return math.exp(u + lt) * abs(lt) ** p_ord
        val, err = quad(f, logk_lo, logk_hi, limit=400)
        return val + abs(err)

    # -- public tail queries --------------------------------------------

    def tail_mass_beyond(self, x: float, k_from: int) -> tuple[float, float]:
        """Bracket of sum over k >= k_from of lam_k * 1(lam_k < e^{-x})."""
        log_kx = self._log_k_at_threshold(x)
        log_klo = max(math.log(k_from), log_kx)
        base = self._mass_integral(log_klo)
        first = math.exp(self._log_term_logk(log_klo))
        return base, base + first

    def tail_mass_logx(self, z: float) -> float:
        """T(e^z) for thresholds far beyond float range (z = ln x).

        Only the slowly varying families need this; by z ~ 40 the solver
        corrections are exp(-z)-suppressed and the closed forms below are
        exact to double precision.
        """
        p = self.params
        if math.exp(min(z, 700.0)) < 1e15:
            return self._mass_integral(
                max(self._log_k_at_threshold(math.exp(z)),
                    math.log(self.k_start)))
        if self.kind == "loglog":
            # ln k_x ~ e^z, so lnln k_x ~ z
            return p["beta"] / (p["s"] * z ** p["s"])
        raise ValueError("log-threshold tail only for slowly varying kinds")

    def total_mass_beyond(self, k_from: int) -> tuple[float, float]:
        base = self._mass_integral(math.log(k_from))
        first = math.exp(self.log_term(k_from))
        return base, base + first

    def moment_below(self, x: float, k_from: int, p_ord: int) -> tuple[float, float]:
        """Bracket of sum over k >= k_from of |ln lam_k|^p lam_k 1(lam_k >= e^{-x})."""
        log_kx = self._log_k_at_threshold(x)
        log_klo = math.log(k_from)
        if log_kx <= log_klo:
            return 0.0, 0.0
        base = self._moment_integral(log_klo, log_kx, p_ord)
        lt0 = self.log_term(k_from)
        first = math.exp(lt0) * abs(lt0) ** p_ord
        return base, base + first


# ---------------------------------------------------------------------------
# core types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MarginalSpectrum:
    """Normalized, nonincreasing eigenvalue sequence with a certified tail.

    weights sum to at most 1, and weights-sum + tail_bound lies in
    [1, 1+1e-12].  The discarded mass (at most tail_bound) belongs to
    eigenvalues smaller than weights[-1].
    """

    weights: np.ndarray
    tail_bound: float = 0.0
    trace: float = 1.0
    label: str = ""
    tail_model: Optional[TailModel] = None

    def __post_init__(self):
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=np.float64))
        if w.ndim != 1 or w.size == 0:
            raise EmptySpectrum("spectrum needs at least one positive eigenvalue")
        if not np.all(w > 0.0):
            raise NegativeEigenvalue("weights must be strictly positive")
        if np.any(np.diff(w) > 0.0):
            raise SpectrumError("weights must be nonincreasing")
        if self.tail_bound < 0.0:
            raise NegativeEigenvalue("tail_bound must be nonnegative")
        s = _psum(w)
        total = s + self.tail_bound
        if s > 1.0 + 1e-12 or not (1.0 - 1e-12 <= total <= 1.0 + 1e-12):
            raise SpectrumError(
                f"mass closure violated: sum={s!r} tail_bound={self.tail_bound!r}")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return int(self.weights.size)

    @property
    def mass(self) -> float:
        return _psum(self.weights)

    @property
    def x_trunc(self) -> float:
        """Discarded eigenvalues all lie below weights[-1]; their |ln| above this."""
        return float(-np.log(self.weights[-1]))

    def log_weights(self) -> np.ndarray:
        """|ln w_k|, nondecreasing."""
        return -np.log(self.weights)


@dataclass(frozen=True)
class SpectrumStats:
    entropy: float                    # E = sum |ln w| w  (nats)
    deviation: float                  # sigma = sqrt(sum (|ln w| - E)^2 w)
    second_log_moment_finite: bool
    second_log_moment_residual: float  # scale of what truncation may hide


@dataclass(frozen=True)
class AtomicDistribution:
    """Law of U: atoms at |ln w| with multiplicity-aggregated masses.

    masses sum to 1 - defect; the defect mass is certified to lie in
    [x_trunc, infinity).
    """

    positions: np.ndarray  # ascending
    masses: np.ndarray
    defect: float
    x_trunc: float

    def mean(self) -> float:
        return _psum(self.positions.astype(np.longdouble) * self.masses)

    @property
    def mass(self) -> float:
        return _psum(self.masses)


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def _build(raw: np.ndarray, tail_raw: float, trace: float, label: str,
           tail_model: Optional[TailModel] = None) -> MarginalSpectrum:
    """Normalize raw nonincreasing positive terms + tail bound to unit mass."""
    denom = _psum(raw) + tail_raw
    w = raw / denom
    s = _psum(w)
    if s > 1.0:
        w = w / s
        s = _psum(w)
    tb = max(tail_raw / denom, 1.0 - s)
    return MarginalSpectrum(weights=w, tail_bound=tb, trace=trace, label=label,
                            tail_model=tail_model)


def euler_spectrum(r: int, K: int) -> MarginalSpectrum:
    """First K normalized eigenvalues of the r-times integrated Euler process.

    lam_k is proportional to (2k-1)^(-(2r+2)); the discarded tail is bounded
    by the integral of (2t-1)^(-(2r+2)) beyond K.
    """
    if r < 0 or int(r) != r:
        raise ValueError("r must be a nonnegative integer")
    if K < 1:
        raise ValueError("K must be >= 1")
    q = 2 * r + 2
    k = np.arange(1, K + 1, dtype=np.float64)
    terms = (2.0 * k - 1.0) ** (-float(q))
    keep = terms > 0.0  # underflow guard for very large r
    terms = terms[keep]
    Keff = terms.size
    tail_raw = (2.0 * Keff - 1.0) ** (1 - q) / (2.0 * (q - 1))
    denom = _psum(terms) + tail_raw
    model = TailModel("euler", {"q": float(q), "scale": 1.0 / denom},
                      k_start=Keff + 1)
    return _build(terms, tail_raw, trace=1.0, label=f"euler(r={r})",
                  tail_model=model)


def _head_fill(head_slots: int, head_mass: float, first_tail_weight: float,
               tail_terms: np.ndarray, tail_raw: float, label: str,
               model_kind: str, model_params: dict, K: int) -> MarginalSpectrum:
    """Spread residual head mass equally over the leading slots."""
    if head_mass < head_slots * first_tail_weight - 1e-15:
        raise InfeasibleBeta(
            f"head mass {head_mass:.6g} cannot dominate tail shape "
            f"(needs >= {head_slots * first_tail_weight:.6g})")
    head = np.full(head_slots, head_mass / head_slots)
    raw = np.concatenate([head, tail_terms])
    model = TailModel(model_kind, model_params, k_start=K + 1)
    # raw already sums (with tail_raw) to 1 by construction
    return _build(raw, tail_raw, trace=1.0, label=label, tail_model=model)


def regvar_spectrum(beta: float, p: float, r: float, K: int) -> MarginalSpectrum:
    """Exact shape beta/(k^p (ln k)^(1+r)) from k0=3 on, head mass spread
    equally over k < 3.  Requires p>1, or p=1 with r>0."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    if not (p > 1.0 or (p == 1.0 and r > 0.0)):
        raise ValueError("need p>1 or (p=1 and r>0) for summability")
    k0 = 3
    if K < k0 + 7:
        raise ValueError("K too small for the regvar family (need K >= 10)")
    k = np.arange(k0, K + 1, dtype=np.float64)
    tail_terms = beta / (k ** p * np.log(k) ** (1.0 + r))
    if np.any(np.diff(tail_terms) > 0.0):
        raise InfeasibleBeta("shape is not nonincreasing from k0 on")
    model = TailModel("regvar", {"beta": beta, "p": p, "r": r}, k_start=K + 1)
    tail_raw = model.total_mass_beyond(K + 1)[1]
    head_mass = 1.0 - _psum(tail_terms) - tail_raw
    return _head_fill(k0 - 1, head_mass, tail_terms[0], tail_terms, tail_raw,
                      f"regvar(beta={beta},p={p},r={r})", "regvar",
                      {"beta": beta, "p": p, "r": r}, K)


def loglog_spectrum(beta: float, s: float, K: int) -> MarginalSpectrum:
    """Exact shape beta/(k ln k (lnln k)^(1+s)) from k0=16 on."""
    if beta <= 0 or s <= 0:
        raise ValueError("beta and s must be positive")
    k0 = 16
    if K < k0 + 16:
        raise ValueError("K too small for the loglog family")
    k = np.arange(k0, K + 1, dtype=np.float64)
    lk = np.log(k)
    tail_terms = beta / (k * lk * np.log(lk) ** (1.0 + s))
    if np.any(np.diff(tail_terms) > 0.0):
        raise InfeasibleBeta("shape is not nonincreasing from k0 on")
    model = TailModel("loglog", {"beta": beta, "s": s}, k_start=K + 1)
    tail_raw = model.total_mass_beyond(K + 1)[1]
    head_mass = 1.0 - _psum(tail_terms) - tail_raw
    return _head_fill(k0 - 1, head_mass, tail_terms[0], tail_terms, tail_raw,
                      f"loglog(beta={beta},s={s})", "loglog",
                      {"beta": beta, "s": s}, K)


def normalize(raw, tail_bound_raw: float = 0.0, label: str = "") -> MarginalSpectrum:
    """Normalize a raw positive sequence (sorted descending) to a spectrum."""
    arr = np.asarray(raw, dtype=np.float64).ravel()
    if arr.size == 0:
        raise EmptySpectrum("no eigenvalues given")
    if np.any(arr < 0.0):
        raise NegativeEigenvalue("eigenvalues must be nonnegative")
    arr = np.sort(arr)[::-1]
    arr = arr[arr > 0.0]
    if arr.size == 0 or arr[0] <= 0.0:
        raise EmptySpectrum("leading eigenvalue must be positive")
    if tail_bound_raw < 0.0:
        raise NegativeEigenvalue("tail bound must be nonnegative")
    trace = _psum(arr) + tail_bound_raw
    return _build(arr, tail_bound_raw, trace=trace, label=label)


def flat_spectrum(l: int) -> MarginalSpectrum:
    """l equal eigenvalues 1/l; deviation is exactly zero."""
    if l < 1:
        raise ValueError("l must be >= 1")
    return MarginalSpectrum(weights=np.full(l, 1.0 / l), tail_bound=0.0,
                            label=f"flat(l={l})")


def two_atom_spectrum(a: float) -> MarginalSpectrum:
    """Two eigenvalues (a, 1-a) with a in (0.5, 1)."""
    if not 0.5 < a < 1.0:
        raise ValueError("need 0.5 < a < 1")
    return MarginalSpectrum(weights=np.array([a, 1.0 - a]), tail_bound=0.0,
                            label=f"two-atom(a={a})")


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------

def spectrum_stats(spec: MarginalSpectrum,
                   finite_threshold: float = 1e-2) -> SpectrumStats:
    w = spec.weights.astype(np.longdouble)
    x = -np.log(w)
    e_ld = np.sum(x * w)
    entropy = float(e_ld)
    if spec.weights[0] == spec.weights[-1]:
        deviation = 0.0  # equal weights: exactly flat by definition
    else:
        dev2 = float(np.sum((x - e_ld) ** 2 * w))
        deviation = math.sqrt(max(dev2, 0.0))
    residual = spec.tail_bound * spec.x_trunc ** 2
    if spec.tail_model is not None:
        # probe the modeled remainder of the second log-moment well past the
        # stored range; a divergent tail shows up as a large residual
        probe = 4.0 * spec.x_trunc + 100.0
        try:
            residual = spec.tail_model.moment_below(
                probe, spec.tail_model.k_start, 2)[1]
        except (OverflowError, ValueError):
            pass
    return SpectrumStats(
        entropy=entropy,
        deviation=deviation,
        second_log_moment_finite=residual < finite_threshold,
        second_log_moment_residual=residual,
    )


def tail_mass(spec: MarginalSpectrum, x: float) -> tuple[float, float]:
    """Bracket of T(x) = sum of weights below exp(-x), tail included."""
    if x < 0:
        raise ValueError("x must be nonnegative")
    thr = -x  # compare in log space: w < e^{-x}  <=>  ln w < -x
    logw = np.log(spec.weights)
    stored = _psum(spec.weights[logw < thr])
    if spec.tail_model is not None:
        mlo, mhi = spec.tail_model.tail_mass_beyond(x, spec.tail_model.k_start)
        mhi = min(mhi, spec.tail_bound)
        mlo = min(mlo, mhi)
        return stored + mlo, stored + mhi
    return stored, stored + spec.tail_bound


def truncated_moment(spec: MarginalSpectrum, p: int, x: float,
                     N: Optional[int] = None) -> float:
    """M_{p,N}(x) = sum_{k<=N} |ln w_k|^p w_k 1(w_k >= e^{-x}) over stored weights."""
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    if x < 0:
        raise ValueError("x must be nonnegative")
    w = spec.weights if N is None else spec.weights[:N]
    logw = np.log(w)
    mask = logw >= -x
    ww = w[mask].astype(np.longdouble)
    return float(np.sum(np.abs(logw[mask]).astype(np.longdouble) ** p * ww))


def truncated_moment_model(spec: MarginalSpectrum, p: int, x: float) -> tuple[float, float]:
    """M_p(x) over the full modeled spectrum (stored part + analytic tail)."""
    base = truncated_moment(spec, p, x, None)
    if spec.tail_model is None:
        return base, base + spec.tail_bound * x ** p
    lo, hi = spec.tail_model.moment_below(x, spec.tail_model.k_start, p)
    return base + lo, base + hi


def u_distribution(spec: MarginalSpectrum) -> AtomicDistribution:
    """Atoms at distinct |ln w| with multiplicity-aggregated masses m(w)*w."""
    w = spec.weights
    # group runs of equal weights (relative tie tolerance)
    positions = []
    masses = []
    i = 0
    n = w.size
    while i < n:
        j = i + 1
        while j < n and (w[i] - w[j]) <= MULTIPLICITY_RTOL * w[i]:
            j += 1
        mult = j - i
        positions.append(-math.log(w[i]))
        masses.append(mult * float(w[i]))
        i = j
    pos = np.asarray(positions)
    mas = np.asarray(masses)
    return AtomicDistribution(positions=pos, masses=mas,
                              defect=spec.tail_bound, x_trunc=spec.x_trunc)


# ---------------------------------------------------------------------------
# interop
# ---------------------------------------------------------------------------

def spectrum_to_json(spec: MarginalSpectrum) -> str:
    return json.dumps({
        "label": spec.label,
        "weights": [repr(float(v)) for v in spec.weights],
        "tail_bound": repr(spec.tail_bound),
        "trace": repr(spec.trace),
    }, sort_keys=True)


def spectrum_from_json(text: str) -> MarginalSpectrum:
    obj = json.loads(text)
    return MarginalSpectrum(
        weights=np.array([float(v) for v in obj["weights"]]),
        tail_bound=float(obj["tail_bound"]),
        trace=float(obj.get("trace", 1.0)),
        label=obj.get("label", ""),
    )


def spectrum_to_csv(spec: MarginalSpectrum) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["k", "lambda_bar"])
    for k, v in enumerate(spec.weights, start=1):
        writer.writerow([k, repr(float(v))])
    return buf.getvalue()
