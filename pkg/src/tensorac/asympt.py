"""Asymptotic regime classification and log-complexity predictors.

For a tensor degree of a fixed marginal spectrum, ln n(eps) follows
a_d + q(eps) b_d + o(b_d) where q is the (1-eps^2)-quantile of a limit
law determined by the tail T(x) of the log-eigenvalue distribution:

  flat spectrum               -> degenerate law, exact closed form
  finite second log-moment    -> normal, a_d = E d, b_d = sigma sqrt(d)
  T regularly varying, a=2    -> normal with slowly varying correction
  T regularly varying, 0<a<2  -> totally right-skewed stable S_{a,1}
  T slowly varying (a=0)      -> no affine normalization exists; instead
                                 d * T(ln n) -> -ln(1-eps^2)

Everything here is finite-d diagnostic evidence: the dichotomies are
asymptotic statements and a finite spectrum can only be routed through
declared thresholds, which are reported with the fit residuals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.integrate import quad

from . import dist as dist_mod
from .dist import (DickmanLaw, LevyTriplet, StableLaw, dickman_build,
                   dickman_quantile, normal_quantile, stable_quantile)
from .errors import (InconclusiveFit, IntegrableSingularity, MissingLaw,
                     NoConvergence, UnsupportedRegime)
from .spectra import (MarginalSpectrum, spectrum_stats, tail_mass,
                      truncated_moment_model)
from .tensor import TensorProblem

__all__ = [
    "RegimeKind",
    "Regime",
    "Prediction",
    "SvfHandle",
    "LawContext",
    "classify_degree_regime",
    "predict_log_complexity",
    "a_star_alpha1",
    "l_tilde",
    "de_bruijn_numeric",
    "check_conditions_ABC",
    "ConditionReport",
    "boundedness_diagnostic",
    "euler_tractability_diagnostic",
    "slow_var_check",
    "darling_psi",
]


# ---------------------------------------------------------------------------
# slowly varying function handles
# ---------------------------------------------------------------------------

@dataclass
class SvfHandle:
    """Wrapper around a slowly varying function x -> phi(x), x >= x0.

    phi_log, when present, evaluates phi(e^z): slowly-varying regimes put
    quantiles at arguments like exp(exp(1700)) where x itself overflows.
    """

    phi: Callable[[float], float]
    x0: float = 1.0
    label: str = ""
    phi_log: Optional[Callable[[float], float]] = None

    def __call__(self, x: float) -> float:
        v = self.phi(max(x, self.x0))
        if v <= 0.0:
            raise IntegrableSingularity(f"phi({x}) = {v} <= 0")
        return v

    def at_log(self, z: float) -> float:
        """phi(e^z)."""
        if self.phi_log is not None:
            return self.phi_log(max(z, math.log(self.x0)))
        return self(math.exp(z))


def l_tilde(svf: SvfHandle, x: float) -> float:
    """The log-integral transform int phi(t)/t dt from the handle's x0.

    Integrating from x0 (not 0) shifts the result by a constant, which
    the downstream asymptotics never see.
    """
    if x <= svf.x0:
        return 0.0
    # substitute u = ln t: integral of phi(e^u) du
    val, _ = quad(lambda u: svf(math.exp(u)), math.log(svf.x0), math.log(x),
                  limit=400)
    if not math.isfinite(val):
        raise IntegrableSingularity("l_tilde integral diverged")
    return val


def de_bruijn_numeric(svf: SvfHandle, x: float, tol: float = 1e-10,
                      max_iter: int = 500) -> float:
    """Fixed point y = 1/phi(x y), the numeric de Bruijn conjugate value.

    The accepted y satisfies |y * phi(x y) - 1| < 10 tol, the defining
    asymptotic-inverse identity at this x.
    """
    y = 1.0 / svf(x)
    for _ in range(max_iter):
        y_new = 1.0 / svf(x * y)
        if abs(y_new - y) <= tol * max(abs(y_new), 1e-300):
            y = y_new
            break
        y = 0.5 * (y + y_new)  # damped: plain iteration can 2-cycle
    else:
        raise NoConvergence(f"de Bruijn iteration stalled at x={x}")
    resid = abs(y * svf(x * y) - 1.0)
    if resid > 10.0 * max(tol, 1e-12):
        raise NoConvergence(f"fixed point defect {resid:.2e} at x={x}")
    return y


def darling_psi(spec: MarginalSpectrum, y: float) -> float:
    """psi(y) = 1 - sum_k w_k^(1 + 1/y), the Laplace-type transform of U.

    The discarded tail contributes at most tail_bound to the sum, so the
    stored-weight value is within tail_bound of the truth.
    """
    if y <= 0:
        raise ValueError("y must be positive")
    w = spec.weights.astype(np.longdouble)
    return 1.0 - float(np.sum(w ** (1.0 + 1.0 / y)))


# ---------------------------------------------------------------------------
# regimes
# ---------------------------------------------------------------------------

class RegimeKind(Enum):
    FLAT = "Flat"
    NORMAL_2MOM = "Normal2Mom"
    NORMAL_SV = "NormalSV"
    STABLE = "Stable"
    SLOW_VAR = "SlowVar"
    DICKMAN_PRODUCT = "DickmanProduct"


@dataclass
class Regime:
    kind: RegimeKind
    spec: Optional[MarginalSpectrum] = None
    entropy: float = 0.0
    deviation: float = 0.0
    alpha: Optional[float] = None        # Stable / fitted tail index
    beta: Optional[float] = None         # DickmanProduct parameter
    svf: Optional[SvfHandle] = None
    fit_residual: float = 0.0
    notes: str = ""

    def __post_init__(self):
        if self.kind is RegimeKind.NORMAL_2MOM and not self.deviation > 0.0:
            raise UnsupportedRegime("Normal2Mom requires deviation > 0")
        if self.kind is RegimeKind.STABLE and self.alpha is None:
            raise UnsupportedRegime("Stable regime needs alpha")
        if self.kind is RegimeKind.DICKMAN_PRODUCT and self.beta is None:
            raise UnsupportedRegime("DickmanProduct regime needs beta")


def _tail_mid(spec: MarginalSpectrum, x: float) -> float:
    lo, hi = tail_mass(spec, x)
    return 0.5 * (lo + hi)


def classify_degree_regime(spec: MarginalSpectrum,
                           fit_window: Optional[tuple[float, float]] = None,
                           thresholds: tuple[float, float] = (0.1, 0.05),
                           residual_limit: float = 0.35) -> Regime:
    """Route a marginal spectrum to its tensor-degree limit regime.

    deviation == 0 goes to Flat; a numerically certified second log-moment
    with positive deviation goes to Normal2Mom; otherwise the tail index
    alpha is fitted by log-log least squares of T(x) over the window and
    thresholded: |alpha-2| < 0.1 -> NormalSV, alpha < 0.05 -> SlowVar,
    else Stable(alpha).
    """
    stats = spectrum_stats(spec)
    if stats.deviation == 0.0:
        return Regime(kind=RegimeKind.FLAT, spec=spec, entropy=stats.entropy,
                      deviation=0.0)
    if stats.second_log_moment_finite and stats.deviation > 0.0:
        return Regime(kind=RegimeKind.NORMAL_2MOM, spec=spec,
                      entropy=stats.entropy, deviation=stats.deviation)

    if fit_window is None:
        x_hi = spec.x_trunc if spec.tail_model is None else 4.0 * spec.x_trunc
        x_lo = max(1.0, 0.25 * x_hi)
        fit_window = (x_lo, 0.9 * x_hi)
    xs = np.geomspace(fit_window[0], fit_window[1], 24)
    ts = np.array([_tail_mid(spec, float(x)) for x in xs])
    keep = ts > 0.0
    if keep.sum() < 6:
        raise InconclusiveFit("tail mass vanishes over the fit window")
    lx, lt = np.log(xs[keep]), np.log(ts[keep])
    slope, intercept = np.polyfit(lx, lt, 1)
    resid = float(np.sqrt(np.mean((lt - (slope * lx + intercept)) ** 2)))
    if resid > residual_limit:
        raise InconclusiveFit(f"log-log fit residual {resid:.3f} too large")
    alpha = -float(slope)
    sv = SvfHandle(lambda x, a=alpha: _tail_mid(spec, x) * x ** a,
                   x0=fit_window[0], label=f"T(x) x^{alpha:.3f}")
    near2, near0 = thresholds
    if abs(alpha - 2.0) < near2:
        return Regime(kind=RegimeKind.NORMAL_SV, spec=spec, alpha=alpha,
                      entropy=stats.entropy, deviation=stats.deviation,
                      svf=sv, fit_residual=resid)
    if alpha < near0:
        phi_log = None
        if spec.tail_model is not None:
            phi_log = lambda z: spec.tail_model.tail_mass_logx(z)  # noqa: E731
        return Regime(kind=RegimeKind.SLOW_VAR, spec=spec, alpha=alpha,
                      svf=SvfHandle(lambda x: _tail_mid(spec, x),
                                    x0=fit_window[0], label="T",
                                    phi_log=phi_log),
                      fit_residual=resid)
    if alpha > 2.0 + near2:
        # moment probe was inconclusive but the tail decays faster than x^-2
        return Regime(kind=RegimeKind.NORMAL_2MOM, spec=spec,
                      entropy=stats.entropy, deviation=stats.deviation,
                      fit_residual=resid, notes="routed by tail fit")
    return Regime(kind=RegimeKind.STABLE, spec=spec, alpha=alpha,
                  entropy=stats.entropy, deviation=stats.deviation,
                  svf=sv, fit_residual=resid)


# ---------------------------------------------------------------------------
# law context and predictions
# ---------------------------------------------------------------------------

class LawContext:
    """Lazy cache of quantile evaluators for the limit laws."""

    def __init__(self):
        self._dickman: dict[float, DickmanLaw] = {}
        self._stable_q: dict[tuple[float, float], float] = {}

    def dickman(self, beta: float) -> DickmanLaw:
        if beta not in self._dickman:
            self._dickman[beta] = dickman_build(beta)
        return self._dickman[beta]

    def dickman_quantile(self, beta: float, u: float) -> float:
        return dickman_quantile(self.dickman(beta), u)

    def stable_quantile(self, alpha: float, u: float) -> float:
        key = (alpha, u)
        if key not in self._stable_q:
            self._stable_q[key] = stable_quantile(StableLaw(alpha=alpha), u)
        return self._stable_q[key]

    @staticmethod
    def normal_quantile(u: float) -> float:
        return normal_quantile(u)


@dataclass
class Prediction:
    regime: Regime
    d: int
    eps: float
    a_d: float
    b_d: float
    q: float
    ln_n: float                  # a_d + q b_d (or the SlowVar solution)
    lnln_n: Optional[float] = None
    notes: str = ""


def a_star_alpha1(spec: MarginalSpectrum, d: int, b_d: float) -> float:
    """Centering for the alpha=1 stable regime:
    d * sum |ln w| w 1(w > e^{-b_d}) + (1 - EulerGamma) b_d."""
    if b_d <= 0.0:
        return 0.0
    m1 = truncated_moment_model(spec, 1, b_d)
    return d * 0.5 * (m1[0] + m1[1]) + (1.0 - dist_mod.EULER_GAMMA) * b_d


def _solve_b_d_stable(spec: MarginalSpectrum, d: int) -> float:
    """b_d from d * T(b_d) = 1 (the norming-sequence condition)."""
    lo, hi = 1e-6, 10.0
    for _ in range(200):
        if d * _tail_mid(spec, hi) < 1.0:
            break
        hi *= 2.0
    else:
        raise NoConvergence("norming sequence out of range")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if d * _tail_mid(spec, mid) >= 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-9 * hi:
            break
    return 0.5 * (lo + hi)


def _solve_b_d_normal_sv(spec: MarginalSpectrum, d: int) -> float:
    """b_d from d * M_2(b_d) = b_d^2 (normal norming with infinite variance)."""
    def g(b: float) -> float:
        m2 = truncated_moment_model(spec, 2, b)
        return d * 0.5 * (m2[0] + m2[1]) - b * b

    lo, hi = 1e-3, 10.0
    for _ in range(300):
        if g(hi) < 0.0:
            break
        hi *= 1.5
    else:
        raise NoConvergence("normal-SV norming out of range")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-9 * hi:
            break
    return 0.5 * (lo + hi)


def predict_log_complexity(regime: Regime, d: int, eps: float,
                           dist_ctx: Optional[LawContext] = None) -> Prediction:
    """Evaluate the regime's predictor a_d + q(eps) b_d at (d, eps)."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must be in (0,1)")
    if dist_ctx is None:
        dist_ctx = LawContext()
    level = 1.0 - eps * eps
    spec = regime.spec
    kind = regime.kind

    if kind is RegimeKind.FLAT:
        if spec is None:
            raise MissingLaw("flat regime needs its spectrum")
        lnl = math.log(spec.size)
        ln_n = d * lnl + math.log(level)
        return Prediction(regime, d, eps, a_d=d * lnl, b_d=math.sqrt(d), q=0.0,
                          ln_n=ln_n, notes="degenerate law; exact closed form")

    if kind is RegimeKind.NORMAL_2MOM:
        q = dist_ctx.normal_quantile(level)
        a_d = regime.entropy * d
        b_d = regime.deviation * math.sqrt(d)
        return Prediction(regime, d, eps, a_d, b_d, q, a_d + q * b_d)

    if kind is RegimeKind.NORMAL_SV:
        if spec is None:
            raise MissingLaw("NormalSV regime needs its spectrum")
        q = dist_ctx.normal_quantile(level)
        a_d = regime.entropy * d
        b_d = _solve_b_d_normal_sv(spec, d)
        return Prediction(regime, d, eps, a_d, b_d, q, a_d + q * b_d,
                          notes="b_d from d M_2(b) = b^2")

    if kind is RegimeKind.STABLE:
        if spec is None:
            raise MissingLaw("stable regime needs its spectrum")
        alpha = float(regime.alpha)
        q = dist_ctx.stable_quantile(alpha, level)
        b_d = _solve_b_d_stable(spec, d)
        if alpha < 1.0 - 1e-9:
            a_d = 0.0
        elif alpha > 1.0 + 1e-9:
            a_d = regime.entropy * d
        else:
            a_d = a_star_alpha1(spec, d, b_d)
        return Prediction(regime, d, eps, a_d, b_d, q, a_d + q * b_d,
                          notes="b_d from d T(b) = 1")

    if kind is RegimeKind.DICKMAN_PRODUCT:
        q = dist_ctx.dickman_quantile(float(regime.beta), level)
        b_d = math.log(max(d, 2))
        return Prediction(regime, d, eps, 0.0, b_d, q, q * b_d)

    if kind is RegimeKind.SLOW_VAR:
        if regime.svf is None:
            raise MissingLaw("SlowVar regime needs the tail handle")
        target = -math.log(level) / d
        # T is nonincreasing; solve T(e^z) = target in z = ln(ln n), since
        # ln n itself can be far beyond float range
        z_lo = math.log(regime.svf.x0)
        z_hi = z_lo + 1.0
        for _ in range(10000):
            if regime.svf.at_log(z_hi) < target:
                break
            z_hi += 1.0
        else:
            raise NoConvergence("SlowVar predictor out of range")
        for _ in range(300):
            mid = 0.5 * (z_lo + z_hi)
            if regime.svf.at_log(mid) >= target:
                z_lo = mid
            else:
                z_hi = mid
            if z_hi - z_lo <= 1e-10 * max(1.0, abs(z_hi)):
                break
        z = 0.5 * (z_lo + z_hi)
        ln_n = math.exp(z) if z < 700.0 else math.inf
        return Prediction(regime, d, eps, a_d=0.0, b_d=1.0, q=0.0, ln_n=ln_n,
                          lnln_n=z,
                          notes="solves d T(ln n) = -ln(1-eps^2)")

    raise UnsupportedRegime(str(kind))


# ---------------------------------------------------------------------------
# condition (A)(B)(C) checker
# ---------------------------------------------------------------------------

@dataclass
class ConditionReport:
    residual_a: float
    residual_b: float
    residual_c: float
    curve_a: list
    curve_b: list
    curve_c: list
    d: int
    b_d: float
    note: str = "finite-d diagnostic evidence, not a limit decision"


def _as_groups(marginals: Union[TensorProblem, Sequence[MarginalSpectrum]],
               d: Optional[int]) -> list[tuple[MarginalSpectrum, int]]:
    if isinstance(marginals, TensorProblem):
        groups = marginals.groups()
        total = sum(c for _, c in groups)
        if d is not None and d != total:
            raise ValueError(f"problem has d={total}, requested {d}")
        return groups
    specs = list(marginals)
    if d is not None:
        specs = specs[:d]
    out: list[tuple[MarginalSpectrum, int]] = []
    index: dict = {}
    for s in specs:
        key = (s.weights.tobytes(), s.tail_bound)
        if key in index:
            i = index[key]
            out[i] = (out[i][0], out[i][1] + 1)
        else:
            index[key] = len(out)
            out.append((s, 1))
    return out


def check_conditions_ABC(marginals: Union[TensorProblem, Sequence[MarginalSpectrum]],
                         a_d: float, b_d: float, d: Optional[int],
                         target: LevyTriplet, N: Optional[int] = None,
                         tau_grid: Sequence[float] = (0.25, 0.5, 0.75, 1.0, 1.5, 2.0),
                         x_grid: Sequence[float] = (0.25, 0.5, 0.75, 1.0)) -> ConditionReport:
    """Evaluate the three self-decomposable convergence conditions at finite d.

    (A) sum_j sum_{k<=N} w 1(w < e^{-x b_d})            vs  -L(x)
    (B) (sum_j M_1,N(tau b_d) - a_d) / b_d              vs  gamma + centering
    (C) sum_j (M_2,N - M_1,N^2)(tau b_d) / b_d^2        vs  sigma^2

    Residuals are the outputs; nothing is decided here.
    """
    groups = _as_groups(marginals, d)
    d_eff = sum(c for _, c in groups)
    if b_d <= 0.0:
        raise ValueError("b_d must be positive")

    # per-group prefix sums over the first N log-weights
    prep = []
    for spec, count in groups:
        w = spec.weights if N is None else spec.weights[:N]
        lw = -np.log(w)           # nondecreasing
        cw = np.cumsum(w)
        c1 = np.cumsum(lw * w)
        c2 = np.cumsum(lw * lw * w)
        prep.append((lw, cw, c1, c2, float(cw[-1]), count))

    def sums_at(x: float) -> tuple[float, float, float]:
        """(sum_j w 1(w < e^-x), sum_j M1, sum_j per-marginal variance)."""
        tot_small = 0.0
        tot_m1 = 0.0
        tot_var = 0.0
        for lw, cw, c1, c2, wtot, count in prep:
            i = int(np.searchsorted(lw, x, side="right"))
            if i == 0:
                small, m1, m2 = wtot, 0.0, 0.0
            else:
                small = wtot - float(cw[i - 1])
                m1 = float(c1[i - 1])
                m2 = float(c2[i - 1])
            tot_small += count * small
            tot_m1 += count * m1
            tot_var += count * (m2 - m1 * m1)
        return tot_small, tot_m1, tot_var

    curve_a = []
    res_a = 0.0
    for x in x_grid:
        lhs = sums_at(x * b_d)[0]
        rhs = -target.L(x)
        curve_a.append((x, lhs, rhs))
        res_a = max(res_a, abs(lhs - rhs))

    curve_b = []
    curve_c = []
    res_b = 0.0
    for tau in tau_grid:
        _, m1, var = sums_at(tau * b_d)
        lhs_b = (m1 - a_d) / b_d
        i1, i2 = target.centering_integrals(tau)
        rhs_b = target.gamma + i1 - i2
        curve_b.append((tau, lhs_b, rhs_b))
        res_b = max(res_b, abs(lhs_b - rhs_b))
        curve_c.append((tau, var / (b_d * b_d), target.sigma2))

    # (C) is a tau->0 double limit; report the smallest-tau residual
    tau_min = min(tau_grid)
    res_c = abs([c for t, c, _ in curve_c if t == tau_min][0] - target.sigma2)

    return ConditionReport(residual_a=res_a, residual_b=res_b, residual_c=res_c,
                           curve_a=curve_a, curve_b=curve_b, curve_c=curve_c,
                           d=d_eff, b_d=b_d)


# ---------------------------------------------------------------------------
# boundedness and tractability diagnostics
# ---------------------------------------------------------------------------

@dataclass
class BoundednessReport:
    partial_sums: list          # (j, S_j) checkpoints
    tag: str                    # converging / diverging-log / diverging-linear
    half_ratio: float           # (S_d - S_{d/2}) / S_{d/2}


def boundedness_diagnostic(marginals: Union[TensorProblem, Sequence[MarginalSpectrum]],
                           ) -> BoundednessReport:
    """Partial sums S_d = sum_{j<=d} sum_{k>=2} lam_k/lam_1 with a growth tag.

    Bounded complexity for every eps is equivalent to S_infty < infinity;
    at finite d only the trend is observable.
    """
    if isinstance(marginals, TensorProblem):
        specs = marginals.marginal_list()
    else:
        specs = list(marginals)
    incs = np.array([(float(np.sum(s.weights[1:])) + s.tail_bound) / float(s.weights[0])
                     for s in specs])
    sums = np.cumsum(incs)
    dmax = len(specs)
    checkpoints = sorted(set(int(v) for v in np.geomspace(1, dmax, min(24, dmax))))
    partial = [(j, float(sums[j - 1])) for j in checkpoints]
    s_full = float(sums[-1])
    s_half = float(sums[dmax // 2 - 1]) if dmax >= 2 else s_full
    ratio = (s_full - s_half) / s_half if s_half > 0 else math.inf
    if ratio < 0.02:
        tag = "converging"
    elif ratio > 0.7:
        tag = "diverging-linear"
    else:
        tag = "diverging-log"
    return BoundednessReport(partial_sums=partial, tag=tag, half_ratio=ratio)


@dataclass
class TractabilityReport:
    r_increasing: bool
    qpt_statistic_sup: float      # sup_d (1/ln+ d) sum (r_j+1) 3^(-2rj-2)
    qpt_statistic_last: float
    spt_partial_sums: dict        # tau -> (S_last, converging flag)
    note: str = "diagnostic evidence at finite d, never a proof"


def euler_tractability_diagnostic(r_rule: Union[Callable[[int], int], Sequence[int]],
                                  d_max: int,
                                  tau_grid: Sequence[float] = (0.25, 0.5, 0.75),
                                  ) -> TractabilityReport:
    """Finite-d statistics behind the Euler-family tractability criteria:
    weak ~ r_j -> infinity; quasi-polynomial ~ bounded normalized sums of
    (r_j+1) 3^(-2 r_j - 2); (strong) polynomial ~ summable 3^(-2 tau (r_j+1))."""
    if callable(r_rule):
        r = np.array([int(r_rule(j)) for j in range(1, d_max + 1)], dtype=np.int64)
    else:
        r = np.asarray(list(r_rule)[:d_max], dtype=np.int64)
    if np.any(np.diff(r) < 0) or np.any(r < 0):
        raise ValueError("r_j must be nondecreasing nonnegative integers")
    terms = (r + 1.0) * 3.0 ** (-2.0 * r - 2.0)
    csum = np.cumsum(terms)
    dd = np.arange(1, d_max + 1, dtype=np.float64)
    qpt = csum / np.maximum(np.log(dd), 1.0)
    spt = {}
    for tau in tau_grid:
        s = np.cumsum(3.0 ** (-2.0 * tau * (r + 1.0)))
        half = float(s[d_max // 2 - 1]) if d_max >= 2 else float(s[-1])
        conv = (float(s[-1]) - half) < 0.05 * max(half, 1e-300)
        spt[float(tau)] = (float(s[-1]), bool(conv))
    r_increasing = bool(r[-1] > r[max(0, d_max // 10 - 1)])
    return TractabilityReport(
        r_increasing=r_increasing,
        qpt_statistic_sup=float(np.max(qpt)),
        qpt_statistic_last=float(qpt[-1]),
        spt_partial_sums=spt,
    )


@dataclass
class SlowVarReport:
    residual_lo: float
    residual_hi: float
    psi_over_phi: float


def slow_var_check(svf: SvfHandle, d: int, eps: float,
                   ln_n_interval: tuple[float, float],
                   spec: Optional[MarginalSpectrum] = None) -> SlowVarReport:
    """Residual of d phi(ln n) + ln(1-eps^2) over the ln n bracket, plus the
    Darling transform ratio psi/phi at the bracket midpoint."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must be in (0,1)")
    target = -math.log(1.0 - eps * eps)
    lo, hi = ln_n_interval
    vals = sorted((d * svf(lo) - target, d * svf(hi) - target))
    ratio = math.nan
    if spec is not None:
        mid = 0.5 * (lo + hi)
        ratio = darling_psi(spec, mid) / svf(mid)
    return SlowVarReport(residual_lo=vals[0], residual_hi=vals[1],
                         psi_over_phi=ratio)
