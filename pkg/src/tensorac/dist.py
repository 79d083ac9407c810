"""Limit-law toolbox: Dickman convolution powers, stable laws, normal law.

The Dickman family D_beta is built by integrating its delay differential
equation panel by panel; the first panel is analytic, so the x^(beta-1)
singularity for beta < 1 never meets the integrator.  Stable laws are
given by their characteristic function in the A-form parametrization and
inverted numerically (Gil-Pelaez).
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .errors import (BadStep, LawError, QuadratureFailure, QuantileBeyondGrid)

__all__ = [
    "EULER_GAMMA",
    "LevyTriplet",
    "DickmanLaw",
    "StableLaw",
    "dickman_build",
    "dickman_cdf",
    "dickman_quantile",
    "stable_cf",
    "stable_cdf",
    "stable_quantile",
    "normal_cdf",
    "normal_quantile",
    "levy_triplet_of",
]

# Euler-Mascheroni constant, 30 digits
EULER_GAMMA = 0.577215664901532860606512090082


# ---------------------------------------------------------------------------
# Levy triplets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LevyTriplet:
    """Canonical representation (gamma, sigma^2, L) of a self-decomposable law.

    The spectral function is a closed-form descriptor:
      kind="zero":     L identically 0 (normal / degenerate laws)
      kind="dickman":  L(x) = beta * ln x on (0, 1], 0 beyond
      kind="stable":   L(x) = -rho (1+beta)/2 x^-alpha (x>0),
                              rho (1-beta)/2 |x|^-alpha (x<0)
    """

    gamma: float
    sigma2: float
    kind: str
    params: dict

    def L(self, x: float) -> float:
        if x == 0.0:
            raise ValueError("L is defined on R \\ {0}")
        if self.kind == "zero":
            return 0.0
        if self.kind == "dickman":
            beta = self.params["beta"]
            if x < 0.0:
                return 0.0
            return beta * math.log(x) if x <= 1.0 else 0.0
        if self.kind == "stable":
            a = self.params["alpha"]
            rho = self.params["rho"]
            b = self.params["beta_skew"]
            if x > 0.0:
                return -rho * (1.0 + b) / (2.0 * x ** a)
            return rho * (1.0 - b) / (2.0 * abs(x) ** a)
        raise ValueError(self.kind)

    def centering_integrals(self, tau: float) -> tuple[float, float]:
        """(int_0^tau x^3 dL/(1+x^2), int_tau^inf x dL/(1+x^2)).

        Closed form for the Dickman spectral function, quadrature for the
        stable one (negative half-line contributes nothing for the laws
        arising here, where L vanishes on x<0 or beta_skew=1 handles it).
        """
        if tau <= 0:
            raise ValueError("tau must be positive")
        if self.kind == "zero":
            return 0.0, 0.0
        if self.kind == "dickman":
            beta = self.params["beta"]
            m = min(tau, 1.0)
            # dL = beta dx / x on (0,1]
            i1 = beta * (m - math.atan(m))
            i2 = beta * (math.atan(1.0) - math.atan(m))
            return i1, i2
        if self.kind == "stable":
            a = self.params["alpha"]
            rho = self.params["rho"]
            b = self.params["beta_skew"]
            cpos = a * rho * (1.0 + b) / 2.0   # dL = cpos x^{-alpha-1} dx, x>0
            cneg = a * rho * (1.0 - b) / 2.0
            i1p, e1 = quad(lambda x: x ** (2.0 - a) / (1.0 + x * x), 0.0, tau,
                           limit=200)
            i2p, e2 = quad(lambda x: x ** (-a) / (1.0 + x * x), tau, np.inf,
                           limit=200)
            i1 = cpos * i1p
            i2 = cpos * i2p
            if cneg > 0.0:
                # symmetric contributions from the negative half-line
                i1 -= cneg * i1p
                i2 -= cneg * i2p
            return i1, i2
        raise ValueError(self.kind)


# ---------------------------------------------------------------------------
# normal law
# ---------------------------------------------------------------------------

SQRT2 = math.sqrt(2.0)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / SQRT2)


def _normal_pdf(x: float) -> float:
    return INV_SQRT_2PI * math.exp(-0.5 * x * x)


def normal_quantile(u: float) -> float:
    """Inverse standard normal via safeguarded Newton; round-trips to 1e-12."""
    if not 0.0 < u < 1.0:
        raise ValueError("u must be in (0,1)")
    if u == 0.5:
        return 0.0
    # asymptotic start deep in the tails, crude start otherwise
    t = min(u, 1.0 - u)
    x = math.sqrt(-2.0 * math.log(t))
    x = x - (math.log(x) + math.log(2.0 * math.pi) / 2.0) / x if x > 1.0 else 0.0
    if u < 0.5:
        x = -abs(x)
    else:
        x = abs(x)
    lo, hi = -40.0, 40.0
    for _ in range(100):
        f = normal_cdf(x) - u
        if f > 0:
            hi = min(hi, x)
        else:
            lo = max(lo, x)
        pdf = _normal_pdf(x)
        if pdf > 0.0:
            step = f / pdf
            xn = x - step
        else:
            xn = 0.5 * (lo + hi)
        if not lo <= xn <= hi:
            xn = 0.5 * (lo + hi)
        if abs(xn - x) < 1e-15 * max(1.0, abs(x)):
            x = xn
            break
        x = xn
    return x


# ---------------------------------------------------------------------------
# Dickman convolution powers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DickmanLaw:
    beta: float
    h: float
    xs: np.ndarray       # grid 0, h, ..., x_max
    pdf: np.ndarray      # density on the grid (pdf[0] may be inf for beta<1)
    cdf: np.ndarray
    tail_defect: float   # 1 - cdf[-1]


def _cubic_interp(xs: np.ndarray, ys: np.ndarray, t: float) -> float:
    """4-point Lagrange interpolation on a uniform grid (one-sided at edges)."""
    h = xs[1] - xs[0]
    n = xs.size
    j = int((t - xs[0]) / h)
    j = min(max(j - 1, 0), n - 4)
    x0 = xs[j]
    s = (t - x0) / h
    y0, y1, y2, y3 = ys[j], ys[j + 1], ys[j + 2], ys[j + 3]
    return (-y0 * (s - 1) * (s - 2) * (s - 3) / 6.0
            + y1 * s * (s - 2) * (s - 3) / 2.0
            - y2 * s * (s - 1) * (s - 3) / 2.0
            + y3 * s * (s - 1) * (s - 2) / 6.0)


def dickman_build(beta: float, x_max: float = 12.0, h: float = 1.0 / 256.0) -> DickmanLaw:
    """Density and CDF of the beta-convolution power of the Dickman law.

    Panel (0,1] is the analytic initial condition; each later panel
    [m, m+1] is integrated by classical RK4, with the lagged density read
    from the previously completed panel (analytically on the first one,
    by cubic interpolation afterwards).
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    if x_max < 2:
        raise ValueError("x_max must be >= 2")
    inv_h = 1.0 / h
    if h > 1.0 / 64.0 or abs(inv_h - round(inv_h)) > 1e-9:
        raise BadStep("need h <= 1/64 with 1/h an integer (lag alignment)")
    nper = int(round(inv_h))
    npanels = int(math.ceil(x_max - 1e-12))
    n = npanels * nper + 1
    xs = np.arange(n) * h
    pdf = np.zeros(n)
    cdf = np.zeros(n)

    c0 = math.exp(-beta * EULER_GAMMA) / math.gamma(beta)

    def rho_01(t: float) -> float:
        # initial condition on (0,1]; t=0 takes the right-limit
        if t < 0.0:
            return 0.0
        if t == 0.0:
            return c0 if beta == 1.0 else (0.0 if beta > 1.0 else math.inf)
        return c0 * t ** (beta - 1.0)

    def rho_12(x: float) -> float:
        # exact variation-of-constants solution on [1,2]:
        # rho(x) = c0 x^(beta-1) (1 - beta I(v)), v=(x-1)/x,
        # I(v) = sum_k v^(beta+k)/(beta+k)
        if x <= 1.0:
            return rho_01(x)
        v = (x - 1.0) / x
        acc = 0.0
        vp = v ** beta
        for k in range(200):
            term = vp / (beta + k)
            acc += term
            vp *= v
            if term < 1e-18 * max(acc, 1.0):
                break
        return c0 * x ** (beta - 1.0) * (1.0 - beta * acc)

    # panel [0,1]: rho = c0 x^(beta-1), CDF = c0 x^beta / beta  (exact)
    x1 = xs[1:nper + 1]
    pdf[1:nper + 1] = c0 * x1 ** (beta - 1.0)
    pdf[0] = rho_01(0.0)
    cdf[1:nper + 1] = c0 * x1 ** beta / beta
    cdf[0] = 0.0

    for m in range(1, npanels):
        base = m * nper  # index of x = m
        lo = (m - 1) * nper

        if m == 1:
            # analytic panel, no integration step needed
            for i in range(1, nper + 1):
                pdf[base + i] = max(rho_12(xs[base + i]), 0.0)
        else:
            if m == 2:
                lag = rho_12
            else:
                # stencil stays inside the completed panel so the density
                # kink at the integer boundary never enters the interpolation
                seg_x = xs[lo: base + 1]
                seg_y = pdf[lo: base + 1]

                def lag(t: float, seg_x=seg_x, seg_y=seg_y) -> float:
                    return _cubic_interp(seg_x, seg_y, t)

            def deriv(x: float, rho: float) -> float:
                return ((beta - 1.0) * rho - beta * lag(x - 1.0)) / x

            rho = pdf[base]
            for i in range(nper):
                x = xs[base + i]
                k1 = deriv(x, rho)
                k2 = deriv(x + 0.5 * h, rho + 0.5 * h * k1)
                k3 = deriv(x + 0.5 * h, rho + 0.5 * h * k2)
                k4 = deriv(x + h, rho + h * k3)
                rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                pdf[base + i + 1] = max(rho, 0.0)
                rho = pdf[base + i + 1]

        # cumulative Simpson across the completed panel
        for i in range(0, nper, 2):
            j = base + i
            cdf[j + 1] = cdf[j] + h / 12.0 * (5.0 * pdf[j] + 8.0 * pdf[j + 1]
                                              - pdf[j + 2])
            cdf[j + 2] = cdf[j] + h / 3.0 * (pdf[j] + 4.0 * pdf[j + 1]
                                             + pdf[j + 2])

    cdf = np.maximum.accumulate(np.minimum(cdf, 1.0))
    return DickmanLaw(beta=beta, h=h, xs=xs, pdf=pdf, cdf=cdf,
                      tail_defect=max(0.0, 1.0 - float(cdf[-1])))


def dickman_cdf(law: DickmanLaw, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= law.xs[-1]:
        return float(law.cdf[-1])
    return float(np.interp(x, law.xs, law.cdf))


def dickman_quantile(law: DickmanLaw, u: float) -> float:
    """Monotone bisection on the grid CDF; round-trips to ~1e-8."""
    if not 0.0 < u < 1.0:
        raise ValueError("u must be in (0,1)")
    if u > law.cdf[-1]:
        raise QuantileBeyondGrid(
            f"u={u} beyond resolved CDF mass {law.cdf[-1]:.12f}")
    lo, hi = 0.0, float(law.xs[-1])
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if dickman_cdf(law, mid) >= u:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-12 * max(1.0, hi):
            break
    return hi


# ---------------------------------------------------------------------------
# stable laws, A-form
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StableLaw:
    alpha: float
    rho: float = 1.0
    beta_skew: float = 1.0
    mu: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 2.0:
            raise LawError("alpha must lie in (0,2)")
        if self.rho <= 0.0:
            raise LawError("rho must be positive")
        if not -1.0 <= self.beta_skew <= 1.0:
            raise LawError("beta_skew must lie in [-1,1]")


def kappa_alpha(alpha: float) -> float:
    if alpha == 1.0:
        return math.pi / 2.0
    return math.gamma(2.0 - alpha) * math.cos(math.pi * alpha / 2.0) / (1.0 - alpha)


def stable_cf(law: StableLaw, t: float) -> complex:
    """A-form characteristic function; cf(0)=1 by continuity for alpha=1."""
    if t == 0.0:
        return complex(1.0, 0.0)
    a = law.alpha
    ka = kappa_alpha(a)
    if a == 1.0:
        om = -(2.0 / math.pi) * math.log(abs(t))
    else:
        om = math.tan(math.pi * a / 2.0)
    sgn = 1.0 if t > 0 else -1.0
    expo = (1j * law.mu * t
            - law.rho * ka * abs(t) ** a * (1.0 - 1j * law.beta_skew * sgn * om))
    return cmath.exp(expo)


def _gil_pelaez_integrand(law: StableLaw, x: float, t: float) -> float:
    return (cmath.exp(-1j * t * x) * stable_cf(law, t)).imag / t


def stable_cdf(law: StableLaw, x: float, tol: float = 1e-7) -> float:
    """Gil-Pelaez inversion: F(x) = 1/2 - (1/pi) int_0^inf Im[e^{-itx} cf]/t dt.

    The quadrature is split at t=1 (the alpha=1 log term is integrable
    there); the oscillatory tail is handled by Fourier-weighted quadrature
    when x is away from zero, or by direct truncation otherwise.
    """
    f = lambda t: _gil_pelaez_integrand(law, x, t)
    with warnings.catch_warnings():
        # the heavy-tail integrand trips quad's divergence heuristic; the
        # returned estimate is accurate (guarded by err below)
        warnings.simplefilter("ignore", IntegrationWarning)
        v1, e1 = quad(f, 0.0, 1.0, limit=400, epsabs=tol * 0.1, epsrel=1e-10)

    a, ka, rho = law.alpha, kappa_alpha(law.alpha), law.rho

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        if abs(x) >= 0.05:
            # Im(e^{-itx} cf) = Im(cf) cos(tx) - Re(cf) sin(tx)
            g_cos = lambda t: stable_cf(law, t).imag / t
            g_sin = lambda t: stable_cf(law, t).real / t
            v2c, e2c = quad(g_cos, 1.0, np.inf, weight="cos", wvar=x,
                            limit=400, epsabs=tol * 0.1)
            v2s, e2s = quad(g_sin, 1.0, np.inf, weight="sin", wvar=x,
                            limit=400, epsabs=tol * 0.1)
            v2 = v2c - v2s
            e2 = abs(e2c) + abs(e2s)
        else:
            # modulus of cf decays like exp(-rho kappa t^alpha); truncate safely
            t_hi = (60.0 / (rho * ka)) ** (1.0 / a)
            v2, e2 = quad(f, 1.0, max(t_hi, 2.0), limit=800, epsabs=tol * 0.1)
    err = abs(e1) + abs(e2)
    if err > 50.0 * tol:
        raise QuadratureFailure(f"Gil-Pelaez error estimate {err:.2e} > tolerance")
    val = 0.5 - (v1 + v2) / math.pi
    return min(1.0, max(0.0, val))


def stable_quantile(law: StableLaw, u: float, xtol: float = 1e-6) -> float:
    """Bisection on the (strictly increasing) stable CDF."""
    if not 0.0 < u < 1.0:
        raise ValueError("u must be in (0,1)")
    lo, hi = -2.0, 2.0
    for _ in range(200):
        if stable_cdf(law, lo) < u:
            break
        lo *= 2.0
    for _ in range(200):
        if stable_cdf(law, hi) > u:
            break
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if stable_cdf(law, mid) >= u:
            hi = mid
        else:
            lo = mid
        if hi - lo < xtol:
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# triplets
# ---------------------------------------------------------------------------

def stable_I_alpha(alpha: float) -> float:
    """The centering integral I_alpha: pi/(2 cos(pi alpha/2)) off alpha=1,
    EulerGamma - 1 at alpha=1."""
    if alpha == 1.0:
        return EULER_GAMMA - 1.0
    return math.pi / (2.0 * math.cos(math.pi * alpha / 2.0))


def levy_triplet_of(law: Union[StableLaw, DickmanLaw]) -> LevyTriplet:
    if isinstance(law, DickmanLaw):
        return LevyTriplet(gamma=law.beta * math.pi / 4.0, sigma2=0.0,
                           kind="dickman", params={"beta": law.beta})
    if isinstance(law, StableLaw):
        gamma = law.mu + law.alpha * law.beta_skew * law.rho * stable_I_alpha(law.alpha)
        return LevyTriplet(gamma=gamma, sigma2=0.0, kind="stable",
                           params={"alpha": law.alpha, "rho": law.rho,
                                   "beta_skew": law.beta_skew})
    raise LawError(f"no triplet for {type(law).__name__}")
