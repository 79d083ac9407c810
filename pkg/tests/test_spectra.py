import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tensorac import spectra
from tensorac.errors import (EmptySpectrum, InfeasibleBeta, NegativeEigenvalue)


def test_euler_first_weight_matches_series():
    # sum (2k-1)^-2 = pi^2/8, so the leading normalized eigenvalue is 8/pi^2
    s = spectra.euler_spectrum(0, 1000)
    assert abs(s.weights[0] - 8.0 / math.pi ** 2) < 1e-6
    assert abs(s.weights[1] / s.weights[0] - 1.0 / 9.0) < 1e-14


def test_euler_weight_ratios_exact():
    s = spectra.euler_spectrum(1, 50)
    k = np.arange(1, 51)
    expected = (2.0 * k - 1.0) ** -4.0
    assert np.allclose(s.weights / s.weights[0], expected, rtol=1e-14)


def test_euler_large_r_degenerates():
    s = spectra.euler_spectrum(40, 10)
    assert s.weights[0] > 1.0 - 1e-12
    assert s.tail_bound < 1e-30


def test_euler_mass_closure():
    for r, K in ((0, 10), (0, 100000), (2, 7), (5, 4)):
        s = spectra.euler_spectrum(r, K)
        total = math.fsum(s.weights) + s.tail_bound
        assert 1.0 - 1e-13 <= total <= 1.0 + 1e-12
        assert math.fsum(s.weights) <= 1.0 + 1e-15


def test_regvar_invariants():
    s = spectra.regvar_spectrum(0.1, 2.0, 0.0, 10 ** 4)
    assert np.all(np.diff(s.weights) <= 0.0)
    assert np.all(s.weights > 0.0)
    total = math.fsum(s.weights) + s.tail_bound
    assert 1.0 - 1e-12 <= total <= 1.0 + 1e-12


def test_regvar_infeasible_beta():
    with pytest.raises(InfeasibleBeta):
        spectra.regvar_spectrum(10.0, 1.0, 0.5, 100)


def test_loglog_valid_and_infeasible():
    s = spectra.loglog_spectrum(0.05, 1.0, 10 ** 5)
    assert np.all(np.diff(s.weights) <= 0.0)
    with pytest.raises(InfeasibleBeta):
        spectra.loglog_spectrum(100.0, 1.0, 100)


def test_loglog_tail_limit():
    # direct tail summation: T(x) (ln x)^s -> beta/s
    s = spectra.loglog_spectrum(0.05, 1.0, 10 ** 6)
    for x, tol in ((1e8, 0.12), (1e12, 0.08)):
        lo, hi = spectra.tail_mass(s, x)
        val = 0.5 * (lo + hi) * math.log(x)
        assert abs(val - 0.05) < tol * 0.05


def test_normalize_examples():
    s = spectra.normalize([2.0, 1.0, 1.0])
    assert np.allclose(s.weights, [0.5, 0.25, 0.25])
    assert spectra.normalize([5.0]).weights[0] == 1.0
    flat = spectra.normalize([1.0, 1.0, 1.0, 1.0])
    assert spectra.spectrum_stats(flat).deviation == 0.0


def test_normalize_errors():
    with pytest.raises(EmptySpectrum):
        spectra.normalize([])
    with pytest.raises(NegativeEigenvalue):
        spectra.normalize([1.0, -0.5])


def test_spectrum_stats_examples():
    s = spectra.normalize([0.5, 0.5])
    st_ = spectra.spectrum_stats(s)
    assert abs(st_.entropy - math.log(2)) < 1e-14
    assert st_.deviation == 0.0

    two = spectra.two_atom_spectrum(0.7)
    st2 = spectra.spectrum_stats(two)
    e_direct = -(0.7 * math.log(0.7) + 0.3 * math.log(0.3))
    v_direct = (0.7 * (-math.log(0.7) - e_direct) ** 2
                + 0.3 * (-math.log(0.3) - e_direct) ** 2)
    assert abs(st2.entropy - e_direct) < 1e-12
    assert abs(st2.deviation - math.sqrt(v_direct)) < 1e-12

    single = spectra.normalize([1.0])
    st1 = spectra.spectrum_stats(single)
    assert st1.entropy == 0.0 and st1.deviation == 0.0


def test_tail_mass_examples():
    two = spectra.two_atom_spectrum(0.7)
    assert spectra.tail_mass(two, 0.0) == (0.0, 0.0)
    lo, hi = spectra.tail_mass(two, 0.5)
    assert lo == hi == pytest.approx(0.3, abs=1e-15)


def test_tail_mass_regvar_lemma_oracle():
    # independent integral-bracket oracle for T(x) of the p=1 shape:
    # k_x from its own bisection on ln k, then
    # beta/(r ln^r k_x) <= sum_{k>=k_x} <= same + first term
    beta, r = 0.1, 1.0
    s = spectra.regvar_spectrum(beta, 1.0, r, 10 ** 5)

    def oracle(x):
        lo_l, hi_l = 1.0, 800.0
        for _ in range(200):
            mid = 0.5 * (lo_l + hi_l)
            if mid + (1.0 + r) * math.log(mid) - math.log(beta) < x:
                lo_l = mid
            else:
                hi_l = mid
        L = 0.5 * (lo_l + hi_l)
        base = beta / (r * L ** r)
        first = beta * math.exp(-L) / L ** (1.0 + r)
        return base, base + first

    for x in (50.0, 200.0):
        olo, ohi = oracle(x)
        tlo, thi = spectra.tail_mass(s, x)
        assert tlo <= ohi + 1e-12 and olo <= thi + 1e-12  # brackets overlap
        assert abs(0.5 * (tlo + thi) - 0.5 * (olo + ohi)) < 0.02 * olo
    # Lemma limit x T(x) -> beta/r, within 10% far out
    lo, hi = spectra.tail_mass(s, 1000.0)
    assert abs(1000.0 * 0.5 * (lo + hi) - beta / r) < 0.10 * beta / r


def test_truncated_moment_examples():
    half = spectra.normalize([0.5, 0.5])
    assert spectra.truncated_moment(half, 1, 1.0) == pytest.approx(math.log(2),
                                                                   abs=1e-14)
    two = spectra.two_atom_spectrum(0.7)
    expect = 0.7 * math.log(0.7) ** 2
    assert spectra.truncated_moment(two, 2, 0.5) == pytest.approx(expect,
                                                                  abs=1e-14)
    assert spectra.truncated_moment(two, 1, 0.0) == 0.0


def test_truncated_moment_monotone():
    s = spectra.regvar_spectrum(0.1, 2.0, 0.0, 1000)
    xs = np.linspace(0.0, 30.0, 40)
    vals = [spectra.truncated_moment(s, 1, float(x)) for x in xs]
    assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))
    assert (spectra.truncated_moment(s, 1, 10.0, N=5)
            <= spectra.truncated_moment(s, 1, 10.0, N=50) + 1e-15)


def test_u_distribution_examples():
    half = spectra.normalize([0.5, 0.5])
    u = spectra.u_distribution(half)
    assert u.positions.size == 1
    assert u.positions[0] == pytest.approx(math.log(2), abs=1e-15)
    assert u.masses[0] == pytest.approx(1.0, abs=1e-15)

    single = spectra.normalize([1.0])
    u1 = spectra.u_distribution(single)
    assert u1.positions[0] == 0.0 and u1.masses[0] == 1.0

    two = spectra.two_atom_spectrum(0.7)
    u2 = spectra.u_distribution(two)
    assert np.allclose(u2.positions, [-math.log(0.7), -math.log(0.3)])
    assert np.allclose(u2.masses, [0.7, 0.3])


def test_u_distribution_mean_matches_entropy():
    s = spectra.normalize([0.4, 0.3, 0.2, 0.1])
    u = spectra.u_distribution(s)
    assert abs(u.mass - 1.0) < 1e-12
    assert abs(u.mean() - spectra.spectrum_stats(s).entropy) < 1e-10


def test_json_csv_roundtrip():
    s = spectra.euler_spectrum(1, 20)
    s2 = spectra.spectrum_from_json(spectra.spectrum_to_json(s))
    assert np.array_equal(s.weights, s2.weights)
    assert s.tail_bound == s2.tail_bound
    csv_text = spectra.spectrum_to_csv(s)
    assert csv_text.splitlines()[0] == "k,lambda_bar"
    assert len(csv_text.splitlines()) == 21


# --- property tests --------------------------------------------------------

weights_strategy = st.lists(st.floats(min_value=1e-3, max_value=1.0),
                            min_size=1, max_size=12)


@settings(max_examples=150, deadline=None)
@given(weights_strategy, st.floats(min_value=0.0, max_value=0.3))
def test_property_mass_closure(raw, tail):
    s = spectra.normalize(raw, tail)
    assert np.all(s.weights > 0.0)
    assert np.all(np.diff(s.weights) <= 0.0)
    total = math.fsum(s.weights) + s.tail_bound
    assert 1.0 - 1e-12 <= total <= 1.0 + 1e-12


@settings(max_examples=80, deadline=None)
@given(weights_strategy)
def test_property_tail_mass_nonincreasing(raw):
    s = spectra.normalize(raw)
    xs = np.linspace(0.0, 10.0, 25)
    mids = [sum(spectra.tail_mass(s, float(x))) / 2 for x in xs]
    assert all(b <= a + 1e-12 for a, b in zip(mids, mids[1:]))
    assert spectra.tail_mass(s, 0.0)[0] == 0.0


@settings(max_examples=80, deadline=None)
@given(weights_strategy)
def test_property_u_distribution_mass(raw):
    s = spectra.normalize(raw)
    u = spectra.u_distribution(s)
    assert abs(u.mass - (1.0 - s.tail_bound)) < 1e-12
    assert np.all(np.diff(u.positions) > 0.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=1, max_value=20))
def test_property_flat_deviation_zero(l):
    s = spectra.flat_spectrum(l)
    assert spectra.spectrum_stats(s).deviation == 0.0


@settings(max_examples=60, deadline=None)
@given(weights_strategy)
def test_property_deviation_zero_iff_flat(raw):
    s = spectra.normalize(raw)
    stt = spectra.spectrum_stats(s)
    flat = s.weights[0] == s.weights[-1]
    assert (stt.deviation == 0.0) == flat
