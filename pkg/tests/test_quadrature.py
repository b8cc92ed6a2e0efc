import math

import numpy as np
import pytest
from scipy import integrate

from annulus_spectra.domain import make_annulus, make_weight
from annulus_spectra.operators import RadialExpansion, RadialTerm, m_biharmonic_expansion
from annulus_spectra.quadrature import (
    adaptive_quad,
    direct_L2_norm,
    elementary_gap,
    expansion_L2_norm,
    gram_defect_integral,
    lambda_positivity,
    moment_integral,
    trig_envelope,
    trig_power_quad,
)


def test_moment_basic():
    assert moment_integral(0, 0, 0.3, 1.7).value == pytest.approx(1.4, abs=1e-14)
    a, b = 0.2, 3.0
    assert moment_integral(-1, 1, a, b).value == pytest.approx(0.5 * (math.log(b) ** 2 - math.log(a) ** 2), rel=1e-13)
    assert moment_integral(-1, 1, a, b).error == 0.0
    with pytest.raises(ValueError):
        moment_integral(1, 0, 1.0, 0.5)


def test_moment_vs_adaptive():
    g, a, b = 0.7, 0.1, 0.5
    ref = adaptive_quad(lambda r: r ** (2 * g - 1) * np.log(r) ** 2, a, b, tol=1e-13)
    assert ref.converged
    assert moment_integral(2 * g - 1, 2, a, b).value == pytest.approx(ref.value, rel=1e-10)


def test_moment_additive_and_large_exponent():
    for alpha, k in [(-3.2, 2), (5.0, 1), (-1.0, 0)]:
        whole = moment_integral(alpha, k, 0.05, 2.0).value
        parts = moment_integral(alpha, k, 0.05, 0.4).value + moment_integral(alpha, k, 0.4, 2.0).value
        assert whole == pytest.approx(parts, rel=1e-12)
    # r^-40 near a = 0.1 stays finite thanks to the log substitution
    v = moment_integral(-40, 0, 0.1, 0.2).value
    assert v == pytest.approx((0.1 ** -39 - 0.2 ** -39) / 39, rel=1e-12)


def test_adaptive_examples():
    r = adaptive_quad(lambda x: x, 0.0, 1.0, tol=1e-12)
    assert r.value == pytest.approx(0.5, abs=1e-12) and r.converged
    bad = adaptive_quad(lambda x: np.where(x < 0.3, 0.0, 1.0), 0.0, 1.0, tol=1e-14, depth=20)
    assert not bad.converged
    with pytest.raises(ValueError):
        adaptive_quad(lambda x: x, 0.0, 1.0, tol=0.0)
    with pytest.raises(ValueError):
        adaptive_quad(lambda x: x, 1.0, 0.0)


def test_cos2_identity_split():
    alpha, beta, a, b = 3.5, 6.0, 0.2, 1.3
    lhs = trig_power_quad(alpha, beta, "cos2", "r", a, b).value
    half = adaptive_quad(lambda r: r ** alpha * np.cos(2 * beta * r), a, b, tol=1e-13).value
    assert lhs == pytest.approx(0.5 * moment_integral(alpha, 0, a, b).value + 0.5 * half, rel=1e-10)


def test_trig_power_examples():
    assert trig_power_quad(1.3, 0.0, "cos2", "r", 0.1, 1.0).value == moment_integral(1.3, 0, 0.1, 1.0).value
    assert trig_power_quad(1.3, 0.0, "sin2", "r", 0.1, 1.0).value == 0.0
    alpha, beta, a, b = 2.2, 4.0, 0.01, 0.1
    got = trig_power_quad(alpha, beta, "sin2", "r", a, b).value
    ref, _ = integrate.quad(lambda r: r ** alpha * math.sin(beta * r) ** 2, a, b, epsabs=0, epsrel=1e-13)
    assert got == pytest.approx(ref, rel=1e-9)
    # log-argument variant against the substituted integral
    got = trig_power_quad(0.5, 3.0, "cossin", "log r", 0.05, 2.0).value
    ref, _ = integrate.quad(lambda t: math.exp(1.5 * t) * math.cos(3 * t) * math.sin(3 * t),
                            math.log(0.05), math.log(2.0), epsabs=0, epsrel=1e-13, limit=200)
    assert got == pytest.approx(ref, rel=1e-9)
    with pytest.raises(ValueError):
        trig_power_quad(1, 1, "tan2", "r", 0.1, 1)


def test_sin2_envelope():
    for alpha, beta, a, b in [(0.5, 2.0, 0.01, 0.4), (1.5, 0.8, 0.1, 0.9)]:
        v = trig_power_quad(2 * alpha + 1, beta, "sin2", "r", a, b).value
        M = moment_integral(2 * alpha + 3, 0, a, b).value
        assert 0.25 * beta ** 2 * M <= v <= beta ** 2 * M
        lo, hi = trig_envelope(2 * alpha + 1, beta, "sin2", a, b)
        assert lo <= v <= hi
    assert trig_envelope(1.0, 10.0, "sin2", 0.1, 1.0) is None


def _defect_oracle(g, a, b):
    val, _ = integrate.dblquad(lambda s, r: r ** (2 * g - 1) * s ** (2 * g - 1) * math.log(r / s) ** 2,
                               a, b, a, b, epsabs=0, epsrel=1e-12)
    return val


def test_gram_defect_vs_dblquad():
    g, a, b = 0.7, 0.1, 0.5
    assert gram_defect_integral(g, a, b).value == pytest.approx(_defect_oracle(g, a, b), rel=1e-8)


def test_gram_defect_limits():
    a, b = 0.02, 0.3
    L = math.log(b / a)
    dev = [gram_defect_integral(g, a, b).value / (L ** 4 / 6) - 1 for g in (1e-5, 1e-6, 1e-8)]
    # the approach to log^4(b/a)/6 is linear in gamma
    assert dev[0] / dev[1] == pytest.approx(10, rel=1e-3)
    assert abs(dev[2]) < 1e-6
    # both branches agree across the switch point (jump equals the slope times the step)
    lo, hi = gram_defect_integral(0.999e-3, a, b).value, gram_defect_integral(1.001e-3, a, b).value
    slope = (hi - gram_defect_integral(1.003e-3, a, b).value) / 2e-6
    assert lo - hi == pytest.approx(slope * 2e-6, rel=1e-2)
    assert gram_defect_integral(0.5, 0.3, 0.3 * (1 + 1e-3)).value < 1e-10
    with pytest.raises(ValueError):
        gram_defect_integral(0.5, 0.3, 0.3)


def test_elementary_and_lambda():
    assert elementary_gap(1.0, 0.5) > 0
    assert lambda_positivity(0.0, 2.0) > 0
    # at t -> 0 the expression vanishes to high order
    assert abs(lambda_positivity(0.3, 1e-4)) < 1e-6


def test_radial_lm_example():
    m, b0 = 3.0, 0.7
    d = make_annulus(0.3, 1.2)
    e = RadialExpansion([RadialTerm(m + 1, coeff=b0)])
    got = expansion_L2_norm(e, "Lm", None, d, m)
    # Lm r^{m+1} = (m+1+m-1)^2 - 0 ... = 4 m^2 r^{m-1}
    ref = adaptive_quad(lambda r: (4 * m * m * b0 * r ** (m - 1)) ** 2 * 2 * math.pi * r, d.a, d.b, tol=1e-12).value
    assert got == pytest.approx(ref, rel=1e-10)


def test_kernel_annihilation():
    m = 3.0
    d = make_annulus(0.2, 1.5)
    e = m_biharmonic_expansion(m, alpha1=0.4, a={2: 0.3 + 0.1j, -1: 0.2})
    assert expansion_L2_norm(e, "Lm", None, d, m) < 1e-20 * expansion_L2_norm(e, "identity", None, d, m) + 1e-20


def test_parseval_three_modes():
    m = 3.0
    d = make_annulus(0.2, 1.5)
    e = m_biharmonic_expansion(m, alpha1=0.4, a={2: 0.3 + 0.1j}, b={0: 0.5, 1: -0.2j, -3: 0.1})
    got = expansion_L2_norm(e, "identity", None, d, m)
    ref = direct_L2_norm(e, "identity", None, d, m, n_radial=24, n_theta=16)
    assert got == pytest.approx(ref, rel=1e-10)
    w = make_weight("two-sided-power", 1.5, d)
    got = expansion_L2_norm(e, "graded-gradient", w, d, m)
    ref = direct_L2_norm(e, "graded-gradient", w, d, m, n_radial=24, n_theta=16)
    assert got == pytest.approx(ref, rel=1e-9)
    # callable weight path agrees with the closed-form power weight path
    assert expansion_L2_norm(e, "identity", lambda r: w(r), d, m) == pytest.approx(
        expansion_L2_norm(e, "identity", w, d, m), rel=1e-10)


def test_unknown_image():
    with pytest.raises(ValueError):
        expansion_L2_norm(m_biharmonic_expansion(3, alpha1=1.0), "Hessian", None, make_annulus(0.1, 1.0), 3)
