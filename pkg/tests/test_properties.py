"""Property tests over randomly drawn parameters."""

import json
import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from annulus_spectra.cli import to_json
from annulus_spectra.certifier import cs_defect_identity, cs_lower_bound, largest_ratio, smallest_rayleigh
from annulus_spectra.domain import WEIGHT_KINDS, log_grid, make_annulus, make_weight
from annulus_spectra.operators import MonomialField, OperatorTag, apply_operator, reduce_mode
from annulus_spectra.quadrature import elementary_gap, gram_defect_integral, lambda_positivity, moment_integral

radius = st.floats(0.01, 5.0)
modulus = st.floats(0.05, 8.0)
FAMILIES = ("Lm", "LmStar", "LmStarLm", "FrakLm", "Lm1", "Dscr2", "Dm")


@given(a=radius, L=modulus, kind=st.sampled_from(WEIGHT_KINDS), s=st.floats(-4, 4), n=st.integers(16, 80))
def test_weights_positive_on_grid(a, L, kind, s, n):
    d = make_annulus(a, a * math.exp(L))
    w = make_weight(kind, s, d)(log_grid(d, n).nodes)
    assert np.all(np.isfinite(w)) and np.all(w > 0)


@given(a=radius, L=modulus, s=st.floats(-4, 4), u=st.floats(0, 1))
def test_two_sided_weight_symmetry(a, L, s, u):
    d = make_annulus(a, a * math.exp(L))
    w = make_weight("two-sided-power", s, d)
    r = d.a * math.exp(u * L)
    r2 = min(max(d.a * d.b / r, d.a), d.b)
    assert math.isclose(float(w(r)), float(w(r2)), rel_tol=1e-12)


@given(a=radius, L=modulus, n=st.integers(16, 300))
def test_grid_doubling_nested(a, L, n):
    d = make_annulus(a, a * math.exp(L))
    coarse, fine = log_grid(d, n), log_grid(d, 2 * n - 1)
    assert np.array_equal(coarse.t, fine.t[::2])


@settings(max_examples=60)
@given(fam=st.sampled_from(FAMILIES), m=st.floats(1.5, 5), n=st.integers(-3, 3), lam=st.floats(-2, 3),
       x=st.floats(0.2, 2), y=st.floats(-2, 2))
def test_monomial_exactness(fam, m, n, lam, x, y):
    tag = OperatorTag(fam, m)
    mo = reduce_mode(tag, n)
    val = apply_operator(tag, MonomialField(lam, n), (x, y))
    r, th = math.hypot(x, y), math.atan2(y, x)
    ref = mo.on_monomial(lam) * r ** (lam - mo.degree) * np.exp(1j * (n - mo.shift) * th)
    scale = max(1.0, abs(ref), r ** (lam - mo.degree) * (abs(lam) + abs(n) + m + 2) ** mo.order)
    assert abs(val - ref) <= 1e-11 * scale


@given(g=st.floats(0.05, 10), x=st.floats(1e-6, 0.99))
def test_elementary_gap_positive(g, x):
    assert elementary_gap(g, x) > 0


@settings(max_examples=30, deadline=None)
@given(g=st.floats(1e-3, 5), a=st.floats(0.01, 2), L=st.floats(1e-2, 6))
def test_gram_defect_positive(g, a, L):
    assert gram_defect_integral(g, a, a * math.exp(L)).value > 0


@given(alpha=st.floats(-0.99, 10), t=st.floats(0.05, 30))
def test_lambda_positive(alpha, t):
    assert lambda_positivity(alpha, t) > 0


@given(p=st.floats(-12, 12), k=st.integers(0, 4), a=st.floats(0.01, 1), L1=st.floats(0.01, 3), L2=st.floats(0.01, 3))
def test_moment_additive(p, k, a, L1, L2):
    c, b = a * math.exp(L1), a * math.exp(L1 + L2)
    whole = moment_integral(p, k, a, b).value
    parts = moment_integral(p, k, a, c).value + moment_integral(p, k, c, b).value
    scale = moment_integral(p, k, a, c).value ** 2 + moment_integral(p, k, c, b).value ** 2
    assert abs(whole - parts) <= 1e-12 * math.sqrt(scale) + 1e-300


@settings(max_examples=40)
@given(n=st.integers(1, 2000), seed=st.integers(0, 2 ** 32 - 1))
def test_cs_defect_exact(n, seed):
    rng = np.random.default_rng(seed)
    f1 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    f2 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    w = rng.uniform(0.1, 2, n)
    lhs, rhs = cs_defect_identity(f1, f2, w)
    scale = np.sum(w * abs(f1) ** 2) * np.sum(w * abs(f2) ** 2)
    assert abs(lhs - rhs) <= 1e-12 * scale
    l1, l2 = rng.standard_normal(2)
    assert cs_lower_bound(f1, f2, l1, l2, w) >= -1e-12 * scale


@settings(max_examples=25)
@given(n=st.integers(2, 30), seed=st.integers(0, 2 ** 32 - 1))
def test_swapped_duality(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    B = rng.standard_normal((n, n))
    A = A @ A.T + 0.1 * np.eye(n)
    B = B @ B.T + 0.1 * np.eye(n)
    lam_max = largest_ratio(A, B)[0]
    lam_min = smallest_rayleigh(B, A)[0]
    assert math.isclose(lam_max, 1 / lam_min, rel_tol=1e-8)


@given(st.dictionaries(st.text(min_size=1, max_size=5), st.floats(allow_nan=False, allow_infinity=False), max_size=6))
def test_json_is_canonical(row):
    text = to_json([row])
    assert text == to_json([dict(reversed(list(row.items())))])
    assert json.loads(text) == [row]
