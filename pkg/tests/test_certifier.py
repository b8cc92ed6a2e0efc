import json
import math

import numpy as np
import pytest
import scipy.linalg as sla

from annulus_spectra.certifier import (
    AUDIT_IDS,
    COEFFICIENT_BOUNDS,
    QuadraticFormSpec,
    BumpFunction,
    LogRadialField,
    audit_inequality,
    coefficient_bound_audit,
    cs_defect_identity,
    cs_lower_bound,
    derivative_matrices,
    discretize_form,
    form_value,
    frak_energy,
    gn_audit,
    gn_threshold,
    harmonic_extension,
    hessian_identity_residual,
    identity_audit,
    identity_sides,
    kernel_check,
    kernel_residual,
    largest_ratio,
    log_mode_bound,
    operator_matrix,
    quadrature_weights,
    smallest_rayleigh,
)
from annulus_spectra.domain import AnnulusDomain, log_grid, make_annulus, make_weight
from annulus_spectra.operators import OperatorTag, PolyField, RadialTerm


# ---------------------------------------------------------------- forms


def test_mass_form_is_diagonal():
    d = make_annulus(0.5, 1.0)
    g = log_grid(d, 33)
    A = discretize_form(QuadraticFormSpec("u-over-r4"), g, 0).A
    assert np.count_nonzero(A - np.diag(np.diag(A))) == 0
    t = np.asarray(g.t)
    # clamped: boundary values are not unknowns
    q = quadrature_weights(g)
    np.testing.assert_allclose(np.diag(A), (2 * math.pi * q * np.exp(-2 * t))[1:-1], rtol=1e-14)
    assert np.allclose(q[1:-1], g.step)


def test_forms_symmetric():
    d = make_annulus(0.2, 1.0)
    g = log_grid(d, 65)
    w = make_weight("two-sided-power", 1.3, d)
    specs = [QuadraticFormSpec("op-energy", w, "clamped", OperatorTag("Lm", 3)),
             QuadraticFormSpec("frak-energy", w, "natural", m=3),
             QuadraticFormSpec("graded-grad-over-r2", None, "natural", m=4),
             QuadraticFormSpec("op-energy", None, "clamped", OperatorTag("LmStarLm", 3))]
    for spec in specs:
        A = discretize_form(spec, g, 2).A
        assert np.linalg.norm(A - A.T) <= 1e-12 * np.linalg.norm(A)


def test_form_spec_validation():
    with pytest.raises(ValueError):
        QuadraticFormSpec("bogus")
    with pytest.raises(ValueError):
        QuadraticFormSpec("op-energy")
    with pytest.raises(ValueError):
        QuadraticFormSpec("frak-energy")
    with pytest.raises(ValueError):
        QuadraticFormSpec("u-over-r4", boundary="periodic")
    d1, d2 = make_annulus(0.2, 1.0), make_annulus(0.3, 1.0)
    with pytest.raises(ValueError):
        discretize_form(QuadraticFormSpec("u-over-r4", make_weight("unit", 0, d1)), log_grid(d2, 33), 0)


def test_form_value_matches_matrix():
    d = make_annulus(0.2, 1.0)
    g = log_grid(d, 65)
    spec = QuadraticFormSpec("frak-energy", make_weight("outer-power", 0.8, d), "natural", m=3)
    v = np.random.default_rng(0).standard_normal(65)
    A = discretize_form(spec, g, 3).A
    assert form_value(spec, g, 3, v) == pytest.approx(v @ A @ v, rel=1e-10)


def test_clamped_beam_convergence():
    # on t in [0, 1] the mode-free form is int (u'')^2 / int u^2 with e^{-2t} absent; use raw matrices
    d = make_annulus(1.0, math.e)
    exact = 4.730040744862704 ** 4
    errs = []
    for N in (33, 65, 129):
        g = log_grid(d, N)
        Ds = derivative_matrices(g, "clamped")
        q = quadrature_weights(g)
        A = Ds[2].T @ (q[:, None] * Ds[2])
        B = Ds[0].T @ (q[:, None] * Ds[0])
        errs.append(smallest_rayleigh(A, B)[0] - exact)
    orders = [math.log2(abs(errs[i] / errs[i + 1])) for i in range(2)]
    assert min(orders) >= 2


def test_laplace_mode1_convergence():
    d = make_annulus(0.5, 1.0)
    lap = QuadraticFormSpec("op-energy", None, "clamped", OperatorTag("Lm", 1.0))
    mass = QuadraticFormSpec("u-over-r4", None, "clamped")
    vals = []
    for N in (33, 65, 129, 257):
        g = log_grid(d, N)
        vals.append(smallest_rayleigh(discretize_form(lap, g, 1), discretize_form(mass, g, 1))[0])
    diffs = np.abs(np.diff(vals))
    assert all(math.log2(diffs[i] / diffs[i + 1]) >= 2 for i in range(len(diffs) - 1))


def test_adjoint_transpose_interior():
    d = make_annulus(0.3, 1.0)
    g = log_grid(d, 65)
    w = quadrature_weights(g) * np.exp(2 * np.asarray(g.t))
    for n in (0, 1, 3):
        A = w[:, None] * operator_matrix(OperatorTag("Lm", 3), g, n, "natural")
        B = w[:, None] * operator_matrix(OperatorTag("LmStar", 3), g, n, "natural")
        s = slice(6, -6)
        assert np.abs(A[s, s] - B[s, s].T).max() <= 1e-12 * np.abs(A).max()


# ---------------------------------------------------------------- eigen solves


def test_rayleigh_examples():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((6, 6))
    B = X @ X.T + 6 * np.eye(6)
    assert smallest_rayleigh(B, B)[0] == pytest.approx(1.0, rel=1e-12)
    assert smallest_rayleigh(np.diag([1.0, 2.0, 3.0]), np.eye(3))[0] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        smallest_rayleigh(np.eye(3), np.diag([1.0, -1.0, 1.0]))
    with pytest.raises(ValueError):
        smallest_rayleigh(np.eye(3), np.eye(2))


def test_rayleigh_vs_dense_oracle():
    d = make_annulus(0.2, 1.0)
    g = log_grid(d, 129)
    A = discretize_form(QuadraticFormSpec("op-energy", None, "clamped", OperatorTag("Lm", 3)), g, 2)
    B = discretize_form(QuadraticFormSpec("u-over-r4", None, "clamped"), g, 2)
    lam, v = smallest_rayleigh(A, B)
    ref = sla.eigh(A.A, B.A, eigvals_only=True)[0]
    assert lam == pytest.approx(ref, rel=1e-9)
    assert v @ A.A @ v / (v @ B.A @ v) == pytest.approx(lam, rel=1e-8)


def test_swapped_duality():
    d = make_annulus(0.2, 1.0)
    g = log_grid(d, 65)
    w = make_weight("two-sided-power", 1.0, d)
    L = discretize_form(QuadraticFormSpec("u-over-r4", w, "clamped"), g, 1)
    R = discretize_form(QuadraticFormSpec("op-energy", None, "clamped", OperatorTag("Lm", 3)), g, 1)
    top, _ = largest_ratio(L, R)
    low, _ = smallest_rayleigh(R, L)
    assert top == pytest.approx(1 / low, rel=1e-8)


def test_clamped_positivity():
    d = make_annulus(0.1, 1.0)
    g = log_grid(d, 65)
    w = make_weight("two-sided-power", 0.7, d)
    for m in (1.5, 3.0):
        R = discretize_form(QuadraticFormSpec("op-energy", None, "clamped", OperatorTag("Lm", m)), g, 0)
        L = discretize_form(QuadraticFormSpec("u-over-r4", w, "clamped"), g, 0)
        assert smallest_rayleigh(R, L)[0] > 0


# ---------------------------------------------------------------- audits


def test_simple_lm_4_example():
    r = audit_inequality("simple_lm_4", 3, AnnulusDomain.from_modulus(4.0), alpha=2.0)
    assert r.paper_constant == pytest.approx(1 / 32)
    assert r.computed_ratio <= r.paper_constant and r.margin >= 1
    assert r.status == "certified"
    assert len(r.grid_trend) == 3
    json.dumps(r.to_json())


def test_ineq_frak_u_example():
    r = audit_inequality("ineq_frak_m-u", 4, AnnulusDomain.from_modulus(4.0), beta=0.25, grid_sizes=(129, 257))
    assert r.paper_constant == pytest.approx(16 / 3)
    assert r.computed_ratio <= 16 / 3
    assert r.status == "certified"


def test_out_of_range_is_flagged():
    r = audit_inequality("ineq_frak_m-grad", 3, AnnulusDomain.from_modulus(2.0), gamma=1.2, grid_sizes=(129, 257))
    assert r.status == "inconclusive"
    assert any(f.startswith("parameter-out-of-range") for f in r.flags)
    assert r.computed_ratio > 0


def test_simple_lm_7_above_one():
    # the stated constant is audited for 1 < alpha < 2 and fails there
    r = audit_inequality("simple_lm_7", 3, AnnulusDomain.from_modulus(4.0), alpha=1.5, grid_sizes=(129, 257))
    assert r.status == "violated"
    assert r.details["notes"]
    ok = audit_inequality("simple_lm_7", 3, AnnulusDomain.from_modulus(4.0), alpha=1.0, grid_sizes=(129, 257))
    assert ok.status == "certified"


def test_poincare_reports_both_normalizations():
    r = audit_inequality("poincare_weight_m-u", 3, AnnulusDomain.from_modulus(3.0), alpha=1.5, grid_sizes=(129, 257))
    assert "weight-exponent-2alpha" in r.margins
    assert r.details["ratio_weight_exponent_2alpha"] > 0


def test_unknown_audit_id():
    with pytest.raises(KeyError):
        audit_inequality("simple_lm_99", 3, make_annulus(0.1, 1.0), alpha=1.0)
    assert "ineq_frak_m-u" in AUDIT_IDS


# ---------------------------------------------------------------- identities


def test_bump_support_inside():
    d = make_annulus(0.1, 2.0)
    fn = BumpFunction.random(d, np.random.default_rng(5))
    t = np.array([d.log_a, d.log_b])
    u = fn.evaluate(t, np.linspace(0, 2 * np.pi, 7))
    assert all(np.all(part == 0) for part in u)


def test_identity_audits():
    for id in ("ipp_m", "gen_final1"):
        r = identity_audit(id, 3, n_functions=4, alpha=0.7)
        assert r.status == "certified", r.details
        assert r.computed_ratio < 1e-6


def test_identity_is_not_trivial():
    # a wrong m breaks the ipp identity for the same test function
    d = make_annulus(0.1, 2.0)
    fn = BumpFunction.random(d, np.random.default_rng(2))
    lhs, rhs = identity_sides("ipp_m", 3, fn, d)
    assert abs(lhs - rhs) < 1e-6 * abs(lhs)
    assert lhs > 0 and rhs > 0


# ---------------------------------------------------------------- Cauchy-Schwarz


def test_cs_examples():
    f = np.array([1.0, 2.0 - 1j, 0.5j])
    lhs, rhs = cs_defect_identity(f, (2 - 3j) * f)
    assert abs(lhs) < 1e-12 and abs(rhs) < 1e-12
    e1, e2 = np.array([1.0, 0, 0]), np.array([0, 1.0, 0])
    assert cs_defect_identity(e1, e2) == pytest.approx((1.0, 1.0))
    assert cs_lower_bound(e1, e2, 1.0, 1.0) == pytest.approx(1.0)
    assert cs_lower_bound(f, 1j * f[::-1], 2.0, 0.0) == pytest.approx(float(np.sum(np.abs(2 * f) ** 2)))
    with pytest.raises(ValueError):
        cs_defect_identity(f, f[:2])
    with pytest.raises(ValueError):
        cs_defect_identity(f, f, weights=[1.0, 0.0, 1.0])


def test_cs_random_trials():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        f1 = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        f2 = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        w = rng.uniform(0.1, 2.0, 8)
        lhs, rhs = cs_defect_identity(f1, f2, w)
        assert abs(lhs - rhs) <= 1e-12 * lhs


def test_log_mode_bound():
    rep = log_mode_bound(0.5, 1.0, 0.01, math.exp(-1))
    assert rep["defect"] > 0
    assert set(rep["margins"]) == {"statement", "proof"}
    assert rep["holds"]["statement"] and rep["holds"]["proof"]
    tiny = log_mode_bound(0.5, 1e-9, 0.01, 0.2)
    assert tiny["lhs"] < 1e-8
    with pytest.raises(ValueError):
        log_mode_bound(0.5, 1.0, 0.01, 0.5)


# ---------------------------------------------------------------- kernels


def test_kernel_residual_examples():
    r = kernel_residual(OperatorTag("Lm", 3), 2, RadialTerm(0.0, n=2))
    assert r.decays
    r = kernel_residual(OperatorTag("LmStarLm", 3), 0, RadialTerm(-2.0, 1))
    assert r.decays
    bad = kernel_residual(OperatorTag("Lm", 3), 2, RadialTerm(1.0, n=2))
    assert not bad.decays


def test_kernel_check_dm_conventions():
    rep = kernel_check("Dm", 4, 3)
    assert set(rep["conventions"]) == {"log r", "r"}
    assert rep["decaying"] == ["log r"]


def test_kernel_check_lmstar_printed():
    rep = kernel_check("LmStar", 3, 2)
    assert "derived" in rep["decaying"]


# ---------------------------------------------------------------- coefficient bounds


def test_coefficient_bounds_quick():
    for bound in COEFFICIENT_BOUNDS:
        r = coefficient_bound_audit(5, bound, trials=50)
        assert r.status == "certified", (bound, r.computed_ratio)
        assert r.details["violations"] == 0


def test_coefficient_bound_threshold_unmet():
    r = coefficient_bound_audit(5, "bound_lm2", domain=AnnulusDomain.from_modulus(2.0), trials=10)
    assert r.status == "inconclusive" and "threshold-unmet" in r.flags


# ---------------------------------------------------------------- extension and GN


def test_harmonic_extension_reproduces_kernel():
    m = 4
    d = make_annulus(0.3, 1.0)
    w = make_weight("two-sided-power", 0.5, d)
    p = 2 - m
    data = [d.a ** p, p * d.a ** p, d.b ** p, p * d.b ** p]
    errs, energies = [], []
    for N in (65, 129):
        g = log_grid(d, N)
        he = harmonic_extension(m, w, data, g, 1)
        errs.append(np.abs(he.values - np.exp(p * np.asarray(g.t))).max())
        energies.append(he.energy)
    assert errs[1] < errs[0] < 1e-5
    assert energies[1] < energies[0] < 1e-9


def test_harmonic_extension_zero_and_minimal():
    m = 3
    d = make_annulus(0.2, 1.0)
    g = log_grid(d, 65)
    w = make_weight("outer-power", 1.0, d)
    assert np.abs(harmonic_extension(m, w, [0, 0, 0, 0], g, 2).values).max() == 0
    data = [1.0, -0.5, 0.3, 2.0]
    he = harmonic_extension(m, w, data, g, 2)
    D0, D1 = derivative_matrices(g, "natural", 1)
    C = np.vstack([D0[0], D1[0], D0[-1], D1[-1]])
    np.testing.assert_allclose(C @ he.values, data, atol=1e-9)
    Z = sla.null_space(C)
    rng = np.random.default_rng(11)
    for _ in range(100):
        v = he.values + Z @ (0.1 * rng.standard_normal(Z.shape[1]))
        assert frak_energy(m, w, g, 2, v) >= he.energy
    with pytest.raises(ValueError):
        harmonic_extension(m, w, [1.0, math.nan, 0, 0], g, 2)


def test_frak_kernel_element_energy():
    m = 3
    d = make_annulus(0.2, 1.0)
    g = log_grid(d, 129)
    Y = np.exp((2 - m) * np.asarray(g.t))
    w = make_weight("two-sided-power", 1.6, d)
    zero = form_value(QuadraticFormSpec("frak-energy", w, "natural", m=m), g, 1, Y)
    grad = form_value(QuadraticFormSpec("graded-grad-over-r2", w, "natural", m=m), g, 1, Y)
    assert zero < 1e-10 * grad and math.isfinite(grad) and grad > 0


def test_gn_audit_bounded():
    assert gn_threshold(3) > 100
    r = gn_audit(3, 0.45, 0.8, variants=("kernel-free", "kernel-matched"))
    assert r.status == "certified"
    assert all(s < 2 for s in r.details["spread"].values())
    edge = gn_audit(3, 0.4, 0.8, variants=("kernel-free",))
    assert edge.status == "certified"
    with pytest.raises(ValueError):
        gn_audit(3, 0.3, 0.8)


# ---------------------------------------------------------------- Hessian


class _Field:
    def __init__(self, f):
        self.f = f

    def dxy(self, i, j, x, y):
        return self.f[(i, j)](x, y)


def test_hessian_examples():
    rng = np.random.default_rng(4)
    u = PolyField.random(3, rng)
    flat = _Field({k: (lambda x, y: 0.0) for k in [(0, 0), (1, 0), (0, 1)]})
    assert hessian_identity_residual(u, flat, (0.3, 0.4)) < 1e-12
    # u = x^2 y, lam = log(1 + x^2 + y^2) / 2
    c = np.zeros((3, 2))
    c[2, 1] = 1.0
    u = PolyField(c)
    lam = _Field({
        (0, 0): lambda x, y: 0.5 * math.log(1 + x * x + y * y),
        (1, 0): lambda x, y: x / (1 + x * x + y * y),
        (0, 1): lambda x, y: y / (1 + x * x + y * y),
    })
    assert hessian_identity_residual(u, lam, (0.7, -0.3)) < 1e-8
    c = np.zeros((4, 4))
    c[2, 0] = c[0, 2] = 1.0  # radial power r^2
    assert hessian_identity_residual(PolyField(c), LogRadialField(3, None), (0.4, 0.9)) < 1e-8
