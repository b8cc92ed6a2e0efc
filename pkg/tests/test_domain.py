import math

import numpy as np
import pytest

from annulus_spectra.domain import AnnulusDomain, log_grid, make_annulus, make_weight, WEIGHT_KINDS


def test_modulus_values():
    assert make_annulus(0.1, 1.0).modulus == pytest.approx(math.log(10), abs=1e-12)
    d = make_annulus(math.exp(-1) * math.exp(-4), math.exp(-1))
    assert d.modulus == pytest.approx(4.0, abs=1e-12)


@pytest.mark.parametrize("a,b", [(1.0, 0.5), (0.0, 1.0), (-1.0, 1.0), (1.0, 1.0)])
def test_bad_annulus(a, b):
    with pytest.raises(ValueError):
        make_annulus(a, b)


def test_from_modulus():
    d = AnnulusDomain.from_modulus(300.0)
    assert d.b == 1.0
    assert d.modulus == pytest.approx(300.0)


def test_log_grid_nodes_and_step():
    g = log_grid(make_annulus(0.1, 1.0), 17)
    assert g.step == pytest.approx(math.log(10) / 16)
    r = g.nodes
    assert r[0] == 0.1 and r[-1] == 1.0
    assert np.all(np.diff(r) > 0)
    g = log_grid(make_annulus(1.0, math.exp(2)), 17)
    assert g.nodes[8] == pytest.approx(math.e)


def test_log_grid_refinement_nested():
    d = make_annulus(0.03, 2.0)
    coarse, fine = log_grid(d, 33), log_grid(d, 65)
    assert fine.step == pytest.approx(coarse.step / 2)
    np.testing.assert_allclose(fine.t[::2], coarse.t, rtol=0, atol=1e-15)


def test_log_grid_too_small():
    with pytest.raises(ValueError):
        log_grid(make_annulus(0.1, 1.0), 8)


def test_weights():
    d = make_annulus(0.2, 1.5)
    w = make_weight("two-sided-power", 2.0, d)
    assert w(d.b) == pytest.approx(1 + (d.a / d.b) ** 2)
    s = 1.3
    w = make_weight("two-sided-power", s, d)
    assert w(math.sqrt(d.a * d.b)) == pytest.approx(2 * (d.a / d.b) ** (s / 2))
    assert make_weight("unit", 4.0, d)(0.7) == 1.0
    with pytest.raises(ValueError):
        w(2.0)
    with pytest.raises(ValueError):
        make_weight("gaussian", 1.0, d)


def test_power_terms_match_evaluation():
    d = make_annulus(0.05, 3.0)
    r = np.linspace(d.a, d.b, 11)
    for kind in WEIGHT_KINDS:
        w = make_weight(kind, 0.8, d)
        direct = w(r)
        terms = sum(math.exp(lc) * r ** p for lc, p in w.power_terms())
        np.testing.assert_allclose(direct, terms, rtol=1e-13)
