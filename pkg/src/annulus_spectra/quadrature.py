"""Weighted moment integrals, adaptive Gauss quadrature and L2 norms of radial expansions.

Radial functions are handled as finite sums of atoms ``c r^p (log r)^k e^{i w r}``
with complex ``p``. Products of atoms with equal ``w`` integrate in closed form
after the substitution ``t = log r``; anything else goes to adaptive quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import factorial

import numpy as np

from .domain import AnnulusDomain, WeightSpec
from .operators import OperatorTag, RadialExpansion, reduce_mode

GAUSS_ORDER = 15
MAX_DEPTH = 40
_GX, _GW = np.polynomial.legendre.leggauss(GAUSS_ORDER)


@dataclass(frozen=True)
class MomentResult:
    value: float | complex
    method: str  # "closed-form" or "adaptive"
    error: float
    converged: bool = True

    def __float__(self):
        return float(np.real(self.value))


# --------------------------------------------------------------------------
# closed-form moments


def exp_moment(lam: complex, K: int, ta: float, tb: float, shift: float = 0.0) -> complex:
    """e^{-shift} * integral_{ta}^{tb} e^{lam t} t^K dt."""
    T = max(abs(ta), abs(tb))
    if abs(lam) * T <= 2.0:
        # power series in lam; no cancellation for small |lam|
        total = 0j
        term = 1.0 + 0j
        for j in range(80):
            p = K + j + 1
            total += term * (tb ** p - ta ** p) / p
            term = term * lam / (j + 1)
            if abs(term) * T ** (K + j + 2) < 1e-18 * max(abs(total), 1e-300):
                break
        return total * math.exp(-shift)

    def F(t):
        s = 0j
        for j in range(K + 1):
            s += (-1) ** j * (factorial(K) // factorial(K - j)) * t ** (K - j) / lam ** (j + 1)
        return np.exp(lam * t - shift) * s

    return F(tb) - F(ta)


def moment_integral(alpha: float, k: int, a: float, b: float) -> MomentResult:
    """integral_a^b r^alpha log^k(r) dr."""
    if not 0 < a < b:
        raise ValueError("need 0 < a < b")
    v = exp_moment(complex(alpha + 1.0), int(k), math.log(a), math.log(b))
    return MomentResult(float(v.real), "closed-form", 0.0)


# --------------------------------------------------------------------------
# adaptive quadrature


def _gauss(f, lo, hi):
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    return half * np.dot(_GW, f(mid + half * _GX))


def adaptive_quad(f, a: float, b: float, tol: float = 1e-10, depth: int = MAX_DEPTH,
                  breakpoints=None, max_panel=None) -> MomentResult:
    """Adaptive bisection with a 15-point Gauss rule per panel.

    ``f`` takes numpy arrays. ``max_panel`` caps the initial panel length and
    ``breakpoints`` seed the initial partition.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not a < b:
        raise ValueError("need a < b")
    pts = sorted({a, b, *[p for p in (breakpoints or []) if a < p < b]})
    if max_panel:
        fine = []
        for lo, hi in zip(pts[:-1], pts[1:]):
            n = max(1, int(math.ceil((hi - lo) / max_panel)))
            fine.extend(lo + (hi - lo) * np.arange(n) / n)
        pts = fine + [b]
    total, err, ok = 0.0, 0.0, True
    share = tol / (len(pts) - 1)
    stack = [(lo, hi, _gauss(f, lo, hi), 0, share) for lo, hi in zip(pts[:-1], pts[1:])]
    while stack:
        lo, hi, whole, d, loc_tol = stack.pop()
        mid = 0.5 * (lo + hi)
        left, right = _gauss(f, lo, mid), _gauss(f, mid, hi)
        est = abs(left + right - whole)
        if not np.isfinite(est):
            raise ValueError("integrand not finite on the interval")
        if est <= max(loc_tol, 64 * np.finfo(float).eps * abs(left + right)):
            total += left + right
            err += est
        elif d >= depth:
            total += left + right
            err += est
            ok = False
        else:
            stack.append((lo, mid, left, d + 1, loc_tol / 2))
            stack.append((mid, hi, right, d + 1, loc_tol / 2))
    return MomentResult(total, "adaptive", float(err), ok)


def _log_graded_points(a, b, n=12):
    # geometric initial partition resolves the r^alpha behaviour near a
    return list(np.geomspace(a, b, n + 1))


_TRIG_PAIRS = {
    "cos2": lambda x: np.cos(x) ** 2,
    "sin2": lambda x: np.sin(x) ** 2,
    "cossin": lambda x: np.cos(x) * np.sin(x),
}


def trig_power_quad(alpha: float, beta: float, phase: str, argument: str, a: float, b: float,
                    tol: float = 1e-12) -> MomentResult:
    """integral_a^b r^alpha * pair(beta * arg) dr, pair in {cos2, sin2, cossin}."""
    if phase not in _TRIG_PAIRS:
        raise ValueError(f"phase must be one of {sorted(_TRIG_PAIRS)}")
    if argument not in ("r", "log r"):
        raise ValueError("argument must be 'r' or 'log r'")
    if not 0 < a < b:
        raise ValueError("need 0 < a < b")
    if beta == 0:
        if phase == "cos2":
            return moment_integral(alpha, 0, a, b)
        return MomentResult(0.0, "closed-form", 0.0)
    pair = _TRIG_PAIRS[phase]
    if argument == "r":
        def f(r):
            return r ** alpha * pair(beta * r)
        pts = _log_graded_points(a, b)
        panel = (math.pi / 2) / abs(beta)
        return adaptive_quad(f, a, b, tol, breakpoints=pts, max_panel=panel)

    # log argument: integrate in t = log r
    def g(t):
        return np.exp((alpha + 1) * t) * pair(beta * t)
    ta, tb = math.log(a), math.log(b)
    return adaptive_quad(g, ta, tb, tol, max_panel=(math.pi / 2) / abs(beta))


def trig_envelope(alpha: float, beta: float, phase: str, a: float, b: float):
    """Lower/upper bounds of the r-argument trig integral from small-angle envelopes.

    Valid while 2 * beta * b <= 1.8, where x/2 <= sin x <= x on [0, 2 beta b].
    """
    if 2 * abs(beta) * b > 1.8:
        return None
    M = lambda s: moment_integral(s, 0, a, b).value  # noqa: E731
    b2 = beta * beta
    if phase == "sin2":
        return 0.25 * b2 * M(alpha + 2), b2 * M(alpha + 2)
    if phase == "cos2":
        return M(alpha) - b2 * M(alpha + 2), M(alpha)
    return 0.5 * abs(beta) * M(alpha + 1), abs(beta) * M(alpha + 1)


# --------------------------------------------------------------------------
# Gram defect


_DEFECT_SERIES = (1.0, -1.0, 8 / 15, -1 / 5, 33 / 560, -73 / 5040, 233 / 75600, -11 / 18900)


def gram_defect_integral(gamma: float, a: float, b: float) -> MomentResult:
    """Double integral of r^{2g-1} s^{2g-1} log^2(r/s) over [a, b]^2.

    Equals twice ||f1||^2 ||f2||^2 - <f1, f2>^2 for f1 = r^{g-1/2} log r and
    f2 = r^{g-1/2} on (a, b).
    """
    if not 0 < a < b:
        raise ValueError("need 0 < a < b")
    L = math.log(b / a)
    if abs(gamma) < 1e-3:
        u = 2 * gamma * L
        s = sum(c * u ** i for i, c in enumerate(_DEFECT_SERIES))
        val = b ** (4 * gamma) * L ** 4 / 6 * s
    else:
        y = 2 * gamma
        # x^{2g} = e^{-yL}; expm1 keeps 1 - x^{2g} accurate for small yL
        one_minus = -math.expm1(-y * L)
        val = b ** (4 * gamma) / (8 * gamma ** 4) * (one_minus ** 2 - y * y * math.exp(-y * L) * L * L)
    if not val > 0:
        raise ArithmeticError(f"Gram defect not positive: gamma={gamma}, a={a}, b={b}, value={val}")
    return MomentResult(val, "closed-form", 0.0)


def elementary_gap(gamma: float, x: float) -> float:
    """1 - x^{2g} - 2 g x^g log(1/x); positive for g > 0 and 0 < x < 1."""
    return -math.expm1(2 * gamma * math.log(x)) - 2 * gamma * x ** gamma * math.log(1 / x)


def lambda_positivity(alpha: float, t: float) -> float:
    s = 2 * alpha + 3
    return (1 - s * s * (math.exp(-2 * (alpha + 1) * t) + math.exp(-2 * (alpha + 2) * t))
            + 8 * (alpha + 1) * (alpha + 2) * math.exp(-s * t) + math.exp(-2 * s * t))


# --------------------------------------------------------------------------
# atoms


def atoms_D(atoms):
    """Apply D = r d/dr to a list of atoms (c, p, k, w)."""
    out = []
    for c, p, k, w in atoms:
        out.append((c * p, p, k, w))
        if k:
            out.append((c * k, p, k - 1, w))
        if w:
            out.append((c * 1j * w, p + 1, k, w))
    return _merge(out)


def _merge(atoms, tol=0.0):
    acc: dict = {}
    for c, p, k, w in atoms:
        key = (complex(p), int(k), float(w))
        acc[key] = acc.get(key, 0j) + c
    return [(c, p, k, w) for (p, k, w), c in acc.items() if abs(c) > tol]


def atoms_poly_D(atoms, coeffs):
    """P(D) applied to atoms; coeffs highest degree first."""
    out = []
    cur = atoms
    for c in reversed(coeffs):
        out.extend((c * a, p, k, w) for a, p, k, w in cur)
        cur = atoms_D(cur)
    return _merge(out)


def atoms_scale(atoms, s, dp=0.0):
    return [(c * s, p + dp, k, w) for c, p, k, w in atoms]


def atoms_conj(atoms):
    return [(np.conj(c), np.conj(p), k, -w) for c, p, k, w in atoms]


def atoms_eval(atoms, r):
    r = np.asarray(r, dtype=float)
    out = np.zeros(r.shape, dtype=complex)
    L = np.log(r)
    for c, p, k, w in atoms:
        out += c * np.exp(p * L) * L ** k * np.exp(1j * w * r)
    return out


def _weight_terms(weight, domain):
    if weight is None:
        return [(0.0, 0.0)]
    if isinstance(weight, WeightSpec):
        return weight.power_terms()
    if isinstance(weight, (list, tuple)):
        return [(float(lc), float(p)) for lc, p in weight]  # raw (log_c, p) pairs
    return None  # arbitrary callable


def pair_integral(x, y, weight_terms, domain: AnnulusDomain, shift=0.0, tol=1e-13):
    """e^{-shift} integral_a^b atom_x conj(atom_y) w(r) r dr for two atoms."""
    c1, p1, k1, w1 = x
    c2, p2, k2, w2 = y
    ta, tb = domain.log_a, domain.log_b
    c = c1 * np.conj(c2)
    dw = w1 - w2
    total = 0j
    for lc, pw in weight_terms:
        lam = p1 + np.conj(p2) + pw + 2.0  # r^(s) r dr = e^{(s+2)t} dt
        if dw == 0:
            total += exp_moment(lam, k1 + k2, ta, tb, shift - lc)
        else:
            def f(t, lam=lam, lc=lc):
                return np.exp(lam * t + lc - shift) * t ** (k1 + k2) * np.exp(1j * dw * np.exp(t))
            # oscillation in t has local frequency |dw| r <= |dw| b; cap panels accordingly
            panel = (math.pi / 2) / (abs(dw) * domain.b)
            res_re = adaptive_quad(lambda t: np.real(f(t)), ta, tb, tol, max_panel=panel)
            res_im = adaptive_quad(lambda t: np.imag(f(t)), ta, tb, tol, max_panel=panel)
            total += res_re.value + 1j * res_im.value
    return c * total


def atoms_inner(xs, ys, weight_terms, domain, shift=0.0, hermitian=False):
    """sum_ij pair_integral(x_i, y_j); with hermitian=True only i <= j is computed."""
    if hermitian:
        total = 0j
        for i, x in enumerate(xs):
            total += pair_integral(x, x, weight_terms, domain, shift)
            for y in xs[i + 1:]:
                total += 2 * np.real(pair_integral(x, y, weight_terms, domain, shift))
        return total
    return sum((pair_integral(x, y, weight_terms, domain, shift) for x in xs for y in ys), 0j)


# --------------------------------------------------------------------------
# operator images of expansions


IMAGES = ("identity", "Lm", "LmStar", "LmStarLm", "Lm1", "Dscr2", "Dm", "FrakLm", "graded-gradient",
          "gradient")


def image_components(expansion: RadialExpansion, image: str, m: float = 2.0):
    """Components (factor, atoms) with ||image(u)||^2 = sum factor * int |atoms|^2 w dx-radial."""
    if image not in IMAGES:
        raise ValueError(f"term type outside catalog: image {image!r}")
    comps = {}
    for k in expansion.modes:
        U = expansion.mode_atoms(k)
        if not U:
            continue
        ck = 2 * math.pi if k == 0 else math.pi
        if image == "identity":
            comps[(k,)] = (ck, U)
        elif image in ("graded-gradient", "gradient"):
            s = (m - 1) if image == "graded-gradient" else 0.0
            radial = atoms_scale(atoms_poly_D(U, [1.0, s]), 1.0, -1.0)
            comps[(k, "r")] = (ck, radial)
            if k:
                comps[(k, "theta")] = (ck, atoms_scale(U, 1j * k, -1.0))
        elif image == "FrakLm":
            if k == 0:
                mo = reduce_mode(OperatorTag("FrakLm", m), 0)
                comps[(0,)] = (2 * math.pi, atoms_scale(atoms_poly_D(U, mo.coeffs), 0.25, -2.0))
            else:
                mp = reduce_mode(OperatorTag("FrakLm", m), k)
                mn = reduce_mode(OperatorTag("FrakLm", m), -k)
                comps[(k, "+")] = (2 * math.pi, atoms_scale(atoms_poly_D(U, mp.coeffs), 0.125, -2.0))
                comps[(k, "-")] = (2 * math.pi, atoms_scale(atoms_poly_D(atoms_conj(U), mn.coeffs), 0.125, -2.0))
        else:
            mo = reduce_mode(OperatorTag(image, m), k)
            comps[(k,)] = (ck, atoms_scale(atoms_poly_D(U, mo.coeffs), mo.factor, -mo.degree))
    return comps


def expansion_L2_norm(expansion: RadialExpansion, image: str = "identity", weight=None,
                      domain: AnnulusDomain | None = None, m: float = 2.0, shift: float = 0.0) -> float:
    """Weighted L2 norm squared of image(u) over the annulus, assembled mode by mode.

    ``weight`` is a WeightSpec (closed-form path), None for the unit weight, or a
    callable of r (quadrature path).
    """
    if domain is None:
        raise ValueError("domain required")
    comps = image_components(expansion, image, m)
    wt = _weight_terms(weight, domain)
    total = 0.0
    for factor, atoms in comps.values():
        atoms = _merge(atoms)
        if wt is not None:
            total += factor * np.real(atoms_inner(atoms, atoms, wt, domain, shift, hermitian=True))
        else:
            def f(t, atoms=atoms):
                r = np.exp(t)
                return np.abs(atoms_eval(atoms, r)) ** 2 * weight(r) * r * r * math.exp(-shift)
            total += factor * adaptive_quad(f, domain.log_a, domain.log_b, 1e-14).value
    return float(total)


def image_gram(expansions, image, weight, domain, m=2.0, log_scales=None):
    """Real symmetric G with ||image(sum y_j u_j)||^2 = y^T G y (y real).

    ``log_scales`` s_j rescale u_j -> e^{-s_j} u_j inside the integrals.
    """
    n = len(expansions)
    s = np.zeros(n) if log_scales is None else np.asarray(log_scales, float)
    comps = [image_components(e, image, m) for e in expansions]
    wt = _weight_terms(weight, domain)
    if wt is None:
        raise ValueError("image_gram needs a power weight")
    G = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            v = 0.0
            for key, (factor, ai) in comps[i].items():
                if key in comps[j]:
                    aj = comps[j][key][1]
                    v += factor * np.real(atoms_inner(ai, aj, wt, domain, s[i] + s[j]))
            G[i, j] = G[j, i] = v
    return G


# --------------------------------------------------------------------------
# direct 2-D oracle


class ExpansionField:
    """Pointwise field for expansions without r-oscillation (exact Wirtinger derivatives)."""

    def __init__(self, expansion: RadialExpansion):
        self.parts = []
        for t in expansion.terms:
            for c, p, k, w in t.atoms():
                if w != 0:
                    raise ValueError("ExpansionField does not support r-argument oscillation")
                self.parts.append((t.coeff * c, p, k, t.n))
        self.max_order = 99

    def _w(self, i, j, x, y):
        from .operators import MonomialField
        s = 0j
        for c, p, k, n in self.parts:
            s += c * MonomialField(p, n, k).wirtinger(i, j, x, y)
        return s

    def value(self, x, y):
        return float(np.real(self._w(0, 0, x, y)))

    def wirtinger(self, i, j, x, y):
        # u = Re F, so d^{ij} u = (d^{ij} F + conj(d^{ji} F)) / 2
        return 0.5 * (self._w(i, j, x, y) + np.conj(self._w(j, i, x, y)))


def direct_L2_norm(expansion: RadialExpansion, image: str = "identity", weight=None,
                   domain: AnnulusDomain | None = None, m: float = 2.0,
                   n_radial: int = 48, n_theta: int = 64) -> float:
    """Tensor Gauss(log r) x trapezoid(theta) quadrature of |image(u)|^2 w over the annulus."""
    from .operators import op_catalog
    if image not in IMAGES:
        raise ValueError(f"term type outside catalog: image {image!r}")
    fld = ExpansionField(expansion)
    ta, tb = domain.log_a, domain.log_b
    panels = max(1, int(math.ceil(tb - ta)))
    gx, gw = np.polynomial.legendre.leggauss(n_radial)
    th = 2 * math.pi * np.arange(n_theta) / n_theta
    if image not in ("identity", "graded-gradient", "gradient"):
        op = op_catalog(image, m)
    total = 0.0
    for pi in range(panels):
        lo = ta + (tb - ta) * pi / panels
        hi = ta + (tb - ta) * (pi + 1) / panels
        for xg, wg in zip(gx, gw):
            t = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xg
            r = math.exp(t)
            wr = 1.0 if weight is None else float(weight(min(max(r, domain.a), domain.b)))
            acc = 0.0
            for ang in th:
                x, y = r * math.cos(ang), r * math.sin(ang)
                if image == "identity":
                    v = abs(fld.value(x, y)) ** 2
                elif image in ("graded-gradient", "gradient"):
                    uz = fld.wirtinger(1, 0, x, y)
                    gx_, gy_ = 2 * uz.real, -2 * uz.imag
                    s = (m - 1) if image == "graded-gradient" else 0.0
                    u = fld.value(x, y)
                    v = (gx_ + s * x / r ** 2 * u) ** 2 + (gy_ + s * y / r ** 2 * u) ** 2
                else:
                    v = abs(op.apply(fld, x, y)) ** 2
                acc += v
            total += 0.5 * (hi - lo) * wg * wr * r * r * acc * (2 * math.pi / n_theta)
    return float(total)


# --------------------------------------------------------------------------
# transcribed closed forms


def lm_norm_closed_form(m: float, alpha2: float, b0: float, b: dict, domain: AnnulusDomain) -> float:
    """Closed-form int (Lm u)^2 for the r^{m+1} part of an m-biharmonic expansion.

    Coefficients follow u = alpha2 r^{m+1} log r + sum_n (b_n r^{m+1} z^n + conj).
    """
    A, B = domain.a, domain.b
    x = A / B
    la, lb = math.log(1 / A), math.log(1 / B)

    def bracket2(R, l):
        return R ** (2 * m) * l * l + R ** (2 * m) * l / m + R ** (2 * m) / (2 * m * m)

    def bracket1(R, l):
        return R ** (2 * m) * l + R ** (2 * m) / (2 * m)

    c = alpha2 + 2 * m * b0
    val = m / 2 * alpha2 ** 2 * (bracket2(B, lb) - bracket2(A, la))
    val += c * c / (2 * m) * B ** (2 * m) * (1 - x ** (2 * m))
    val -= alpha2 * c * (bracket1(B, lb) - bracket1(A, la))
    for n, bn in b.items():
        if n == 0:
            continue
        if m + n > 0:
            val += (m + n) * abs(bn) ** 2 * B ** (2 * (m + n)) * (1 - x ** (2 * (m + n)))
        elif m + n < 0:
            k = -n
            val += (k - m) * abs(bn) ** 2 * A ** (-2 * (k - m)) * (1 - x ** (2 * (k - m)))
    for n, bn in b.items():
        if n >= 1 and -n in b:
            val += 2 / m * (m * m - n * n) * (bn * b[-n]).real * B ** (2 * m) * (1 - x ** (2 * m))
    return 32 * math.pi * m * m * val


def frak_norm_transcribed_terms(m: float, n: int, domain: AnnulusDomain):
    """Single-coefficient terms of the transcribed int |FrakLm u|^2 against the engine.

    Returns a list of dicts for the a_n and b_n terms (unit coefficient).
    """
    from .operators import m_biharmonic_expansion
    A, B = domain.a, domain.b
    out = []
    # integrand coefficients as transcribed, times 2 pi int r^{...} dr
    ca = ((n * (n - 1) - (m - 1) ** 2) ** 2 + (m - 1) ** 2)
    ta = 2 * math.pi * ca * moment_integral(2 * n - 2 * m - 1, 0, A, B).value
    ea = expansion_L2_norm(m_biharmonic_expansion(m, a={n: 1.0}), "FrakLm", None, domain, m)
    out.append({"term": f"|a_{n}|^2", "transcribed": ta, "engine": ea})
    cb = ((n * (2 * m + n - 1) + m * (m - 1)) ** 2 + m * m * (m - 1) ** 2)
    tb = 2 * math.pi * cb * moment_integral(2 * n + 2 * m - 1, 0, A, B).value
    eb = expansion_L2_norm(m_biharmonic_expansion(m, b={n: 1.0}), "FrakLm", None, domain, m)
    out.append({"term": f"|b_{n}|^2", "transcribed": tb, "engine": eb})
    for d in out:
        d["rel_diff"] = abs(d["transcribed"] - d["engine"]) / max(abs(d["engine"]), 1e-300)
        d["agrees"] = d["rel_diff"] < 1e-9
    return out
