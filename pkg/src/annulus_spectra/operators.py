"""Operator families, their Fourier-mode reductions, kernel bases and constants.

Every operator here is Euler-homogeneous: acting on ``Y(log r) e^{i n theta}`` it
returns ``factor * r^{-degree} e^{i(n - shift) theta} P_n(D) Y`` with ``D = d/dt``,
``t = log r`` and ``P_n`` a polynomial with constant coefficients.

Pointwise evaluation works with Wirtinger derivatives ``d_z^i d_zbar^j u``; the
operators are stored as sums of ``c * z^p * zbar^q * d_z^i d_zbar^j`` so they can
be composed exactly with the Leibniz rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np
from scipy import optimize

FAMILIES = ("Lm", "LmStar", "LmStarLm", "FrakLm", "Dm", "D2", "Lm1", "Dscr2")
DEGENERATE_RTOL = 1e-9


@dataclass(frozen=True)
class OperatorTag:
    family: str
    m: float = 2.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown operator family {self.family!r}")
        m = float(self.m)
        if self.family == "D2":
            m = 2.0
        if not m >= 1:
            raise ValueError("multiplicity m must be >= 1")
        object.__setattr__(self, "m", m)

    @property
    def integer_m(self) -> bool:
        return float(self.m).is_integer()

    @property
    def flags(self) -> list[str]:
        out = []
        if not self.integer_m:
            out.append("non-integer-m")
        if self.family == "Dm" and self.m <= 1 + 2 / math.sqrt(3):
            out.append("dm-real-root-regime")
        return out


# --------------------------------------------------------------------------
# mode reductions


@dataclass(frozen=True)
class CharPolynomial:
    coeffs: tuple  # highest degree first, real

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        return np.polyval(np.asarray(self.coeffs, dtype=float), x)

    @property
    def roots(self) -> np.ndarray:
        return np.roots(np.asarray(self.coeffs, dtype=float))

    @property
    def discriminant(self) -> float:
        c = np.asarray(self.coeffs, dtype=float)
        if self.degree == 1:
            return 1.0
        if self.degree == 2:
            return float(c[1] ** 2 - 4 * c[0] * c[2])
        r = self.roots
        prod = 1.0 + 0j
        for i in range(len(r)):
            for j in range(i + 1, len(r)):
                prod *= (r[i] - r[j]) ** 2
        return float((c[0] ** (2 * self.degree - 2) * prod).real)

    def shifted(self, s: float) -> "CharPolynomial":
        """Coefficients of X -> P(X + s)."""
        p = np.poly1d(np.asarray(self.coeffs, dtype=float))
        q = p(np.poly1d([1.0, s]))
        c = np.zeros(self.degree + 1)
        c[self.degree + 1 - len(q.coeffs):] = q.coeffs
        return CharPolynomial(tuple(float(v) for v in c))


def _poly_mul(*ps):
    out = np.array([1.0])
    for p in ps:
        out = np.polymul(out, np.asarray(p, dtype=float))
    return out


def _sq_minus(shift, n2):
    # (X + shift)^2 - n2
    return np.array([1.0, 2 * shift, shift * shift - n2])


def dm_coefficients(m: float, n: int) -> np.ndarray:
    """Quartic P with Dm(r^lam e^{in theta}) = P(lam) r^{lam-4} e^{in theta}."""
    M = (m - 1) ** 2
    n2 = float(n) ** 2
    lam = n2 * n2 + n2 * (6 * M - 4) + (m + 1) * M * (m - 3)
    return np.array([1.0, -4.0, -(2 * M + 2 * n2 - 4), 4 * M + 4 * n2, lam])


@dataclass(frozen=True)
class ModeOperator:
    tag: OperatorTag
    n: int
    coeffs: tuple  # P_n, highest first
    degree: int  # output picks up r^{-degree}
    shift: int  # output Fourier mode n - shift
    factor: float

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def char_poly(self) -> CharPolynomial:
        return CharPolynomial(self.coeffs)

    @property
    def euler_coefficients(self) -> tuple:
        """Coefficients c_k of sum c_k Y^{(k)}, lowest order first."""
        return tuple(reversed(self.coeffs))

    def on_monomial(self, lam):
        """Multiplier of r^{lam - degree} e^{i(n - shift) theta}."""
        return self.factor * np.polyval(np.asarray(self.coeffs, dtype=float), lam)


def reduce_mode(tag: OperatorTag, n: int) -> ModeOperator:
    m = tag.m
    n = int(n)
    n2 = float(n * n)
    fam = tag.family
    degree, shift, factor = 2, 0, 1.0
    if fam == "Lm":
        c = _sq_minus(m - 1, n2)
    elif fam == "LmStar":
        c = _sq_minus(-(m - 1), n2)
    elif fam == "LmStarLm":
        c = _poly_mul(_sq_minus(-(m + 1), n2), _sq_minus(m - 1, n2))
        degree = 4
    elif fam == "FrakLm":
        c = _sq_minus(m + n - 2, 1.0)
        shift, factor = 2, 0.25
    elif fam in ("Dm", "D2"):
        c = dm_coefficients(m, n)
        degree = 4
    elif fam == "Lm1":
        c = np.array([1.0, 0.0, m * m - 1 - n2])
    else:  # Dscr2
        c = np.array([1.0, -1.0])
    return ModeOperator(tag, n, tuple(float(v) for v in c), degree, shift, factor)


def dm_biquadratic(m: float, n: int) -> CharPolynomial:
    """Q(X) = P(X + 1) for the Dm quartic; even in X."""
    return reduce_mode(OperatorTag("Dm", m), n).char_poly.shifted(1.0)


def dm_discriminant(m: float, n: int) -> float:
    """Discriminant of Q viewed as a quadratic in X^2."""
    M = (m - 1) ** 2
    return 16 * (M - (M - 1) * n * n)


# --------------------------------------------------------------------------
# radial terms and expansions


@dataclass(frozen=True)
class RadialTerm:
    """coeff * rho(r) contributing Re(coeff e^{i n theta}) rho(r) to u.

    rho is r^exponent (log r)^log_power, optionally times cos/sin(freq * arg)
    with arg = log r or r.
    """

    exponent: float
    log_power: int = 0
    freq: float = 0.0
    phase: str | None = None
    argument: str = "log r"
    n: int = 0
    coeff: complex = 1.0

    def radial(self, r):
        r = np.asarray(r, dtype=float)
        out = r ** self.exponent
        if self.log_power:
            out = out * np.log(r) ** self.log_power
        if self.phase is not None:
            arg = np.log(r) if self.argument == "log r" else r
            trig = np.cos if self.phase == "cos" else np.sin
            out = out * trig(self.freq * arg)
        return out

    def atoms(self):
        """Radial part as atoms (c, p, k, omega): c r^p (log r)^k e^{i omega r}."""
        e, k = self.exponent, self.log_power
        if self.phase is None or self.freq == 0.0:
            if self.phase == "sin":
                return []
            return [(1.0 + 0j, complex(e), k, 0.0)]
        b = self.freq
        if self.argument == "log r":
            if self.phase == "cos":
                return [(0.5 + 0j, complex(e, b), k, 0.0), (0.5 + 0j, complex(e, -b), k, 0.0)]
            return [(-0.5j, complex(e, b), k, 0.0), (0.5j, complex(e, -b), k, 0.0)]
        if self.phase == "cos":
            return [(0.5 + 0j, complex(e), k, b), (0.5 + 0j, complex(e), k, -b)]
        return [(-0.5j, complex(e), k, b), (0.5j, complex(e), k, -b)]

    def with_coeff(self, coeff, n=None) -> "RadialTerm":
        return RadialTerm(self.exponent, self.log_power, self.freq, self.phase,
                          self.argument, self.n if n is None else n, complex(coeff))

    def to_json(self) -> dict:
        return {
            "coeff_re": float(np.real(self.coeff)),
            "coeff_im": float(np.imag(self.coeff)),
            "exponent": float(self.exponent),
            "log_power": int(self.log_power),
            "freq": float(self.freq),
            "phase": self.phase,
            "argument": self.argument,
            "mode": int(self.n),
        }

    def label(self) -> str:
        s = f"r^{self.exponent:g}"
        if self.log_power:
            s += f" log^{self.log_power} r" if self.log_power > 1 else " log r"
        if self.phase:
            s += f" {self.phase}({self.freq:g} {'log r' if self.argument == 'log r' else 'r'})"
        return s


@dataclass
class RadialExpansion:
    """u(r, theta) = sum over terms of Re(coeff e^{i n theta}) rho(r)."""

    terms: list = field(default_factory=list)

    def add(self, term: RadialTerm, coeff=None, n=None):
        if coeff is not None or n is not None:
            term = term.with_coeff(term.coeff if coeff is None else coeff, n)
        self.terms.append(term)
        return self

    def __call__(self, r, theta):
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        out = np.zeros(np.broadcast(r, theta).shape)
        for t in self.terms:
            out = out + np.real(t.coeff * np.exp(1j * t.n * theta)) * t.radial(r)
        return out

    @property
    def modes(self) -> list[int]:
        return sorted({abs(t.n) for t in self.terms})

    def mode_atoms(self, k: int):
        """Atoms of U_k where u = sum_{k>=0} Re(U_k(r) e^{i k theta})."""
        k = abs(int(k))
        out = []
        for t in self.terms:
            if k == 0 and t.n == 0:
                # Re(c) rho for real rho; keep the general complex-radial case exact
                for c, p, j, w in t.atoms():
                    out.append((0.5 * t.coeff * c, p, j, w))
                    out.append((0.5 * np.conj(t.coeff * c), np.conj(p), j, -w))
            elif t.n == k and k > 0:
                out.extend((t.coeff * c, p, j, w) for c, p, j, w in t.atoms())
            elif t.n == -k and k > 0:
                out.extend((np.conj(t.coeff * c), np.conj(p), j, -w) for c, p, j, w in t.atoms())
        return out

    def to_json(self) -> list:
        return [t.to_json() for t in self.terms]


def m_biharmonic_expansion(m, alpha1=0.0, alpha2=0.0, a=None, b=None) -> RadialExpansion:
    """Kernel expansion of Lm* Lm as written with coefficient families a_n, b_n.

    u = alpha1 r^{1-m} log r + 2 Re sum a_n r^{1-m} z^n
        + alpha2 r^{m+1} log r + 2 Re sum b_n r^{m+1} z^n
    ``a`` and ``b`` map integer n to complex coefficients.
    """
    ex = RadialExpansion()
    if alpha1:
        ex.add(RadialTerm(1 - m, 1), coeff=alpha1, n=0)
    if alpha2:
        ex.add(RadialTerm(m + 1, 1), coeff=alpha2, n=0)
    for n, c in sorted((a or {}).items()):
        ex.add(RadialTerm(1 - m + n), coeff=2 * complex(c), n=n)
    for n, c in sorted((b or {}).items()):
        ex.add(RadialTerm(m + 1 + n), coeff=2 * complex(c), n=n)
    return ex


# --------------------------------------------------------------------------
# kernel bases


def _close(x, y):
    return abs(x - y) <= DEGENERATE_RTOL * max(1.0, abs(x), abs(y))


def _basis_from_real_roots(roots, n):
    """Real roots with multiplicity -> power and power-log terms."""
    groups: list[list[float]] = []
    for x in sorted(float(v) for v in roots):
        if groups and _close(groups[-1][0], x):
            groups[-1].append(x)
        else:
            groups.append([x])
    out = []
    for g in groups:
        e = float(np.mean(g))
        for k in range(len(g)):
            out.append(RadialTerm(e, k, n=n))
    return out


def _sqrt_real(x):
    return math.sqrt(x) if x >= 0 else None


@dataclass(frozen=True)
class ExponentTriple:
    alpha: float | None
    beta: float | None
    mu: float | None
    real_roots: tuple = ()

    @property
    def complex_regime(self) -> bool:
        return self.beta is not None and self.beta > 0


def exponents_alpha_beta(m: float, n: int) -> ExponentTriple:
    """Exponents of the Dm mode-n quartic: roots 1 +- alpha +- i beta."""
    n = abs(int(n))
    M = (m - 1) ** 2
    S = M + n * n + 1
    mu2 = m * m * (m - 2) ** 2 + n * n * (n * n + 6 * m * (m - 2) + 4)
    mu = math.sqrt(mu2)
    if m >= 3 and n >= 2:
        alpha = math.sqrt((mu + S) / 2)
        beta = math.sqrt((mu - S) / 2)
        return ExponentTriple(alpha, beta, mu)
    disc = S * S - mu2
    if disc >= 0:
        s1, s2 = S + math.sqrt(disc), S - math.sqrt(disc)
        roots = []
        for s in (s1, s2):
            if s >= 0:
                roots += [1 + math.sqrt(s), 1 - math.sqrt(s)]
        if len(roots) == 4:
            return ExponentTriple(None, None, mu, tuple(sorted(roots)))
    alpha = math.sqrt((mu + S) / 2)
    beta = math.sqrt(max(mu - S, 0.0) / 2)
    return ExponentTriple(alpha, beta, mu)


def _dm_basis(m, n, trig_argument):
    n_abs = abs(n)
    M = (m - 1) ** 2
    if n_abs == 0:
        return _basis_from_real_roots([m + 1, 1 - m, m - 1, 3 - m], n)
    if n_abs == 1:
        s = math.sqrt(M + 4)
        return _basis_from_real_roots([1 + s, 1 - s, m, 2 - m], n)
    ex = exponents_alpha_beta(m, n)
    if ex.real_roots:
        return _basis_from_real_roots(ex.real_roots, n)
    a, b = ex.alpha, ex.beta
    out = []
    for e in (1 + a, 1 - a):
        out.append(RadialTerm(e, 0, b, "cos", trig_argument, n=n))
        out.append(RadialTerm(e, 0, b, "sin", trig_argument, n=n))
    return out


def mode_kernel_basis(tag: OperatorTag | str, m: float | None = None, n: int = 0,
                      trig_argument: str = "log r", printed: bool = False):
    """Real basis of the mode-n kernel.

    ``printed=True`` returns the exponents exactly as originally stated where
    they differ from the derivation (LmStar), so both can be tested.
    ``trig_argument`` chooses cos/sin(beta log r) or cos/sin(beta r) for Dm.
    """
    if isinstance(tag, str):
        fam = tag
        m = 2.0 if fam == "D2" else float(m)
    else:
        fam, m = tag.family, tag.m
    n = int(n)
    if fam == "Lm":
        return _basis_from_real_roots([1 - m + n, 1 - m - n], n)
    if fam == "LmStar":
        if printed:
            return _basis_from_real_roots([1 + m + n, 1 + m - n], n)
        return _basis_from_real_roots([m - 1 + n, m - 1 - n], n)
    if fam == "LmStarLm":
        return _basis_from_real_roots([1 - m + n, 1 - m - n, m + 1 + n, m + 1 - n], n)
    if fam in ("Dm", "D2"):
        return _dm_basis(m, n, trig_argument)
    if fam == "FrakLm-full-kernel":
        return [RadialTerm(1 - m, n=0), RadialTerm(3 - m, n=0),
                RadialTerm(2 - m, n=1, coeff=1.0), RadialTerm(2 - m, n=1, coeff=-1j)]
    raise ValueError(f"no kernel basis for {fam!r}")


def kernel_candidates(family: str, m: float, n: int) -> dict:
    """Named candidate bases; more than one where conventions disagree."""
    if family == "LmStar":
        return {"derived": mode_kernel_basis("LmStar", m, n),
                "printed": mode_kernel_basis("LmStar", m, n, printed=True)}
    if family in ("Dm", "D2") and abs(n) >= 2 and exponents_alpha_beta(m, n).real_roots == ():
        return {"log r": mode_kernel_basis(family, m, n, trig_argument="log r"),
                "r": mode_kernel_basis(family, m, n, trig_argument="r")}
    return {"default": mode_kernel_basis(family, m, n)}


# --------------------------------------------------------------------------
# pointwise calculus with Wirtinger derivatives


def _falling(p, s):
    out = 1.0
    for i in range(s):
        out *= p - i
    return out


class WirtingerOp:
    """Linear differential operator sum c z^p zbar^q d_z^i d_zbar^j."""

    def __init__(self, terms=None):
        acc: dict = {}
        for c, p, q, i, j in terms or []:
            key = (float(p), float(q), int(i), int(j))
            acc[key] = acc.get(key, 0.0) + complex(c)
        self.terms = [(c, *k) for k, c in acc.items() if c != 0]

    @classmethod
    def identity(cls):
        return cls([(1.0, 0, 0, 0, 0)])

    def __add__(self, other):
        return WirtingerOp(self.terms + other.terms)

    def __sub__(self, other):
        return self + other.scale(-1.0)

    def scale(self, s):
        return WirtingerOp([(c * s, p, q, i, j) for c, p, q, i, j in self.terms])

    def __matmul__(self, other):
        """Composition self(other(u))."""
        out = []
        for c1, p1, q1, i1, j1 in self.terms:
            for c2, p2, q2, i2, j2 in other.terms:
                # d_z^i1 d_zbar^j1 (z^p2 zbar^q2 D^{i2 j2} u)
                for s in range(i1 + 1):
                    fz = _falling(p2, s)
                    if fz == 0:
                        continue
                    for t in range(j1 + 1):
                        fzb = _falling(q2, t)
                        if fzb == 0:
                            continue
                        c = c1 * c2 * comb(i1, s) * comb(j1, t) * fz * fzb
                        out.append((c, p1 + p2 - s, q1 + q2 - t, i2 + i1 - s, j2 + j1 - t))
        return WirtingerOp(out)

    @property
    def order(self):
        return max((i + j for _, _, _, i, j in self.terms), default=0)

    def conj(self):
        """Operator whose action is conj(self(conj u))."""
        return WirtingerOp([(np.conj(c), q, p, j, i) for c, p, q, i, j in self.terms])

    def apply(self, fld, x, y):
        z = complex(x, y)
        if z == 0:
            raise ValueError("operators are singular at the origin")
        if self.order > fld.max_order:
            raise ValueError("field does not supply enough derivatives")
        logz = np.log(z)
        total = 0j
        for c, p, q, i, j in self.terms:
            # z^p zbar^q = exp(p log z + q conj(log z)) on the principal branch
            coef = np.exp(p * logz + q * np.conj(logz))
            total += c * coef * fld.wirtinger(i, j, x, y)
        return total


def op_catalog(name: str, m: float) -> WirtingerOp:
    """Pointwise form of the catalogued operators."""
    M1 = m - 1
    dz = WirtingerOp([(1, 0, 0, 1, 0)])
    dzb = WirtingerOp([(1, 0, 0, 0, 1)])
    lap = WirtingerOp([(4, 0, 0, 1, 1)])
    radial = WirtingerOp([(1, 1, 0, 1, 0), (1, 0, 1, 0, 1)])  # r d_r
    if name == "Lm":
        return WirtingerOp([(4, 0, 0, 1, 1), (2 * M1, 0, -1, 1, 0), (2 * M1, -1, 0, 0, 1),
                            (M1 * M1, -1, -1, 0, 0)])
    if name == "LmStar":
        return WirtingerOp([(4, 0, 0, 1, 1), (-2 * M1, 0, -1, 1, 0), (-2 * M1, -1, 0, 0, 1),
                            (M1 * M1, -1, -1, 0, 0)])
    if name == "LmStarLm":
        return op_catalog("LmStar", m) @ op_catalog("Lm", m)
    if name == "Lm1":
        return WirtingerOp([(4, 0, 0, 1, 1), (m * m - 1, -1, -1, 0, 0)])
    if name == "Lm1StarLm1":
        return op_catalog("Lm1", m) @ op_catalog("Lm1", m)
    if name == "Dscr2":
        return WirtingerOp([(1, 0, -1, 1, 0), (1, -1, 0, 0, 1), (-1, -1, -1, 0, 0)])
    if name == "Dscr2Star":
        return _dscr2_star()
    if name == "FrakLm":
        return WirtingerOp([(1, 0, 0, 2, 0), (M1, -1, 0, 1, 0), (M1 * (m - 3) / 4, -2, 0, 0, 0)])
    if name == "FrakLmBar":
        return op_catalog("FrakLm", m).conj()
    if name == "FrakLmBarT":
        # formal transpose of FrakLmBar
        return WirtingerOp([(1, 0, 0, 0, 2), (-M1, 0, -1, 0, 1), (M1 * (m + 1) / 4, 0, -2, 0, 0)])
    if name in ("Dm", "D2"):
        mm = 2.0 if name == "D2" else m
        fl = op_catalog("FrakLm", mm)
        flbt = op_catalog("FrakLmBarT", mm)
        return (flbt @ fl + flbt.conj() @ fl.conj()).scale(8.0)
    if name == "Laplacian":
        return lap
    if name == "Bilaplacian":
        return lap @ lap
    if name == "RadialD":
        return radial
    if name == "AngularD":
        return WirtingerOp([(1j, 1, 0, 1, 0), (-1j, 0, 1, 0, 1)])
    if name == "dz":
        return dz
    if name == "dzbar":
        return dzb
    raise ValueError(f"unknown operator {name!r}")


def _dscr2_star():
    # Dscr2 = r^-2 (D - 1), D = r d_r. For the area measure the formal adjoint of
    # r^-2 C(D) is r^-2 C(-D), so here -r^-2 (D + 1).
    return WirtingerOp([(-1, 0, -1, 1, 0), (-1, -1, 0, 0, 1), (-1, -1, -1, 0, 0)])


def dm_polar_form(m: float) -> WirtingerOp:
    """Dm assembled from its quartic with n^2 replaced by -d_theta^2."""
    D = op_catalog("RadialD", m)
    T = op_catalog("AngularD", m)
    I = WirtingerOp.identity()
    M = (m - 1) ** 2
    T2 = T @ T
    D2_ = D @ D
    D3 = D2_ @ D
    D4 = D3 @ D
    # n^2 -> -T2 ; n^4 -> T2 T2
    P = (D4 - D3.scale(4) - D2_.scale(2 * M - 4) + (T2 @ D2_).scale(2) + D.scale(4 * M)
         - (T2 @ D).scale(4) + (T2 @ T2) - T2.scale(6 * M - 4) + I.scale((m + 1) * M * (m - 3)))
    inv_r4 = WirtingerOp([(1, -2, -2, 0, 0)])
    return inv_r4 @ P


# --------------------------------------------------------------------------
# fields


class PolyField:
    """Real polynomial sum c[i, j] x^i y^j with exact derivatives."""

    def __init__(self, coeffs):
        self.c = np.asarray(coeffs, dtype=float)
        self.max_order = 99

    @classmethod
    def random(cls, degree, rng):
        c = np.zeros((degree + 1, degree + 1))
        for i in range(degree + 1):
            for j in range(degree + 1 - i):
                c[i, j] = rng.standard_normal()
        return cls(c)

    def value(self, x, y):
        return np.polynomial.polynomial.polyval2d(x, y, self.c)

    def dxy(self, a, b, x, y):
        c = np.polynomial.polynomial.polyder(self.c, a, axis=0) if a else self.c
        c = np.polynomial.polynomial.polyder(c, b, axis=1) if b else c
        return np.polynomial.polynomial.polyval2d(x, y, c)

    def wirtinger(self, i, j, x, y):
        return wirtinger_from_xy(self.dxy, i, j, x, y)


class FunctionField:
    """Field given by a Cartesian derivative callable d(a, b, x, y)."""

    def __init__(self, deriv, max_order=4):
        self.deriv = deriv
        self.max_order = max_order

    def value(self, x, y):
        return self.deriv(0, 0, x, y)

    def dxy(self, a, b, x, y):
        return self.deriv(a, b, x, y)

    def wirtinger(self, i, j, x, y):
        return wirtinger_from_xy(self.deriv, i, j, x, y)


def wirtinger_from_xy(dxy, i, j, x, y):
    # d_z = (d_x - i d_y)/2, d_zbar = (d_x + i d_y)/2
    total = 0j
    for a in range(i + 1):
        for b in range(j + 1):
            c = comb(i, a) * comb(j, b) * (-1j) ** (i - a) * (1j) ** (j - b)
            total += c * dxy(a + b, (i - a) + (j - b), x, y)
    return total / 2 ** (i + j)


class MonomialField:
    """Complex field r^lam (log r)^k e^{i n theta} with exact Wirtinger derivatives."""

    def __init__(self, lam, n=0, k=0):
        self.lam = complex(lam) if np.iscomplexobj(lam) else float(lam)
        self.n, self.k = int(n), int(k)
        self.max_order = 99

    def value(self, x, y):
        r, th = math.hypot(x, y), math.atan2(y, x)
        return r ** self.lam * math.log(r) ** self.k * np.exp(1j * self.n * th)

    def wirtinger(self, i, j, x, y):
        r, th = math.hypot(x, y), math.atan2(y, x)
        lam, n, k = self.lam, self.n, self.k
        # g(lam) = falling((lam+n)/2, i) falling((lam-n)/2, j), a polynomial in lam
        g = np.poly1d([1.0])
        for s in range(i):
            g = g * np.poly1d([0.5, n / 2 - s])
        for s in range(j):
            g = g * np.poly1d([0.5, -n / 2 - s])
        L = math.log(r)
        total = 0.0
        for s in range(k + 1):
            total += comb(k, s) * g.deriv(s)(lam) * L ** (k - s) if s else comb(k, 0) * g(lam) * L ** k
        return total * r ** (lam - i - j) * np.exp(1j * (n - i + j) * th)


def apply_operator(tag: OperatorTag, fld, point):
    """Value of the tagged operator on a field at a point (complex for FrakLm)."""
    x, y = point
    if x == 0 and y == 0:
        raise ValueError("evaluation at the origin")
    return op_catalog(tag.family, tag.m).apply(fld, x, y)


def _fd_laplacian(f, x, y, h):
    return (f(x + h, y) + f(x - h, y) + f(x, y + h) + f(x, y - h) - 4 * f(x, y)) / (h * h)


def _fd_dzz(f, x, y, h):
    fxx = (f(x + h, y) - 2 * f(x, y) + f(x - h, y)) / (h * h)
    fyy = (f(x, y + h) - 2 * f(x, y) + f(x, y - h)) / (h * h)
    fxy = (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4 * h * h)
    return 0.25 * (fxx - 2j * fxy - fyy)


def conjugation_apply(tag: OperatorTag, fld, point, h=1e-2, levels=4):
    """Lm = r^{1-m} Lap(r^{m-1} .) or FrakLm = |z|^{1-m} d_z^2(|z|^{m-1} .) by
    centered differences of the conjugated field with Richardson step halving.
    """
    x, y = point
    r0 = math.hypot(x, y)
    if r0 == 0:
        raise ValueError("evaluation at the origin")
    if tag.family not in ("Lm", "FrakLm"):
        raise ValueError("conjugated form only for Lm and FrakLm")
    m = tag.m

    def v(xx, yy):
        return math.hypot(xx, yy) ** (m - 1) * fld.value(xx, yy)

    stencil = _fd_laplacian if tag.family == "Lm" else _fd_dzz
    h = min(h, 0.25 * r0)
    table = [stencil(v, x, y, h / 2 ** i) for i in range(levels)]
    # second-order stencils: eliminate h^2, h^4, ... successively
    for lev in range(1, levels):
        f = 4 ** lev
        table = [(f * table[i + 1] - table[i]) / (f - 1) for i in range(len(table) - 1)]
    return table[0] * r0 ** (1 - m)


def decomposition_residual(m: float, fld, point) -> float:
    """|(L1* L1 + 4(m^2-1) D2* D2 - Lm* Lm) u| at a point."""
    x, y = point
    if x == 0 and y == 0:
        raise ValueError("evaluation at the origin")
    d2 = op_catalog("Dscr2", m)
    lhs = op_catalog("Lm1StarLm1", m) + (_dscr2_star() @ d2).scale(4 * (m * m - 1))
    return abs((lhs - op_catalog("LmStarLm", m)).apply(fld, x, y))


def polar_identity_residual(which: str, fld, point, m: float = 3.0) -> float:
    x, y = point
    if x == 0 and y == 0:
        raise ValueError("evaluation at the origin")
    d = fld.dxy
    ux, uy = d(1, 0, x, y), d(0, 1, x, y)
    if which == "zpz":
        lhs = (complex(x, y) * fld.wirtinger(1, 0, x, y)).real
        return abs(lhs - 0.5 * (x * ux + y * uy))
    if which == "z2pz2":
        uxx, uxy, uyy = d(2, 0, x, y), d(1, 1, x, y), d(0, 2, x, y)
        Du = x * ux + y * uy
        Tu = x * uy - y * ux
        DDu = x * x * uxx + 2 * x * y * uxy + y * y * uyy + Du
        TTu = y * y * uxx - 2 * x * y * uxy + x * x * uyy - Du
        DTu = Tu + (x * x - y * y) * uxy - x * y * (uxx - uyy)
        rhs = 0.25 * (DDu - 2j * DTu - TTu) - 0.5 * (Du - 1j * Tu)
        return abs(complex(x, y) ** 2 * fld.wirtinger(2, 0, x, y) - rhs)
    if which == "polar-laplacian":
        r = math.hypot(x, y)
        c, s = x / r, y / r
        uxx, uxy, uyy = d(2, 0, x, y), d(1, 1, x, y), d(0, 2, x, y)
        ur = c * ux + s * uy
        urr = c * c * uxx + 2 * c * s * uxy + s * s * uyy
        utt = r * r * (s * s * uxx - 2 * c * s * uxy + c * c * uyy) - r * ur
        return abs(uxx + uyy - (urr + ur / r + utt / (r * r)))
    if which == "polar-bilaplacian":
        cart = d(4, 0, x, y) + 2 * d(2, 2, x, y) + d(0, 4, x, y)
        D = op_catalog("RadialD", m)
        T = op_catalog("AngularD", m)
        two = WirtingerOp.identity().scale(2)
        inner = D @ D + T @ T
        outer = (D - two) @ (D - two) + T @ T
        polar = WirtingerOp([(1, -2, -2, 0, 0)]) @ outer @ inner
        return abs(cart - polar.apply(fld, x, y))
    if which == "dm-vs-composition":
        comp = op_catalog("Dm", m).apply(fld, x, y)
        return abs(comp - dm_polar_form(m).apply(fld, x, y))
    raise ValueError(f"unknown identity {which!r}")


# --------------------------------------------------------------------------
# explicit constants


def _bracketed_root(f, fp, lo, hi, tol=1e-15):
    x = optimize.brentq(f, lo, hi, xtol=1e-14)
    for _ in range(3):  # Newton polish
        d = fp(x)
        if d == 0:
            break
        x = x - f(x) / d
    return x


def paper_constants(which: str, m: float | None = None):
    if which == "m0":
        p = np.poly1d([3, -8, 10, -16, 7])
        root = _bracketed_root(p, p.deriv(), 2.0, 3.0)
        return {"value": root, "residual": abs(p(root)), "polynomial": [3, -8, 10, -16, 7]}
    if which == "cubic_roots":
        p = np.poly1d([-1, 1, 4, -2])
        roots = [_bracketed_root(p, p.deriv(), lo, hi) for lo, hi in ((-3, -1), (0, 1), (2, 3))]
        return {"value": roots, "residual": max(abs(p(r)) for r in roots), "polynomial": [-1, 1, 4, -2]}
    if which == "quadratic_discriminant":
        # discriminant of 2X^2 - 2(m+1)X + (m^2-1)
        if m is None:
            return {"value": "-4(m+1)(m-3)", "polynomial": [2, "-2(m+1)", "m^2-1"]}
        return {"value": 4 * (m + 1) ** 2 - 8 * (m * m - 1), "closed_form": -4 * (m + 1) * (m - 3)}
    if which == "f_of_2":
        f = [Fraction(c) for c in (3, -8, 10, -16, 7)]
        val = sum(c * 2 ** (4 - i) for i, c in enumerate(f))
        return {"value": int(val), "exact": True}
    raise ValueError(f"unknown constant {which!r}")


# --------------------------------------------------------------------------
# threshold catalog


@dataclass(frozen=True)
class ThresholdEntry:
    id: str
    formula: object
    params: tuple  # names beyond m
    valid: object  # predicate(m, **params) -> bool
    description: str
    default: dict = field(default_factory=dict)

    def __call__(self, m, **params):
        return self.formula(m, **params)


_E = math.e
L8 = math.log(8)
L4 = math.log(4)


def _f(m):
    return 4 * (m - 1) ** 2 * ((m - 1) ** 2 + 1) - (m * m - 4 * m + 1) ** 2


def _m0():
    return paper_constants("m0")["value"]


def _catalog():
    E = _E
    ents = [
        ThresholdEntry("bound_lm1", lambda m: math.log(4 / math.sqrt(3)), (), lambda m: m > 1,
                       "high frequencies of b_n controlled by the Lm energy"),
        ThresholdEntry("additional_conformal_class1", lambda m, n: math.log(2 * m / n) / (m - n), ("n",),
                       lambda m, n: 1 <= n <= m - 1, "b_n for 1 <= n <= m-1", {"n": 1}),
        ThresholdEntry("lm_log_1",
                       lambda m: 1 / (3 * E) + math.log(425 * ((m * m + 1) ** 2 + m * m * (m - 1) ** 2) ** 2),
                       (), lambda m: m > 1, "a_n for n >= m+1"),
        ThresholdEntry("lm_log_2",
                       lambda m: 1 / E + 0.5 * math.log(32 * (3 * m - 1) ** 7 / (m ** 4 * (m - 1) ** 2)),
                       (), lambda m: m > 1, "a_{-n} for n >= m+1"),
        ThresholdEntry("lm_log_3",
                       lambda m: 1 / E + m + 0.5 * math.log(25600 * (3 * m - 1) ** 7 / m ** 8),
                       (), lambda m: m > 1, "cross terms a_n a_{-n}"),
        ThresholdEntry("lm_log_4",
                       lambda m: math.log(25600 * (m - 1) ** 2 / E ** 2) + 3 / (2 * E) + 3 * (2 * m + 1),
                       (), lambda m: m > 1, "cross terms a_n b_{-n}"),
        ThresholdEntry("lm_log_5",
                       lambda m: 2 / E + math.log(2304 * (3 * m - 1) ** 7 / m ** 4) / (4 * m + 1),
                       (), lambda m: m > 1, "cross terms a_{-n} b_n"),
        ThresholdEntry("lm_log_6", lambda m, beta: math.log(m - 2 * beta) / (2 * (1 - beta)), ("beta",),
                       lambda m, beta: 0.5 < beta < 1 and m - 2 * beta >= 1, "a_{+-n}, 2 <= n <= m-2",
                       {"beta": 0.75}),
        ThresholdEntry("lm_log_7", lambda m, beta: math.log(2 * m / (m + 2 * beta)) / (2 * beta), ("beta",),
                       lambda m, beta: 0.5 < beta < 1 and m > 2 * beta, "b_{+-n}, 1 <= n <= m",
                       {"beta": 0.75}),
        ThresholdEntry("lm_log_8",
                       lambda m, beta: math.log(1024 * (m * m - 4 * beta ** 2) ** 3 / (E * E * (1 - beta)))
                       / (2 * (1 - beta)), ("beta",), lambda m, beta: 0.5 < beta < 1 and m > 2 * beta,
                       "cross terms a_n b_{-n}, small n", {"beta": 0.75}),
        ThresholdEntry("lm_log_9",
                       lambda m, beta: math.log(4048 * m * m * (m * m - 4 * beta ** 2) ** 2 / (E * E * (1 - beta)))
                       / (2 * (1 - beta)), ("beta",), lambda m, beta: 0.5 < beta < 1 and m > 2 * beta,
                       "cross terms a_{-n} b_n, small n", {"beta": 0.75}),
        ThresholdEntry("lm_log_10",
                       lambda m, beta: math.log(4 * (m * m - 4 * beta ** 2) ** 3 / (1 + beta) ** 2) / (4 * (1 - beta)),
                       ("beta",), lambda m, beta: 0.5 < beta < 1 and m > 2 * beta,
                       "cross terms a_n conj(b_n)", {"beta": 0.75}),
        ThresholdEntry("lm_log_11",
                       lambda m, beta: math.log(4 * (m * m - 4 * (1 - beta) ** 2) * (m * m - 4 * beta ** 2) ** 2
                                                / (1 - beta) ** 2) / (2 * (m + 2 * (1 - beta))),
                       ("beta",), lambda m, beta: 0.5 < beta < 1 and m > 2 * beta,
                       "cross terms a_{-n} conj(b_{-n}), 2 <= n <= m-4", {"beta": 0.75}),
        ThresholdEntry("lm_log_12",
                       lambda m, beta: max(L8 / (4 * beta), L8 / (4 * (m - beta)),
                                           math.log(64 * beta * (m - beta) / (m - 2 * beta) ** 2) / (4 * beta)),
                       ("beta",), lambda m, beta: 0 < beta < m / 2, "a_{+-m}", {"beta": 0.25}),
        ThresholdEntry("lm_log_13",
                       lambda m, beta: max(L8 / (2 * (2 * beta - 1)), L8 / (2 * (2 * m - 1 - 2 * beta)),
                                           math.log(16 * (2 * beta - 1) * (2 * m - 1 - 2 * beta) / (m - 2 * beta) ** 2)
                                           / (2 * (2 * beta - 1))),
                       ("beta",), lambda m, beta: 0.5 < beta < min(1.0, m / 2), "a_{+-(m-1)}", {"beta": 0.75}),
        ThresholdEntry("lm_log_14", lambda m, beta: L4 / (2 * (m - 1 - 2 * beta)), ("beta",),
                       lambda m, beta: 0 < beta < (m - 1) / 2, "a_{+-1}", {"beta": 0.25}),
        ThresholdEntry("lm_log_15", lambda m, beta: math.log(2 * (m + 2 * beta) / m) / (2 * beta), ("beta",),
                       lambda m, beta: beta > 0, "b_{+-m}", {"beta": 0.25}),
        ThresholdEntry("lm_log_15bis", lambda m, beta: math.log(2 * (m + 2 * beta) / m) / (2 * beta), ("beta",),
                       lambda m, beta: beta > 0, "b_{-m} companion bound", {"beta": 0.25}),
        ThresholdEntry("lm_log_16",
                       lambda m, beta: max(math.log(2 * (m + 2 * beta) / (m - 1)) / (2 * m - 1 + 2 * beta),
                                           math.log(2 * (m + 2 * beta) / (m - 1)) / (2 * beta + 1)),
                       ("beta",), lambda m, beta: beta > 0 and m > 1, "b_{+-(m-1)}", {"beta": 0.25}),
        ThresholdEntry("lm_log_17", lambda m, beta: math.log(2 * (m + 2 * beta)) / (m - 1 + 2 * beta), ("beta",),
                       lambda m, beta: beta > 0 and m > 1, "b_{+-1}", {"beta": 0.25}),
        ThresholdEntry("lm_log_18",
                       lambda m: 128 / _f(m) * (4 * (m - 1) ** 2 * (m * m - m + 1) ** 2
                                                / (m * (m ** 4 + 3 * m * m - 2 * m + 2))
                                                + m * (m - 1) ** 4 * (4 * m - 3) ** 2 / (17 * m * m - 18 * m + 5)),
                       (), lambda m: m > _m0(), "a_{+-m} with b_{-+m}"),
        ThresholdEntry("lm_log_19", lambda m: math.log(math.sqrt(2) / (math.sqrt(2) - 1)) / (4 * m), (),
                       lambda m: m > 1, "a_{-m} tail"),
        ThresholdEntry("lm_log_20",
                       lambda m: math.log(64 * m * m * (m - 1) ** 2 * (m * m + 2 * m + 3) ** 2
                                          / (E * E * (17 * m * m - 18 * m + 5) * (m ** 4 + 3 * m * m - 2 * m + 2)))
                       / (2 * (2 * m - 1)), (), lambda m: m > 1, "b_m with a_{-m}"),
        ThresholdEntry("lm_log_21",
                       lambda m: 2 / (m * m * (m - 1) ** 2)
                       * (4 * (m - 1) ** 2 * ((m - 1) ** 2 + 1) + (m * m - 4 * m + 1) ** 2) / _f(m)
                       * (32 * m * (m - 1) ** 2 * (2 * m - 1) ** 2 / (17 * m * m - 18 * m + 5)
                          + 32 * m ** 3 * (3 * m * m - 2 * m + 3) ** 2 / (m ** 4 + 3 * m * m - 2 * m + 2)),
                       (), lambda m: m > _m0(), "b_{-m} closing estimate"),
    ]
    return {e.id: e for e in ents}


THRESHOLDS = _catalog()
LM_LOG_IDS = tuple(f"lm_log_{i}" for i in range(1, 22)) + ("lm_log_15bis",)


def conformal_threshold(id: str, m: float, **params) -> float:
    if id not in THRESHOLDS:
        raise KeyError(f"unknown threshold id {id!r}")
    e = THRESHOLDS[id]
    vals = {k: params.get(k, e.default.get(k)) for k in e.params}
    extra = set(params) - set(e.params)
    if extra:
        raise ValueError(f"unexpected parameters {sorted(extra)} for {id}")
    if not e.valid(m, **vals):
        raise ValueError(f"parameters out of range for {id}: m={m}, {vals}")
    v = e(m, **vals)
    if not math.isfinite(v):
        raise ValueError(f"{id} is not finite at m={m}, {vals}")
    return float(v)


def threshold_max(ids, m, **params) -> float:
    out = 0.0
    for i in ids:
        e = THRESHOLDS[i]
        vals = {k: params[k] for k in e.params if k in params}
        out = max(out, conformal_threshold(i, m, **vals))
    return out
