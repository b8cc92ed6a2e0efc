"""Differential geometry of parametric surfaces given on planar charts.

An immersion is a map z -> Phi(z) in R^3 or R^4 (complex z, vectorized). All
curvature quantities come from the 2-jet (Phi, Phi_x, Phi_y, Phi_xx, Phi_xy,
Phi_yy), either supplied analytically or built with fourth-order differences.
Integrals over the whole sphere use two stereographic charts, z and w = 1/z,
split along a circle |z| = R.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

DEFAULT_STEP = 1e-3
EXCLUSION_RADIUS = 1e-4
MAX_EXTRAPOLATED_SHARE = 0.01
CONFORMAL_RTOL = 1e-6

_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
_OFFS = np.arange(-2, 3)


@dataclass
class ParametricImmersion:
    dim: int
    func: Callable  # complex array -> real array (dim, *shape)
    jet: Callable | None = None  # complex array -> 6 arrays (dim, *shape)
    singular: tuple = ()
    name: str = ""

    def __post_init__(self):
        if self.dim not in (3, 4):
            raise ValueError("target dimension must be 3 or 4")
        self.singular = tuple(complex(p) for p in self.singular)

    def __call__(self, z):
        return np.asarray(self.func(np.asarray(z, dtype=complex)), dtype=float)

    def distance_to_singular(self, z):
        z = np.asarray(z, dtype=complex)
        if not self.singular:
            return np.full(z.shape, np.inf)
        return np.min([np.abs(z - p) for p in self.singular], axis=0)

    def jets(self, z, h=DEFAULT_STEP):
        """(Phi, Phi_x, Phi_y, Phi_xx, Phi_xy, Phi_yy) at the points z."""
        z = np.asarray(z, dtype=complex)
        if self.jet is not None:
            return tuple(np.asarray(j, dtype=float) for j in self.jet(z))
        hh = h * np.maximum(1.0, np.abs(z))  # step grows with the chart scale
        dist = self.distance_to_singular(z)
        if np.any(2 * hh >= dist):
            raise ValueError("difference stencil reaches the singular set")
        def at(dx, dy):
            return self(z + (dx + 1j * dy) * hh)
        P = self(z)
        X = [at(o, 0) for o in _OFFS]
        Y = [at(0, o) for o in _OFFS]
        px = sum(c * v for c, v in zip(_D1, X)) / hh
        py = sum(c * v for c, v in zip(_D1, Y)) / hh
        pxx = sum(c * v for c, v in zip(_D2, X)) / hh ** 2
        pyy = sum(c * v for c, v in zip(_D2, Y)) / hh ** 2
        pxy = 0.0
        for ci, i in zip(_D1, _OFFS):
            if ci:
                for cj, j in zip(_D1, _OFFS):
                    if cj:
                        pxy = pxy + ci * cj * at(i, j)
        pxy = pxy / hh ** 2
        return P, px, py, pxx, pxy, pyy

    def reparametrize(self, g, dg, d2g, singular=(), name=""):
        """Phi o g for a holomorphic chart change g with derivatives dg, d2g."""
        base = self

        def func(w):
            return base(g(w))

        def jet(w):
            z = g(w)
            P, px, py, pxx, pxy, pyy = base.jets(z)
            v, s = dg(w), d2g(w)

            def d1(u):
                return px * u.real + py * u.imag

            def d2(u, q):
                return pxx * u.real * q.real + pxy * (u.real * q.imag + u.imag * q.real) + pyy * u.imag * q.imag

            iv = 1j * v
            return (P, d1(v), d1(iv), d2(v, v) + d1(s), d2(v, iv) + d1(1j * s), d2(iv, iv) + d1(-s))

        return ParametricImmersion(self.dim, func, jet, singular, name or f"{self.name}-reparam")


def _cplx_to_real(F):
    """(k, *shape) complex -> (2k, *shape) real, C^k = R^2k."""
    F = np.asarray(F)
    return np.concatenate([np.stack([f.real, f.imag]) for f in F])


def holomorphic_curve(F, dF, d2F, singular=(), name="") -> ParametricImmersion:
    """Immersion of a pair of holomorphic functions into C^2 = R^4."""
    def func(z):
        return _cplx_to_real(F(z))

    def jet(z):
        f, f1, f2 = np.asarray(F(z)), np.asarray(dF(z)), np.asarray(d2F(z))
        R = _cplx_to_real
        return R(f), R(f1), R(1j * f1), R(f2), R(1j * f2), R(-f2)

    return ParametricImmersion(4, func, jet, singular, name)


def invert(imm: ParametricImmersion, center=None, name="") -> ParametricImmersion:
    """The inversion X -> (X - c)/|X - c|^2 composed with the immersion."""
    c = np.zeros(imm.dim) if center is None else np.asarray(center, dtype=float)
    cc = c.reshape((-1,) + (1,) * 0)

    def shifted(P):
        return P - cc.reshape((-1,) + (1,) * (P.ndim - 1))

    def func(z):
        X = shifted(imm(z))
        return X / np.sum(X * X, axis=0)

    def jet(z):
        P, px, py, pxx, pxy, pyy = imm.jets(z)
        X = shifted(P)
        n2 = np.sum(X * X, axis=0)

        def dot(a, b):
            return np.sum(a * b, axis=0)

        def d1(V):
            return V / n2 - 2 * X * dot(X, V) / n2 ** 2

        def d2(V, W):
            return (-2 * (dot(X, W) * V + dot(X, V) * W + dot(V, W) * X) / n2 ** 2
                    + 8 * X * dot(X, V) * dot(X, W) / n2 ** 3)

        return (X / n2, d1(px), d1(py), d2(px, px) + d1(pxx), d2(px, py) + d1(pxy), d2(py, py) + d1(pyy))

    return ParametricImmersion(imm.dim, func, jet, imm.singular, name or f"inverted-{imm.name}")


# --------------------------------------------------------------------------
# pointwise geometry


@dataclass
class GeometrySample:
    metric: np.ndarray
    conformal_factor: float | None  # e^{2 lambda} when the chart is conformal
    H: np.ndarray
    K: float
    A_norm: float
    K_gauss: float

    @property
    def H_norm(self) -> float:
        return float(np.linalg.norm(self.H))

    def gauss_check(self, tol=1e-6) -> bool:
        """|A|^2 >= 2|H|^2 - 2K up to tol (relative to the curvature scale)."""
        scale = max(self.A_norm ** 2, abs(self.K), 1.0)
        return self.A_norm ** 2 >= 2 * self.H_norm ** 2 - 2 * self.K - tol * scale


def _forms(P, px, py, pxx, pxy, pyy):
    """Vectorized first and second fundamental data: (det g, H, K, |A|^2)."""
    def dot(a, b):
        return np.sum(a * b, axis=0)

    g11, g12, g22 = dot(px, px), dot(px, py), dot(py, py)
    det = g11 * g22 - g12 ** 2
    i11, i12, i22 = g22 / det, -g12 / det, g11 / det

    def normal(V):
        a, b = dot(V, px), dot(V, py)
        return V - (i11 * a + i12 * b) * px - (i12 * a + i22 * b) * py

    A11, A12, A22 = normal(pxx), normal(pxy), normal(pyy)
    H = 0.5 * (i11 * A11 + 2 * i12 * A12 + i22 * A22)
    K = (dot(A11, A22) - dot(A12, A12)) / det
    # |A|^2 = g^{ik} g^{jl} A_ij . A_kl
    inv = ((i11, i12), (i12, i22))
    A = ((A11, A12), (A12, A22))
    A2 = 0.0
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for l in range(2):
                    A2 = A2 + inv[i][k] * inv[j][l] * dot(A[i][j], A[k][l])
    return det, H, K, A2, (g11, g12, g22)


def immersion_geometry(imm: ParametricImmersion, point, h: float = DEFAULT_STEP) -> GeometrySample:
    z = complex(*point) if isinstance(point, (tuple, list, np.ndarray)) else complex(point)
    reach = 2 * h * max(1.0, abs(z))
    if imm.distance_to_singular(np.array([z]))[0] <= 2 * reach:
        raise ValueError("point or stencil hits the singular set")
    jets = imm.jets(np.array([z]), h)
    det, H, Kg, A2, (g11, g12, g22) = _forms(*jets)
    if not det[0] > 1e-300 * max(g11[0], 1.0) ** 2 or not np.isfinite(det[0]):
        raise ValueError("degenerate metric")
    metric = np.array([[g11[0], g12[0]], [g12[0], g22[0]]])
    conformal = abs(g11[0] - g22[0]) + 2 * abs(g12[0]) <= CONFORMAL_RTOL * (g11[0] + g22[0])
    if conformal:
        # Liouville: K = -e^{-2 lambda} Delta lambda with lambda = log(sqrt det g) / 2
        H_step = 2 * h * max(1.0, abs(z))
        pts = np.array([z + o * H_step for o in _OFFS] + [z + 1j * o * H_step for o in _OFFS])
        dets = _forms(*imm.jets(pts, h))[0]
        lam = 0.25 * np.log(dets)
        lap = (np.dot(_D2, lam[:5]) + np.dot(_D2, lam[5:])) / H_step ** 2
        e2l = math.sqrt(det[0])
        K = float(-lap / e2l)
        factor = e2l
    else:
        K = float(Kg[0])
        factor = None
    return GeometrySample(metric, factor, H[:, 0], K, float(math.sqrt(max(A2[0], 0.0))), float(Kg[0]))


# --------------------------------------------------------------------------
# integrals over the sphere


@dataclass
class SurfaceIntegral:
    value: float
    est_error: float
    mesh_cells: int
    extrapolated_share: float
    flags: list = field(default_factory=list)


def _chart_radius(singular):
    """Split radius keeping singular points away from the seam."""
    for R in (1.0, 2.0, 0.5, 3.0, 1 / 3, 1.5, 2 / 3):
        if all(abs(abs(p) - R) > 0.1 * R for p in singular):
            return R
    return 1.0


def _disk_nodes(R, n_r, n_t):
    x, w = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * R * (x + 1)
    wr = 0.5 * R * w * r
    th = 2 * np.pi * (np.arange(n_t) + 0.5) / n_t
    z = (r[:, None] * np.exp(1j * th[None, :])).ravel()
    wt = (wr[:, None] * np.full(n_t, 2 * np.pi / n_t)[None, :]).ravel()
    return z, wt


def _density(kind, jets):
    det, H, K, A2, _ = _forms(*jets)
    area = np.sqrt(det)
    if kind == "willmore":
        return np.sum(H * H, axis=0) * area
    if kind == "curvature":
        return K * area
    raise ValueError(kind)


def _chart_integral(imm, kind, R, n_r, n_t, eps):
    z, wt = _disk_nodes(R, n_r, n_t)
    dist = imm.distance_to_singular(z)
    near = dist < eps
    zq = z.copy()
    if np.any(near):
        # move excluded nodes radially onto the exclusion circle of the nearest point
        sing = np.array(imm.singular)
        idx = np.argmin(np.abs(z[near][:, None] - sing[None, :]), axis=1)
        p = sing[idx]
        d = z[near] - p
        d = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1.0), 1.0)
        zq[near] = p + eps * d
    f = _density(kind, imm.jets(zq))
    if not np.all(np.isfinite(f)):
        raise ArithmeticError("non-finite curvature density")
    total = float(np.sum(wt * f))
    extra = float(np.sum(np.abs(wt[near] * f[near])))
    return total, extra, len(z)


def sphere_integral(imm: ParametricImmersion, kind: str, nodes=(160, 192), eps: float = EXCLUSION_RADIUS,
                    radius: float | None = None) -> SurfaceIntegral:
    """Integral of a curvature density over the chart plane plus the point at infinity."""
    R = radius or _chart_radius(imm.singular)
    inner_sing = tuple(1 / p for p in imm.singular if p != 0) + (0j,)
    outer = imm.reparametrize(lambda w: 1 / w, lambda w: -1 / w ** 2, lambda w: 2 / w ** 3,
                              singular=inner_sing, name=f"{imm.name}-at-infinity")

    def run(n_r, n_t):
        a = _chart_integral(imm, kind, R, n_r, n_t, eps)
        b = _chart_integral(outer, kind, 1 / R, n_r, n_t, eps)
        return a[0] + b[0], a[1] + b[1], a[2] + b[2]

    n_r, n_t = nodes
    fine, extra, cells = run(n_r, n_t)
    coarse = run(n_r // 2, n_t // 2)[0]
    err = abs(fine - coarse)
    share = extra / max(abs(fine), 1e-300) if extra else 0.0
    flags = []
    if share > MAX_EXTRAPOLATED_SHARE:
        flags.append("extrapolated-share-above-1%")
    if err > 0.05 * max(abs(fine), 1.0):
        flags.append("refinement-not-converged")
    return SurfaceIntegral(fine, err, cells, share, flags)


def willmore_energy(imm: ParametricImmersion, nodes=(160, 192), eps: float = EXCLUSION_RADIUS) -> SurfaceIntegral:
    """Integral of |H|^2 over the surface."""
    return sphere_integral(imm, "willmore", nodes, eps)


def total_curvature(imm: ParametricImmersion, nodes=(160, 192), eps: float = EXCLUSION_RADIUS) -> SurfaceIntegral:
    """Integral of the Gauss curvature over the surface."""
    return sphere_integral(imm, "curvature", nodes, eps)


# --------------------------------------------------------------------------
# examples


def f_mu_poles(mu: float):
    return (complex(mu), 1j * mu) if mu > 0 else (0j,)


def f_mu_family(mu: float, z):
    """F_mu(z) = (1/(z^2 - (1+i) mu z + i mu^2), z)."""
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    z = complex(z)
    q = z * z - (1 + 1j) * mu * z + 1j * mu * mu
    if q == 0:
        raise ValueError("z is a pole of F_mu")
    return (1 / q, z)


def inverted_point(F):
    F = np.asarray(F, dtype=complex)
    n2 = float(np.sum(np.abs(F) ** 2))
    if n2 == 0:
        raise ValueError("cannot invert the origin")
    return tuple(F / n2)


def f_mu_immersion(mu: float) -> ParametricImmersion:
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    c1, c0 = -(1 + 1j) * mu, 1j * mu * mu

    def F(z):
        q = z * z + c1 * z + c0
        return np.stack([1 / q, z])

    def dF(z):
        q, dq = z * z + c1 * z + c0, 2 * z + c1
        return np.stack([-dq / q ** 2, np.ones_like(z)])

    def d2F(z):
        q, dq = z * z + c1 * z + c0, 2 * z + c1
        return np.stack([(2 * dq ** 2 - 2 * q) / q ** 3, np.zeros_like(z)])

    return holomorphic_curve(F, dF, d2F, f_mu_poles(mu), name=f"fmu({mu:g})")


def sphere_chart(radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> ParametricImmersion:
    """Inverse stereographic projection onto a round sphere in R^3 (difference jets)."""
    c = np.asarray(center, dtype=float)

    def func(z):
        x, y, s = z.real, z.imag, np.abs(z) ** 2
        P = np.stack([2 * x, 2 * y, s - 1]) / (1 + s)
        return radius * P + c.reshape((3,) + (1,) * z.ndim)

    return ParametricImmersion(3, func, None, (), f"sphere({radius:g})")


def plane_chart() -> ParametricImmersion:
    def func(z):
        return np.stack([z.real, z.imag, np.zeros(z.shape)])

    return ParametricImmersion(3, func, None, (), "plane")


def graph_chart() -> ParametricImmersion:
    """z -> (z, z^2) in C^2."""
    return holomorphic_curve(lambda z: np.stack([z, z * z]), lambda z: np.stack([np.ones_like(z), 2 * z]),
                             lambda z: np.stack([np.zeros_like(z), 2 * np.ones_like(z)]), (), "graph")


def dilate(imm: ParametricImmersion, s: float) -> ParametricImmersion:
    jet = None if imm.jet is None else (lambda z: tuple(s * j for j in imm.jets(z)))
    return ParametricImmersion(imm.dim, lambda z: s * imm(z), jet, imm.singular, f"{s:g}*{imm.name}")


def fmu_report(mu: float, nodes=(160, 192)) -> dict:
    """Energy of the inverted surface and total curvature of F_mu itself."""
    imm = f_mu_immersion(mu)
    W = willmore_energy(invert(imm), nodes)
    K = total_curvature(imm, nodes)
    return {
        "family": "fmu",
        "mu": float(mu),
        "energy": W.value,
        "total_curvature": K.value,
        "mesh_cells": W.mesh_cells,
        "est_error": max(W.est_error, K.est_error),
        "flags": sorted(set(W.flags) | set(K.flags)),
    }
