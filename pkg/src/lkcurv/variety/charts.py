"""Chart parameterizations of strata.

A chart is a smooth map from an open set of R^m into R^N with first and
second derivatives.  All callbacks are vectorized over a leading sample axis:
``u`` has shape (P, m), the map returns (P, N), the Jacobian (P, N, m) and the
Hessian (P, m, m, N).

Besides derivatives a chart knows how its image radius |phi(u)| relates to
the parameter radius |u|.  That lets the integrators draw parameter points
whose images fall in a prescribed ambient annulus, and lets the boundary code
find the preimage of a sphere along parameter rays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from ..errors import ChartDegeneracyError, DomainError, SolverError
from ..mathkit import ball_volume, uniform_sphere

EPS = np.finfo(float).eps
FD_STEP = EPS ** (1.0 / 3.0)
FD2_STEP = EPS ** (1.0 / 4.0)


# --------------------------------------------------------------------------
# radial behaviour


@dataclass(frozen=True)
class Homogeneous:
    """|phi(rho theta)| = rho^degree * c(theta) with c in [c_lo, c_hi]."""

    degree: float
    c_lo: float
    c_hi: float


@dataclass(frozen=True)
class Radial:
    """|phi(u)| = profile(|u|), increasing; ``inverse`` maps radius to |u|."""

    profile: Callable[[np.ndarray], np.ndarray]
    inverse: Optional[Callable[[float], float]] = None
    rho_max: float = 1e6

    def invert(self, r: float) -> float:
        if r <= 0:
            return 0.0
        if self.inverse is not None:
            return float(self.inverse(r))
        hi = 1.0
        while float(self.profile(np.array([hi]))[0]) < r:
            hi *= 2.0
            if hi > self.rho_max:
                raise DomainError(f"radius {r} beyond the chart range")
        return brentq(lambda t: float(self.profile(np.array([t]))[0]) - r, 0.0, hi, xtol=1e-15, rtol=1e-14)


@dataclass(frozen=True)
class Bounded:
    """Only bounds are known: |u| in [lo(r_lo), hi(r_hi)] covers the annulus."""

    lo: Callable[[float], float]
    hi: Callable[[float], float]
    # |phi| increases along every parameter ray, so shells can be cut per ray
    monotone: bool = False


def _fd_jacobian(f, u):
    u = np.asarray(u, dtype=float)
    P, m = u.shape
    h = FD_STEP * (1.0 + np.abs(u))
    cols = []
    for a in range(m):
        e = np.zeros_like(u)
        e[:, a] = h[:, a]
        cols.append((f(u + e) - f(u - e)) / (2 * h[:, a : a + 1]))
    return np.stack(cols, axis=2)


def _fd_hessian_from_jac(jac, u):
    u = np.asarray(u, dtype=float)
    P, m = u.shape
    h = FD_STEP * (1.0 + np.abs(u))
    out = None
    for a in range(m):
        e = np.zeros_like(u)
        e[:, a] = h[:, a]
        d = (jac(u + e) - jac(u - e)) / (2 * h[:, a, None, None])  # (P, N, m): d/du_a of J[:, :, b]
        if out is None:
            out = np.zeros((P, m, m, d.shape[1]))
        out[:, a, :, :] = np.swapaxes(d, 1, 2)
    return 0.5 * (out + np.swapaxes(out, 1, 2))


def _fd_hessian_from_map(f, u, scale: float = 1.0):
    u = np.asarray(u, dtype=float)
    P, m = u.shape
    h = scale * FD2_STEP * (1.0 + np.abs(u))
    f0 = f(u)
    out = np.zeros((P, m, m, f0.shape[1]))
    for a in range(m):
        ea = np.zeros_like(u)
        ea[:, a] = h[:, a]
        out[:, a, a] = (f(u + ea) - 2 * f0 + f(u - ea)) / h[:, a, None] ** 2
        for b in range(a + 1, m):
            eb = np.zeros_like(u)
            eb[:, b] = h[:, b]
            v = (f(u + ea + eb) - f(u + ea - eb) - f(u - ea + eb) + f(u - ea - eb)) / (4 * h[:, a, None] * h[:, b, None])
            out[:, a, b] = v
            out[:, b, a] = v
    return out


# --------------------------------------------------------------------------
# charts


@dataclass(frozen=True)
class Chart:
    intrinsic_dim: int
    ambient_dim: int
    map: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    radial: object = None
    sheet_count: int = 1
    contains: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""
    # every parameter, inside ``contains`` or not, maps into the stratum closure
    maps_into_closure: bool = False

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, u) -> np.ndarray:
        return self.map(np.atleast_2d(np.asarray(u, dtype=float)))

    def jac(self, u) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if self.jacobian is not None:
            return self.jacobian(u)
        return _fd_jacobian(self.map, u)

    def hess(self, u) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if self.hessian is not None:
            return self.hessian(u)
        if self.jacobian is not None:
            return _fd_hessian_from_jac(self.jacobian, u)
        return _fd_hessian_from_map(self.map, u)

    def fd_jac(self, u) -> np.ndarray:
        return _fd_jacobian(self.map, np.atleast_2d(np.asarray(u, dtype=float)))

    def fd_hess(self, u, richardson: bool = True):
        """Second differences of the map; with ``richardson`` also a smoothness flag.

        The Richardson combination of steps h and h/2 is returned together
        with a mask of points where the two steps agree.  A stencil that
        straddles a branch cut of the chart fails that test.
        """
        u = np.atleast_2d(np.asarray(u, dtype=float))
        d1 = _fd_hessian_from_map(self.map, u, 1.0)
        if not richardson:
            return d1
        d2 = _fd_hessian_from_map(self.map, u, 0.5)
        gap = np.abs(d1 - d2).max(axis=(1, 2, 3)) / (1 + np.abs(d2).max(axis=(1, 2, 3)))
        return (4 * d2 - d1) / 3, gap < 1e-2

    def in_domain(self, u) -> np.ndarray:
        u = np.atleast_2d(u)
        if self.contains is None:
            return np.ones(len(u), dtype=bool)
        return np.asarray(self.contains(u), dtype=bool)

    @property
    def has_analytic_derivatives(self) -> bool:
        return self.jacobian is not None

    # -- radial structure -------------------------------------------------

    def param_annulus(self, r_lo: float, r_hi: float) -> tuple[float, float]:
        """Parameter radii [rho_lo, rho_hi] whose shell covers r_lo <= |phi| <= r_hi."""
        rad = self.radial
        if isinstance(rad, Homogeneous):
            lo = (r_lo / rad.c_hi) ** (1.0 / rad.degree) if r_lo > 0 else 0.0
            hi = (r_hi / rad.c_lo) ** (1.0 / rad.degree)
        elif isinstance(rad, Radial):
            lo, hi = rad.invert(r_lo), rad.invert(r_hi)
        elif isinstance(rad, Bounded):
            lo, hi = (rad.lo(r_lo) if r_lo > 0 else 0.0), rad.hi(r_hi)
        else:
            raise DomainError(f"chart {self.name!r} has no radial description")
        return max(0.0, lo), hi

    @property
    def sample_dim(self) -> int:
        m = self.intrinsic_dim
        return 2 if m == 1 else (m if m <= 4 else m + 1)

    def sample(self, z: np.ndarray, r_lo: float, r_hi: float) -> tuple[np.ndarray, np.ndarray]:
        """Points uniform in the parameter shell and their weights.

        ``z`` holds uniforms of shape (P, sample_dim).  The weight of every
        point is the shell volume, so ``mean(w * f)`` estimates the parameter
        integral of f over the shell.
        """
        m = self.intrinsic_dim
        theta = uniform_sphere(z[:, 1:], m - 1) if m > 1 else np.where(z[:, 1:2] < 0.5, -1.0, 1.0)
        if isinstance(self.radial, Homogeneous):
            # the shell is exact along each ray, so only the direction is random
            c = np.maximum(np.linalg.norm(self.map(theta), axis=1), 1e-300)
            lo = (r_lo / c) ** (1.0 / self.radial.degree)
            hi = (r_hi / c) ** (1.0 / self.radial.degree)
        elif isinstance(self.radial, Bounded) and self.radial.monotone:
            lo, hi = self._ray_shell(theta, r_lo, r_hi)
        else:
            lo, hi = self.param_annulus(r_lo, r_hi)
        vol = ball_volume(m) * (hi**m - lo**m)
        rho = (lo**m + z[:, 0] * (hi**m - lo**m)) ** (1.0 / m)
        return rho[:, None] * theta, np.broadcast_to(vol, (len(z),)).astype(float)

    def _ray_shell(self, theta, r_lo, r_hi):
        plo, phi = self.param_annulus(r_lo, r_hi)
        n = len(theta)
        hi = _bisect_radius(self.map, theta, r_hi, np.zeros(n), np.full(n, phi))
        lo = np.zeros(n) if r_lo <= 0 else _bisect_radius(self.map, theta, r_lo, np.zeros(n), np.full(n, phi))
        # rays that leave the bracket keep the coarse bounds; points are masked later
        bad = ~(np.isfinite(lo) & np.isfinite(hi))
        return np.where(bad, plo, lo), np.where(bad, phi, hi)

    def radial_solve(self, theta: np.ndarray, eps: float) -> np.ndarray:
        """rho with |phi(rho theta)| = eps for unit parameter directions theta."""
        theta = np.atleast_2d(theta)
        rad = self.radial
        if isinstance(rad, Homogeneous):
            c = np.linalg.norm(self.map(theta), axis=1)
            rho = (eps / c) ** (1.0 / rad.degree)
        elif isinstance(rad, Radial):
            rho = np.full(len(theta), rad.invert(eps))
        elif isinstance(rad, Bounded):
            lo = np.full(len(theta), rad.lo(eps))
            hi = np.full(len(theta), rad.hi(eps))
            rho = _bisect_radius(self.map, theta, eps, lo, hi)
        else:
            raise DomainError(f"chart {self.name!r} has no radial description")
        if self.contains is not None:
            ok = self.in_domain(rho[:, None] * theta)
            rho = np.where(ok, rho, np.nan)
        return rho


def _bisect_radius(f, theta, eps, lo, hi, iters: int = 80):
    g_hi = np.linalg.norm(f(hi[:, None] * theta), axis=1) - eps
    g_lo = np.linalg.norm(f(lo[:, None] * theta), axis=1) - eps
    bad = (g_lo > 0) | (g_hi < 0)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        g = np.linalg.norm(f(mid[:, None] * theta), axis=1) - eps
        lo = np.where(g < 0, mid, lo)
        hi = np.where(g < 0, hi, mid)
    rho = 0.5 * (lo + hi)
    return np.where(bad, np.nan, rho)


# --------------------------------------------------------------------------
# builders


def gram_sqrt_det(J: np.ndarray) -> np.ndarray:
    G = np.swapaxes(J, -1, -2) @ J
    return np.sqrt(np.clip(np.linalg.det(G), 0.0, None))


def linear_chart(A, name: str = "", radial=None) -> Chart:
    """u -> A u for an N x m matrix A of full column rank."""
    A = np.asarray(A, dtype=float)
    N, m = A.shape
    sv = np.linalg.svd(A, compute_uv=False)
    if sv.min() <= 1e-12 * sv.max():
        raise ChartDegeneracyError("linear chart matrix is rank deficient")
    return Chart(
        m,
        N,
        map=lambda u: u @ A.T,
        jacobian=lambda u: np.broadcast_to(A, (len(u), N, m)).copy(),
        hessian=lambda u: np.zeros((len(u), m, m, N)),
        radial=radial or Homogeneous(1.0, float(sv.min()), float(sv.max())),
        name=name,
    )


def complex_to_real_jacobian(dF: np.ndarray) -> np.ndarray:
    """(P, n, k) complex derivative -> (P, 2n, 2k) real Jacobian."""
    P, n, k = dF.shape
    J = np.empty((P, 2 * n, 2 * k))
    J[:, 0::2, 0::2] = dF.real
    J[:, 0::2, 1::2] = -dF.imag
    J[:, 1::2, 0::2] = dF.imag
    J[:, 1::2, 1::2] = dF.real
    return J


def complex_to_real_hessian(d2F: np.ndarray) -> np.ndarray:
    """(P, k, k, n) complex second derivative -> (P, 2k, 2k, 2n) real Hessian."""
    P, k, _, n = d2F.shape
    H = np.empty((P, 2 * k, 2 * k, 2 * n))
    blocks = {(0, 0): d2F, (0, 1): 1j * d2F, (1, 0): 1j * d2F, (1, 1): -d2F}
    for (s, t), B in blocks.items():
        H[:, s::2, t::2, 0::2] = B.real
        H[:, s::2, t::2, 1::2] = B.imag
    return H


def to_complex(u: np.ndarray) -> np.ndarray:
    return u[:, 0::2] + 1j * u[:, 1::2]


def to_real(w: np.ndarray) -> np.ndarray:
    out = np.empty(w.shape[:-1] + (2 * w.shape[-1],))
    out[..., 0::2] = w.real
    out[..., 1::2] = w.imag
    return out


def holomorphic_chart(
    f, df, d2f, k: int, n: int, name: str = "", radial=None, sheet_count: int = 1, contains=None, maps_into_closure: bool = False
) -> Chart:
    """Real chart of a holomorphic map C^k -> C^n.

    ``f(z)`` returns (P, n), ``df(z)`` (P, n, k) and ``d2f(z)`` (P, k, k, n),
    all complex.  Real coordinates interleave real and imaginary parts.
    """
    return Chart(
        2 * k,
        2 * n,
        map=lambda u: to_real(f(to_complex(u))),
        jacobian=lambda u: complex_to_real_jacobian(df(to_complex(u))),
        hessian=lambda u: complex_to_real_hessian(d2f(to_complex(u))),
        radial=radial,
        sheet_count=sheet_count,
        contains=contains,
        maps_into_closure=maps_into_closure,
        name=name,
    )


@dataclass(frozen=True)
class ImplicitChart:
    """Chart on {F = 0} using a subset of coordinates as parameters.

    ``F`` maps (P, N) -> (P, N - m); ``dF`` gives (P, N - m, N) and ``d2F``
    (P, N - m, N, N).  ``free`` lists the m parameter coordinates; the others
    are solved by Newton from ``seed(u)`` (default: zeros).
    """

    F: Callable
    dF: Callable
    d2F: Callable
    free: tuple[int, ...]
    ambient_dim: int
    seed: Optional[Callable] = None
    tol: float = 1e-13
    max_iter: int = 60

    @property
    def bound(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.ambient_dim) if i not in self.free)

    def _assemble(self, u, w):
        x = np.zeros((len(u), self.ambient_dim))
        x[:, list(self.free)] = u
        x[:, list(self.bound)] = w
        return x

    def solve(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(u)
        bound = list(self.bound)
        w = self.seed(u) if self.seed is not None else np.zeros((len(u), len(bound)))
        w = np.array(w, dtype=float)
        for _ in range(self.max_iter):
            x = self._assemble(u, w)
            r = self.F(x)
            if np.all(np.abs(r) <= self.tol * (1 + np.abs(x).max(axis=1, keepdims=True))):
                return x
            Fw = self.dF(x)[:, :, bound]
            w = w - np.linalg.solve(Fw, r[..., None])[..., 0]
        x = self._assemble(u, w)
        if np.max(np.abs(self.F(x))) > 1e-9:
            raise SolverError("implicit chart Newton solve did not converge")
        return x

    def derivatives(self, u):
        x = self.solve(u)
        free, bound = list(self.free), list(self.bound)
        D = self.dF(x)
        D2 = self.d2F(x)
        Fw = D[:, :, bound]
        Fu = D[:, :, free]
        Fw_inv = np.linalg.inv(Fw)
        dw = -Fw_inv @ Fu  # (P, b, m)
        P, m = u.shape
        N = self.ambient_dim
        J = np.zeros((P, N, m))
        J[:, free, :] = np.eye(m)
        J[:, bound, :] = dw
        # second derivative of F along the curve u -> x(u), then solve for w''
        T = np.einsum("prij,pia,pjb->prab", D2, J, J)  # full second derivative minus F_w w''
        d2w = -np.einsum("pqr,prab->pabq", Fw_inv, T)
        H = np.zeros((P, m, m, N))
        H[:, :, :, bound] = d2w
        return x, J, H

    def chart(self, name: str = "", radial=None, contains=None, sheet_count: int = 1) -> Chart:
        m = len(self.free)
        return Chart(
            m,
            self.ambient_dim,
            map=self.solve,
            jacobian=lambda u: self.derivatives(u)[1],
            hessian=lambda u: self.derivatives(u)[2],
            radial=radial,
            sheet_count=sheet_count,
            contains=contains,
            name=name,
        )
