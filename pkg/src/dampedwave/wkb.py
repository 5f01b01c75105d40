"""Eikonal phases, actions and transport amplitudes for the outer WKB branches.

Conventions: ``mu^2 = 1 + E + iF``, ``h = 1/k``.  The outer branches live on
``[eps, 2pi - eps]`` with phase ``phi' = sqrt(1 + E - W)`` and gauge
``phi(eps) = 0``.  A branch with phase ``s*phi`` (``s = +1`` or ``-1``) has
leading amplitude

    sigma_0 = (phi'(eps) / phi'(z))^(1/2) exp(s * int_eps^z (mu a - F/h) / (2 phi'))

(``phi'(eps)^2 = eps^2 + E`` when eps lies in the exact quadratic region)

so ``sigma_0(eps) = 1``.  The corrections ``sigma_0 * (1 + h c1 + h^2 c2)`` with
``c1' = i (sigma_0''/sigma_0 - V1) / (2 s phi')`` push the pointwise residual of
the conjugated operator to O(h^3) and O(h^4).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import quad, solve_ivp

from .geometry import TWO_PI, DampingProfile, SurfaceProfile

log = logging.getLogger(__name__)

QUAD_TOL = 1e-12
E_TINY = 1e-12


@dataclass(frozen=True)
class SpectralSplit:
    """The decomposition ``mu^2 = 1 + E + iF`` together with h and the gluing point."""

    E: float
    F: float
    h: float
    epsilon: float = 0.3

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("h must be positive")
        if self.epsilon <= 0:
            raise ValueError("gluing point must be positive")

    @property
    def mu(self) -> complex:
        return complex(np.sqrt(1.0 + self.E + 1j * self.F))

    @property
    def tau(self) -> complex:
        return self.mu / self.h

    @property
    def rho(self) -> complex:
        """rho(h) = h/2i - E/2 - iF/2."""
        return self.h / 2j - self.E / 2 - 1j * self.F / 2

    @classmethod
    def from_mu(cls, mu: complex, h: float, epsilon: float = 0.3) -> "SpectralSplit":
        m2 = complex(mu) ** 2
        return cls(E=m2.real - 1.0, F=m2.imag, h=h, epsilon=epsilon)


def _breakpoints(profile: SurfaceProfile, a=None):
    pts = [profile.z_g, profile.z_g + profile.blend]
    if isinstance(a, DampingProfile) and a.kind != "constant":
        pts += [a.z_a, a.z_a + a.w]
    return sorted(p for p in set(pts) if 0 < p < np.pi)


def phase_derivative(z, E: float, profile: Optional[SurfaceProfile] = None):
    """phi'(z) = sqrt(1 + E - W(z)) (nonnegative branch)."""
    profile = profile or SurfaceProfile()
    return np.sqrt(np.maximum(1.0 + E - profile.W(z), 0.0))


def log_ratio(E: float, eps: float) -> float:
    """L = log((eps + sqrt(eps^2 + E))/sqrt(E)) = int_{-eps}^{eps} dz / (2 sqrt(E + z^2))."""
    if E <= 0:
        raise ValueError("log ratio needs E > 0")
    return float(np.arcsinh(eps / np.sqrt(E)))


def action_A(E: float, eps: float) -> float:
    """A(E) = int_{-eps}^{eps} sqrt(E + z^2) dz in closed form."""
    if E <= 0:
        raise ValueError("action A needs E > 0")
    if eps <= 0:
        raise ValueError("action A needs eps > 0")
    r = np.sqrt(eps * eps + E)
    if E < E_TINY:
        return float(eps * r + E * (np.log(2 * eps) - 0.5 * np.log(E)))
    return float(eps * r + E * np.arcsinh(eps / np.sqrt(E)))


def action_A_quad(E: float, eps: float) -> float:
    """Adaptive quadrature of the same integral (oracle)."""
    val, _ = quad(lambda z: np.sqrt(E + z * z), 0.0, eps, epsabs=1e-14, epsrel=1e-14, limit=200)
    return 2.0 * val


def action_B(E: float, profile: Optional[SurfaceProfile] = None) -> float:
    """B(E) = int_0^{2pi} sqrt(1 + E - W(z)) dz."""
    profile = profile or SurfaceProfile()
    if E < 0:
        raise ValueError("action B needs E >= 0")
    f = lambda z: float(phase_derivative(z, E, profile))
    pts = _breakpoints(profile)
    val, _ = quad(f, 0.0, np.pi, points=pts, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=400)
    return 2.0 * val


def action_B_derivative(E: float, profile: Optional[SurfaceProfile] = None) -> float:
    """dB/dE = int_0^{2pi} dz / (2 phi'); the exact region is integrated in closed form."""
    profile = profile or SurfaceProfile()
    return coeff_c0(E, profile.z_g, profile) + log_ratio(E, profile.z_g)


def coeff_c0(E: float, eps: float, profile: Optional[SurfaceProfile] = None) -> float:
    """c0(E) = int_eps^{2pi - eps} dz / (2 phi')."""
    profile = profile or SurfaceProfile()
    if E <= 0:
        raise ValueError("c0 needs E > 0")
    f = lambda z: 1.0 / float(phase_derivative(z, E, profile))
    pts = [p for p in _breakpoints(profile) if p > eps]
    val, _ = quad(f, eps, np.pi, points=pts or None, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=400)
    return val


def coeff_c_full(E: float, eps: float, profile: Optional[SurfaceProfile] = None) -> float:
    """int over the whole period of 1/(2 phi') = c0 + L; grows like |log E|/2."""
    return coeff_c0(E, eps, profile) + log_ratio(E, eps)


def _vanishes_near_zero(a, eps: float) -> bool:
    return bool(np.all(a(np.linspace(-eps, eps, 257)) == 0))


def coeff_c1(a, E: float, profile: Optional[SurfaceProfile] = None, eps: Optional[float] = None) -> float:
    """c1(a, E) = int_0^{2pi} a / (2 phi')."""
    profile = profile or SurfaceProfile()
    if E < 0:
        raise ValueError("c1 needs E >= 0")
    eps = profile.z_g if eps is None else eps
    if not _vanishes_near_zero(a, eps) and E < 1e-3:
        raise ValueError("c1 integrand is singular: damping must vanish on |z| <= eps")
    f = lambda z: float(a(np.array([z]))[0]) / (2.0 * float(phase_derivative(z, E, profile)))
    pts = _breakpoints(profile, a)
    lo = eps if _vanishes_near_zero(a, eps) else 0.0
    val_p, _ = quad(f, lo, np.pi, points=[p for p in pts if p > lo] or None,
                    epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=400)
    val_m, _ = quad(lambda z: f(-z), lo, np.pi, points=[p for p in pts if p > lo] or None,
                    epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=400)
    return val_p + val_m


def sigma_eps(split: SpectralSplit) -> float:
    """Amplitude gained by the leading transport factor across [-eps, eps].

    Integrating ``2 phi' sigma' + (phi'' + F/h) sigma = 0`` with
    ``phi' = sqrt(E + z^2)`` from -eps to eps gives ``exp(-(F/h) L)``.
    """
    if split.F == 0:
        return 1.0
    return float(np.exp(-(split.F / split.h) * log_ratio(split.E, split.epsilon)))


def sigma_eps_ode(split: SpectralSplit) -> float:
    """ODE oracle for :func:`sigma_eps`: integrate the transport equation numerically."""
    E, F, h, eps = split.E, split.F, split.h, split.epsilon

    def rhs(z, y):
        p = np.sqrt(E + z * z)
        p2 = z / p
        return [-(p2 + F / h) / (2 * p) * y[0]]

    sol = solve_ivp(rhs, (-eps, eps), [1.0], method="DOP853", rtol=1e-13, atol=1e-15)
    return float(sol.y[0, -1])


def a_derivs(a, z):
    if hasattr(a, "derivatives"):
        return a.derivatives(z)
    z = np.asarray(z, dtype=float)
    return a(z), 0 * z, 0 * z


_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


def _first_correction_rate(z, split: SpectralSplit, a, profile: SurfaceProfile):
    """p1, p2, g, lead_s and c1_s' for both signs (rows 0: +, 1: -)."""
    W, dW, d2W = profile.potential(z)
    a0, a1, _ = a_derivs(a, z)
    mu, F, h = split.mu, split.F, split.h
    p1 = np.sqrt(1.0 + split.E - W)
    p2 = -dW / (2 * p1)
    p3 = -d2W / (2 * p1) + dW * p2 / (2 * p1**2)
    num = mu * a0 - F / h
    g = num / (2 * p1)
    g1 = mu * a1 / (2 * p1) - num * p2 / (2 * p1**2)
    V1 = profile.subpotential(z)
    lead, dc = [], []
    for s in (1, -1):
        ls = -p2 / (2 * p1) + s * g
        dls = -p3 / (2 * p1) + p2**2 / (2 * p1**2) + s * g1
        lead.append(ls)
        dc.append(1j * (dls + ls**2 - V1) / (2 * s * p1))
    return p1, p2, g, np.array(lead), np.array(dc)


FD_STEP = 1e-3


def _outer_integrands(z, split: SpectralSplit, a, profile: SurfaceProfile, order: int = 2):
    """Integrands along the outer region.

    Returns ``(p1, p2, g, lead, dc1, e2)``: phase rate, phi'', transport rate,
    sigma_0'/sigma_0, c1' and the non-exact part of c2' for both branch signs.
    With ``w = 1 + h c1 + h^2 c2`` the amplitude equation
    ``2 i s phi' w' = h (w'' + 2 lead w' + (sigma_0''/sigma_0 - V1) w)`` gives
    ``c2 = c1^2 / 2 + int e2`` with ``e2 = i (c1'' + 2 lead c1') / (2 s phi')``.
    """
    p1, p2, g, lead, dc = _first_correction_rate(z, split, a, profile)
    if order < 2:
        return p1, p2, g, lead, dc, np.zeros_like(dc)
    d = FD_STEP
    dcp = _first_correction_rate(z + d, split, a, profile)[4]
    dcm = _first_correction_rate(z - d, split, a, profile)[4]
    d2c = (dcp - dcm) / (2 * d)
    sgn = np.array([1.0, -1.0])[:, None]
    e2 = 1j * (d2c + 2 * lead * dc) / (2 * sgn * p1)
    return p1, p2, g, lead, dc, e2


@dataclass
class OuterSolution:
    """WKB branches ``psi_s = sigma_0 (1 + h c1_s + h^2 c2_s) exp(i s phi / h)`` on a grid.

    ``psi`` and ``dpsi`` have shape (2, n): row 0 is the + branch, row 1 the - branch.
    Derivatives are plain d/dz.
    """

    split: SpectralSplit
    z: np.ndarray
    phi: np.ndarray
    G: np.ndarray
    w: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray


def outer_solve(split: SpectralSplit, a, z, profile: Optional[SurfaceProfile] = None,
                order: int = 2) -> OuterSolution:
    """Evaluate both WKB branches at the sorted points ``z`` in [eps, 2pi - eps].

    ``order`` is the number of amplitude corrections kept (0, 1 or 2).  Phase,
    transport exponent and corrections are integrals of explicit functions of
    z, accumulated with 10-point Gauss-Legendre panels on each gap of the grid
    (the grid is prefixed with eps so the gauge is exact).
    """
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    profile = profile or SurfaceProfile()
    eps, h = split.epsilon, split.h
    z = np.asarray(z, dtype=float)
    if np.any(np.diff(z) < 0) or z[0] < eps - 1e-12 or z[-1] > TWO_PI - eps + 1e-12:
        raise ValueError("outer points must be sorted inside [eps, 2pi - eps]")
    knots = np.concatenate([[eps], z])
    lo, hi = knots[:-1], knots[1:]
    # panels no wider than 0.02 keep the quadrature at machine precision
    nsub = np.maximum(1, np.ceil((hi - lo) / 0.02).astype(int))
    owner = np.repeat(np.arange(len(lo)), nsub)
    frac = np.arange(owner.size) - np.repeat(np.cumsum(nsub) - nsub, nsub)
    width = (hi - lo)[owner] / nsub[owner]
    mid = lo[owner] + (frac + 0.5) * width
    half = width / 2
    nodes = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    p1, _, g, _, dc, e2 = _outer_integrands(nodes, split, a, profile, order)
    wts = (half[:, None] * _GL_W[None, :]).ravel()
    acc = lambda f: np.cumsum(_sum_panels(f, wts, owner, len(lo)))
    phi = acc(p1)
    G = acc(g)
    c1 = np.vstack([acc(dc[0]), acc(dc[1])])
    c2 = 0.5 * c1**2 + np.vstack([acc(e2[0]), acc(e2[1])])
    P1, P2, Gd, lead, DC, E2 = _outer_integrands(z, split, a, profile, order)
    if order == 0:
        c1, DC = np.zeros_like(c1), np.zeros_like(DC)
    if order < 2:
        c2, dc2 = np.zeros_like(c2), np.zeros_like(c2)
    else:
        dc2 = c1 * DC + E2
    w = 1 + h * c1 + h * h * c2
    dw = h * DC + h * h * dc2
    psi = np.empty((2, z.size), dtype=complex)
    dpsi = np.empty((2, z.size), dtype=complex)
    pref = float(phase_derivative(eps, split.E, profile)) ** 0.5 * P1**-0.5
    for row, s in enumerate((1, -1)):
        amp = pref * np.exp(s * G)
        wave = np.exp(1j * s * phi / h)
        psi[row] = amp * w[row] * wave
        dpsi[row] = psi[row] * (lead[row] + 1j * s * P1 / h) + amp * dw[row] * wave
    return OuterSolution(split, z, phi, G, w, psi, dpsi)


def _sum_panels(f, wts, owner, nout):
    per_panel = (f * wts).reshape(owner.size, -1).sum(axis=1)
    if np.iscomplexobj(per_panel):
        return (np.bincount(owner, per_panel.real, nout) + 1j * np.bincount(owner, per_panel.imag, nout))
    return np.bincount(owner, per_panel, nout)


def transport_amplitude(z, split: SpectralSplit, a, profile: Optional[SurfaceProfile] = None):
    """Leading amplitude sigma_0 of the + branch at z in [eps, 2pi - eps]."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    order = np.argsort(z)
    out = outer_solve(split, a, z[order], profile, order=0)
    profile = profile or SurfaceProfile()
    pref = (phase_derivative(split.epsilon, split.E, profile) / phase_derivative(z[order], split.E, profile)) ** 0.5
    res = np.empty(z.size, dtype=complex)
    res[order] = pref * np.exp(out.G)
    return res


def transport_amplitude_ode(z_end: float, split: SpectralSplit, a, profile: Optional[SurfaceProfile] = None) -> complex:
    """Integrate ``2 phi' sigma' + (phi'' - mu a + F/h) sigma = 0`` from eps to z_end (oracle)."""
    profile = profile or SurfaceProfile()

    def rhs(z, y):
        p1, p2, g, _, _, _ = _outer_integrands(np.array([z]), split, a, profile, order=0)
        return (-p2[0] / (2 * p1[0]) + g[0]) * y

    sol = solve_ivp(rhs, (split.epsilon, z_end), np.array([1.0 + 0j]), method="DOP853", rtol=1e-12, atol=1e-14)
    return complex(sol.y[0, -1])


def transport_endpoint(split: SpectralSplit, a, profile: Optional[SurfaceProfile] = None) -> complex:
    """sigma_0(2pi - eps) = exp(-c0 F/h + mu c1) in closed form."""
    profile = profile or SurfaceProfile()
    c0 = coeff_c0(split.E, split.epsilon, profile)
    c1 = coeff_c1(a, split.E, profile, eps=split.epsilon)
    return complex(np.exp(-c0 * split.F / split.h + split.mu * c1))


def eikonal_residual(z, E: float, profile: Optional[SurfaceProfile] = None) -> float:
    profile = profile or SurfaceProfile()
    p = phase_derivative(z, E, profile)
    return float(np.max(np.abs(p**2 - (1 + E - profile.W(z)))))


def branch_table(split: SpectralSplit, a, profile: Optional[SurfaceProfile] = None, n: int = 400):
    """Rows (z, phi, Re sigma, Im sigma) of the + branch for CSV export."""
    z = np.linspace(split.epsilon, TWO_PI - split.epsilon, n)
    out = outer_solve(split, a, z, profile, order=0)
    sig = transport_amplitude(z, split, a, profile)
    return np.column_stack([z, out.phi, sig.real, sig.imag])
