"""Global quasimodes on the circle from an exact inner solve and outer WKB branches.

Construction for a given ``mu``:

1. Solve ``-h^2 psi'' + (W + h^2 V1 - mu^2) psi = 0`` on ``[0, eps]`` for the
   even and odd solutions ``psi_e``, ``psi_o`` (damping vanishes there).
2. Match ``psi_e`` at ``z = eps`` (value and derivative) to a combination of
   the two outer WKB branches and carry it to ``2pi - eps``.
3. Re-express the result there as ``c_e psi_e(z - 2pi) + c_o psi_o(z - 2pi)``.
   A periodic even eigenfunction has ``c_o = 0`` and ``c_e = 1``.
4. Glue the copies at 0 and 2pi with a smooth partition ``chi``.

The quasi-eigenvalue is refined by a complex secant iteration on ``c_o(mu) = 0``
started from the Bohr-Sommerfeld value.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import newton

from .geometry import TWO_PI, SurfaceProfile, smoothstep
from .quantize import QuasiEigenvalue, quasi_eigenvalue
from .wkb import SpectralSplit, action_B_derivative, outer_solve

log = logging.getLogger(__name__)


class MatchingError(RuntimeError):
    pass


class ResolutionError(ValueError):
    pass


class PartitionError(RuntimeError):
    pass


def _inner_rhs(h: float, mu: complex, profile: SurfaceProfile):
    inv_h2 = 1.0 / (h * h)
    mu2 = mu * mu

    def rhs(z, y):
        W, V1 = profile.scalar_W_V1(z)
        return np.array([y[1], (W + h * h * V1 - mu2) * inv_h2 * y[0]])

    return rhs


@dataclass
class InnerSolution:
    """Even or odd solution on ``[0, span]``; derivatives are d/dz."""

    parity: int
    h: float
    mu: complex
    span: float
    sol: object

    def end(self):
        return self.sol.y[0, -1], self.sol.y[1, -1]

    def sample(self, z):
        """Values and derivatives at |z| <= span, extended by parity."""
        z = np.asarray(z, dtype=float)
        y = self.sol.sol(np.abs(z))
        sgn = np.where(z < 0, -1.0, 1.0)
        if self.parity == 0:
            return y[0], y[1] * sgn
        return y[0] * sgn, y[1]


def inner_solve(split: SpectralSplit, parity: int = 0, profile: Optional[SurfaceProfile] = None,
                span: Optional[float] = None, rtol: float = 1e-12) -> InnerSolution:
    """Integrate the full undamped inner equation from z = 0 with even
    (psi=1, psi'=0) or odd (psi=0, h psi'=1) data.

    The potential is ``W + h^2 V1``; the caller guarantees that the damping
    vanishes on ``[0, span]``.
    """
    profile = profile or SurfaceProfile()
    span = split.epsilon if span is None else span
    h, mu = split.h, split.mu
    rhs = _inner_rhs(h, mu, profile)
    y0 = np.array([1.0, 0.0], dtype=complex) if parity == 0 else np.array([0.0, 1.0 / h], dtype=complex)
    sol = solve_ivp(rhs, (0.0, span), y0, method="DOP853", rtol=rtol, atol=1e-14 * max(1.0, 1 / h),
                    dense_output=True)
    if not sol.success:
        raise RuntimeError(f"inner integration failed (h={h}, E={split.E}): {sol.message}")
    return InnerSolution(parity, h, mu, span, sol)


@dataclass
class GluedMode:
    """Matched data for one value of mu."""

    split: SpectralSplit
    alpha: np.ndarray          # outer branch coefficients
    c_e: complex
    c_o: complex
    cond: float
    inner_e: InnerSolution
    inner_o: InnerSolution
    a: object
    profile: SurfaceProfile
    order: int = 2

    def wrap_inner(self, s):
        """c_e psi_e(s) + c_o psi_o(s) and its derivative, s = z - 2pi in [-eps, eps]."""
        ve, de = self.inner_e.sample(s)
        vo, do = self.inner_o.sample(s)
        return self.c_e * ve + self.c_o * vo, self.c_e * de + self.c_o * do

    def outer(self, z):
        out = outer_solve(self.split, self.a, z, self.profile, order=self.order)
        return self.alpha @ out.psi, self.alpha @ out.dpsi

    def mismatch(self, n: int = 257):
        """max over [0, eps] of |v(z+2pi) - v(z)| and of h |d(v(z+2pi) - v(z))|."""
        s = np.linspace(0, self.split.epsilon, n)
        ve, de = self.inner_e.sample(s)
        w, dw = self.wrap_inner(s)
        return float(np.max(np.abs(w - ve))), float(self.split.h * np.max(np.abs(dw - de)))


def glue_and_extend(split: SpectralSplit, a, profile: Optional[SurfaceProfile] = None,
                    order: int = 2, max_cond: float = 1e8) -> GluedMode:
    """Match the even inner solution to the outer branches at eps and re-match at 2pi - eps."""
    profile = profile or SurfaceProfile()
    eps = split.epsilon
    if not np.all(a(np.linspace(-eps, eps, 513)) == 0):
        raise ValueError("damping must vanish on the inner region |z| <= eps")
    ie = inner_solve(split, 0, profile)
    io = inner_solve(split, 1, profile)
    pe, de = ie.end()
    po, do = io.end()
    out = outer_solve(split, a, np.array([eps, TWO_PI - eps]), profile, order=order)
    M = np.array([out.psi[:, 0], out.dpsi[:, 0]])
    cond = float(np.linalg.cond(M * np.array([[1.0], [split.h]])))
    if cond > max_cond:
        raise MatchingError(f"degenerate matching at eps={eps} (cond {cond:.3g})")
    alpha = np.linalg.solve(M, np.array([pe, de]))
    val, dval = alpha @ out.psi[:, 1], alpha @ out.dpsi[:, 1]
    # psi_e(-eps) = pe, psi_e'(-eps) = -de; psi_o(-eps) = -po, psi_o'(-eps) = do
    N = np.array([[pe, -po], [-de, do]])
    c_e, c_o = np.linalg.solve(N, np.array([val, dval]))
    return GluedMode(split, alpha, complex(c_e), complex(c_o), cond, ie, io, a, profile, order)


def refine_mu(h: float, a, mu0: complex, profile: Optional[SurfaceProfile] = None, eps: float = 0.3,
              tol: float = 1e-14, maxiter: int = 60) -> complex:
    """Complex secant iteration on c_o(mu) = 0 from mu0, rejecting antiperiodic roots."""
    profile = profile or SurfaceProfile()
    f = lambda mu: glue_and_extend(SpectralSplit.from_mu(mu, h, eps), a, profile).c_o
    mu = complex(newton(f, complex(mu0), x1=complex(mu0) * (1 + 1e-4), tol=tol, maxiter=maxiter))
    g = glue_and_extend(SpectralSplit.from_mu(mu, h, eps), a, profile)
    if g.c_e.real < 0:
        raise MatchingError(f"secant converged to an antiperiodic root at mu={mu}")
    return mu


def chi(z, eps: float):
    """Cutoff: 0 at z <= 0, smooth rise on [0, eps], 1 on [eps, 2pi], 1 - chi(z - 2pi) beyond."""
    z = np.asarray(z, dtype=float)
    rise = smoothstep(z / eps)[0]
    fall = 1.0 - smoothstep((z - TWO_PI) / eps)[0]
    return np.where(z <= TWO_PI, rise, fall)


@dataclass
class Quasimode:
    z: np.ndarray
    u: np.ndarray
    h: float
    mu: complex
    residual_L2: float = float("nan")
    mismatch_value: float = float("nan")
    mismatch_deriv: float = float("nan")
    c_e: complex = 1.0
    c_o: complex = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return int(round(1.0 / self.h))

    @property
    def tau(self) -> complex:
        return self.mu / self.h

    @property
    def dz(self) -> float:
        return TWO_PI / self.z.size

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.u) ** 2) * self.dz))

    def sidecar(self) -> dict:
        return {"h": self.h, "k": self.k, "mu_re": self.mu.real, "mu_im": self.mu.imag,
                "residual": self.residual_L2, "mismatch_value": self.mismatch_value,
                "mismatch_deriv": self.mismatch_deriv, **self.meta}


def grid_size(h: float, ppw: int = 40) -> int:
    """Even number of points giving ``ppw`` points per shortest local wavelength."""
    wavelength = TWO_PI * h  # local frequency is at most 1/h
    n = int(np.ceil(ppw * TWO_PI / wavelength))
    return n + (n % 2)


def periodize(glued: GluedMode, N: int, check_partition: bool = True) -> Quasimode:
    """Sample ``u(z) = sum_j chi(z + 2pi j) v(z + 2pi j)`` on N uniform points and normalize."""
    eps, h = glued.split.epsilon, glued.split.h
    z = np.arange(N) * (TWO_PI / N)
    u = np.empty(N, dtype=complex)
    lo = z < eps
    hi = z > TWO_PI - eps
    mid = ~(lo | hi)
    c = chi(z[lo], eps)
    if check_partition:
        defect = np.max(np.abs(c + chi(z[lo] + TWO_PI, eps) - 1.0)) if c.size else 0.0
        if defect > 1e-12:
            raise PartitionError(f"partition identity violated by {defect:.3g}")
    ve, _ = glued.inner_e.sample(z[lo])
    w, _ = glued.wrap_inner(z[lo])
    u[lo] = c * ve + (1 - c) * w
    u[mid], _ = glued.outer(z[mid])
    u[hi], _ = glued.wrap_inner(z[hi] - TWO_PI)
    q = Quasimode(z, u, h, glued.split.mu, c_e=glued.c_e, c_o=glued.c_o)
    q.u = q.u / q.norm()
    q.mismatch_value, q.mismatch_deriv = glued.mismatch()
    return q


def spectral_second_derivative(u, L: float = TWO_PI):
    n = u.size
    xi = np.fft.fftfreq(n, d=L / n) * TWO_PI
    return np.fft.ifft(-(xi**2) * np.fft.fft(u))


def apply_operator(q: Quasimode, a, profile: Optional[SurfaceProfile] = None, mu: Optional[complex] = None):
    """(hD)^2 u + (W + h^2 V1 + i h mu a - mu^2) u with spectral differentiation."""
    profile = profile or SurfaceProfile()
    mu = q.mu if mu is None else mu
    h = q.h
    W = profile.W(q.z)
    V1 = profile.subpotential(q.z)
    return -h * h * spectral_second_derivative(q.u) + (W + h * h * V1 + 1j * h * mu * a(q.z) - mu * mu) * q.u


def residual(q: Quasimode, a, profile: Optional[SurfaceProfile] = None, min_ppw: float = 20.0) -> float:
    """||P u|| / ||u|| on the sampling grid."""
    if q.z.size < min_ppw / q.h:
        raise ResolutionError(f"grid of {q.z.size} points under-resolves h={q.h}")
    Pu = apply_operator(q, a, profile)
    return float(np.linalg.norm(Pu) / np.linalg.norm(q.u))


def quantization_gap(E: float, h: float, profile: Optional[SurfaceProfile] = None) -> float:
    """Energy spacing 2 pi h / B'(E) between consecutive Bohr-Sommerfeld levels."""
    return TWO_PI * h / action_B_derivative(E, profile)


def build_quasimode(k: int, a, profile: Optional[SurfaceProfile] = None, eps: float = 0.3,
                    ppw: int = 40, refine: bool = True, detune_gaps: float = 0.0,
                    qe: Optional[QuasiEigenvalue] = None, F_variant: str = "full") -> Quasimode:
    """Quasimode for angular mode k.

    ``refine=False`` uses the leading-order mu.  ``detune_gaps`` shifts E by that
    many quantization gaps after refinement (negative control).
    """
    profile = profile or SurfaceProfile()
    h = 1.0 / k
    qe = qe or quasi_eigenvalue(k, a, profile, variant=F_variant)
    mu = qe.mu
    if refine:
        mu = refine_mu(h, a, mu, profile, eps)
    if detune_gaps:
        s = SpectralSplit.from_mu(mu, h, eps)
        E = s.E + detune_gaps * quantization_gap(s.E, h, profile)
        mu = complex(np.sqrt(1 + E + 1j * s.F))
    glued = glue_and_extend(SpectralSplit.from_mu(mu, h, eps), a, profile)
    q = periodize(glued, grid_size(h, ppw))
    q.residual_L2 = residual(q, a, profile)
    q.meta.update(m=qe.m, E_bs=qe.E, refined=refine, detune_gaps=detune_gaps, cond=glued.cond)
    return q


def to_csv_rows(q: Quasimode):
    return np.column_stack([q.z, q.u.real, q.u.imag])
