"""Exact harmonic-oscillator propagator and homogeneous model solutions.

``I(t) = exp(i t H / h)`` with ``H = ((hD)^2 + x^2)/2`` acts diagonally on the
h-scaled Hermite functions (eigenvalues ``h(k + 1/2)``).  At ``t = pi/4`` it
conjugates ``(hD)^2 - x^2`` to ``-2(x hD + h/2i)`` with no remainder, which is
what :func:`egorov_check` measures.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


class ResolutionError(ValueError):
    pass


@dataclass
class HermiteBasisGrid:
    N: int
    h: float
    x: np.ndarray
    basis: np.ndarray  # shape (N, M)

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.h * (np.arange(self.N) + 0.5)

    def gram(self) -> np.ndarray:
        return self.basis @ self.basis.T * self.dx

    def coefficients(self, f) -> np.ndarray:
        return self.basis @ np.asarray(f) * self.dx

    def synthesize(self, c) -> np.ndarray:
        return np.asarray(c) @ self.basis

    def norm(self, f) -> float:
        return float(np.sqrt(np.sum(np.abs(f) ** 2) * self.dx))


def hermite_functions(y, N: int) -> np.ndarray:
    """Orthonormal Hermite functions psi_0..psi_{N-1} at y by the three-term recurrence.

    The Gaussian factor is carried as a separate log-scale per point so the
    recurrence never underflows where high modes are still non-negligible.
    """
    y = np.asarray(y, dtype=float)
    out = np.empty((N, y.size))
    logscale = -0.5 * y**2
    p_prev = np.zeros_like(y)
    p = np.full_like(y, np.pi**-0.25)
    out[0] = p * np.exp(logscale)
    for k in range(1, N):
        p_next = np.sqrt(2.0 / k) * y * p - np.sqrt((k - 1) / k) * p_prev
        p_prev, p = p, p_next
        big = np.abs(p) > 1e100
        if np.any(big):
            p[big] *= 1e-100
            p_prev[big] *= 1e-100
            logscale[big] += 100 * np.log(10.0)
        out[k] = p * np.exp(logscale)
    return out


def make_basis(N: int, h: float, M: int = 2048, L: Optional[float] = None) -> HermiteBasisGrid:
    """h-scaled oscillator eigenfunctions ``h^(-1/4) psi_k(x / sqrt h)`` on [-L, L)."""
    if L is None:
        L = max(8.0, 6.0 * np.sqrt(N * h))
    x = -L + 2 * L * np.arange(M) / M
    B = hermite_functions(x / np.sqrt(h), N) * h**-0.25
    return HermiteBasisGrid(N, h, x, B)


def _check_resolved(basis: HermiteBasisGrid, c, tol: float = 1e-10):
    tail = np.sqrt(np.sum(np.abs(c[basis.N // 2:]) ** 2))
    total = np.sqrt(np.sum(np.abs(c) ** 2))
    if total > 0 and tail > tol * total:
        raise ResolutionError(f"input not resolved by the first N/2 modes (tail {tail / total:.2e})")


def fio_apply(t: float, f, basis: HermiteBasisGrid, check: bool = True):
    """I(t) f = sum_k exp(i t lambda_k / h) <f, H_k> H_k."""
    c = basis.coefficients(f)
    if check:
        _check_resolved(basis, c)
    phase = np.exp(1j * t * (np.arange(basis.N) + 0.5))
    return basis.synthesize(phase * c)


def hD(f, basis: HermiteBasisGrid):
    """h D_x f = -i h f' by FFT on the periodic extension of the grid."""
    M = basis.x.size
    xi = 2 * np.pi * np.fft.fftfreq(M, d=basis.dx)
    return basis.h * np.fft.ifft(xi * np.fft.fft(f))


def egorov_check(f, h: float, basis: Optional[HermiteBasisGrid] = None, N: int = 256) -> float:
    """||I(pi/4)((hD)^2 - x^2) f + 2 (x hD + h/2i) I(pi/4) f|| / ||f||."""
    basis = basis or make_basis(N, h)
    x = basis.x
    lhs = fio_apply(np.pi / 4, hD(hD(f, basis), basis) - x**2 * f, basis, check=False)
    g = fio_apply(np.pi / 4, f, basis)
    rhs = -2 * (x * hD(g, basis) + h / 2j * g)
    return basis.norm(lhs - rhs) / basis.norm(f)


def coherent_state(x, x0: float, xi0: float, h: float):
    """L^2-normalized Gaussian centred at (x0, xi0) in phase space."""
    return (np.pi * h) ** -0.25 * np.exp(-((x - x0) ** 2) / (2 * h) + 1j * xi0 * x / h)


def phase_space_center(f, basis: HermiteBasisGrid):
    """(<x>, <hD>) of f."""
    n2 = basis.norm(f) ** 2
    ex = np.sum(basis.x * np.abs(f) ** 2) * basis.dx / n2
    exi = np.real(np.vdot(f, hD(f, basis))) * basis.dx / n2
    return float(ex), float(exi)


def unitarity_defect(t: float, f, basis: HermiteBasisGrid) -> float:
    return abs(basis.norm(fio_apply(t, f, basis)) - basis.norm(f)) / basis.norm(f)


def group_law_defect(t: float, s: float, f, basis: HermiteBasisGrid) -> float:
    a = fio_apply(t, fio_apply(s, f, basis), basis, check=False)
    b = fio_apply(t + s, f, basis)
    return basis.norm(a - b) / basis.norm(f)


def model_solution(x, rho: complex, h: float, branch: str = "+", rep: str = "position"):
    """Homogeneous solution ``1_{+-x > 0} |x|^{-i rho / h}`` of ``(x d/dx + i rho/h) v = 0``.

    ``rep="frequency"`` evaluates the same expression in the dual variable.
    The value at 0 is 0.
    """
    if branch not in ("+", "-"):
        raise ValueError("branch must be '+' or '-'")
    if rep not in ("position", "frequency"):
        raise ValueError("rep must be 'position' or 'frequency'")
    x = np.asarray(x, dtype=float)
    side = x > 0 if branch == "+" else x < 0
    ax = np.where(side, np.abs(x), 1.0)
    v = np.exp(-1j * rho / h * np.log(ax))
    return np.where(side, v, 0.0)
