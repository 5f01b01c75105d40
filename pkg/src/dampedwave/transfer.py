"""Scalar connection coefficient across the barrier top and the matching equations.

The incoming/outgoing WKB data on the two sides of the hyperbolic point are
related by ``T(rho) = Phi((E + iF)/2h)`` with

    Phi(t) = (2 pi)^(-1/2) Gamma(1/2 - i t) exp(pi t / 2) exp(-i t log h) exp(i pi / 4).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit, loggamma

from .geometry import SurfaceProfile
from .wkb import SpectralSplit, action_A, action_B, coeff_c0, coeff_c1, sigma_eps


class PoleError(ValueError):
    pass


@dataclass(frozen=True)
class TransferEvaluation:
    E: float
    F: float
    h: float
    value: complex
    stirling_arg: float
    stirling_re_exp: float

    @property
    def arg(self) -> float:
        return float(np.angle(self.value))


def log_phi(t, h: float):
    """log Phi(t) on the principal log-Gamma branch (vectorised in t)."""
    t = np.asarray(t, dtype=complex)
    w = 0.5 - 1j * t
    near_pole = (np.abs(w.imag) < 1e-14) & (w.real <= 0) & (np.abs(w.real - np.round(w.real)) < 1e-14)
    if np.any(near_pole):
        raise PoleError("Gamma(1/2 - i t) has a pole at this t")
    return (-0.5 * np.log(2 * np.pi) + loggamma(w) + np.pi * t / 2
            - 1j * t * np.log(h) + 1j * np.pi / 4)


def phi_exact(t, h: float):
    """Phi(t) evaluated through the complex log-Gamma function."""
    return np.exp(log_phi(t, h))


def phi_modulus_sq_real(t):
    """|Phi(t)|^2 = e^{pi t}/(2 cosh pi t) for real t, written stably."""
    return expit(2 * np.pi * np.asarray(t, dtype=float))


def phi_stirling(E: float, F: float, h: float, include_gamma_tail: bool = True):
    """Stirling approximations of Arg Phi and log|Phi| at t = (E + iF)/2h.

    Returns ``(arg, re_exp)`` with

        arg    = (E/2h)(1 - log(E/2)) + pi/4 - (h/E)(1/2 + F/2h)^2 + (F/E)(1/2 + F/2h)
                 + h/(6E)
        re_exp = (F/2h) log(E/2)

    The ``h/(6E)`` term is the imaginary part of the ``1/(12 w)`` Stirling
    correction; without it the argument is only first-order accurate in h.
    """
    if E <= 0:
        raise ValueError("Stirling regime needs E > 0")
    b = 0.5 + F / (2 * h)
    arg = (E / (2 * h)) * (1 - np.log(E / 2)) + np.pi / 4 - (h / E) * b**2 + (F / E) * b
    if include_gamma_tail:
        arg += h / (6 * E)
    re_exp = (F / (2 * h)) * np.log(E / 2)
    return float(arg), float(re_exp)


def wrap_phase(x):
    """Reduce to (-pi, pi] by nearest-integer multiples of 2 pi."""
    return np.asarray(x) - 2 * np.pi * np.round(np.asarray(x) / (2 * np.pi))


def unwrapped_arg(E: float, F: float, h: float) -> float:
    """Continuous Arg Phi, i.e. Im log Phi on the principal log-Gamma branch."""
    return float(np.imag(log_phi((E + 1j * F) / (2 * h), h)))


def evaluate(E: float, F: float, h: float) -> TransferEvaluation:
    t = (E + 1j * F) / (2 * h)
    arg, re_exp = phi_stirling(E, F, h)
    return TransferEvaluation(E, F, h, complex(phi_exact(t, h)), arg, re_exp)


def transfer_value(split: SpectralSplit) -> complex:
    return complex(phi_exact((split.E + 1j * split.F) / (2 * split.h), split.h))


def matching_residuals(split: SpectralSplit, gamma_ratio: float, rho_diff: float):
    """Amplitude and phase residuals of the connection equations across the barrier.

    ``amp_res = | |T| gamma_ratio - sigma(eps) |`` and
    ``phase_res = | Arg T + rho_diff - A(E)/h |`` reduced mod 2 pi.
    """
    T = transfer_value(split)
    amp = abs(abs(T) * gamma_ratio - sigma_eps(split))
    phase = abs(float(wrap_phase(np.angle(T) + rho_diff - action_A(split.E, split.epsilon) / split.h)))
    return amp, phase


def leading_connection(split: SpectralSplit):
    """The (gamma_ratio, rho_diff) pair that zeroes both matching residuals."""
    T = transfer_value(split)
    return sigma_eps(split) / abs(T), action_A(split.E, split.epsilon) / split.h - float(np.angle(T))


def monodromy_factor(split: SpectralSplit, a, profile: Optional[SurfaceProfile] = None) -> complex:
    """Phase and amplitude gained by an outer branch once around [eps, 2pi - eps].

    ``exp(i (B - A)/h) * exp(-c0 F/h + mu c1)``; the amplitude part is the
    transport factor between the two gluing points.
    """
    profile = profile or SurfaceProfile()
    E, h, eps = split.E, split.h, split.epsilon
    phase = (action_B(E, profile) - action_A(E, eps)) / h
    c0 = coeff_c0(E, eps, profile)
    c1 = coeff_c1(a, E, profile, eps=eps)
    return complex(np.exp(1j * phase) * np.exp(-c0 * split.F / h + split.mu * c1))


def sweep_table(E_list, F_list, h_list):
    """Rows (E, F, h, Re Phi, Im Phi, stirling arg, re_exp) for CSV export."""
    rows = []
    for E, F, h in zip(E_list, F_list, h_list):
        ev = evaluate(E, F, h)
        rows.append((E, F, h, ev.value.real, ev.value.imag, ev.stirling_arg, ev.stirling_re_exp))
    return np.array(rows)
