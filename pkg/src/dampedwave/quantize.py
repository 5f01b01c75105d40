"""Leading-order quantization: Bohr-Sommerfeld energies and the damping shift F."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Callable, Iterable, List, Optional

import numpy as np
from scipy.optimize import brentq

from .geometry import SurfaceProfile
from .wkb import action_B, coeff_c1, coeff_c_full

log = logging.getLogger(__name__)

ETA = 1e-8
E_MAX = 0.5


class NoRootError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuasiEigenvalue:
    k: int
    m: int
    E: float
    F: float

    @property
    def h(self) -> float:
        return 1.0 / self.k

    @property
    def mu(self) -> complex:
        s = np.sqrt(1.0 + self.E)
        return complex(s, self.F / (2 * s))

    @property
    def tau(self) -> complex:
        return self.mu / self.h

    @property
    def scaled_im(self) -> float:
        """Im mu * log(1/h) / h."""
        return self.mu.imag * np.log(1.0 / self.h) / self.h

    def row(self):
        mu = self.mu
        return (self.k, self.h, self.m, self.E, self.F, mu.real, mu.imag, self.scaled_im)

    def to_dict(self):
        d = asdict(self)
        d.update(h=self.h, mu_re=self.mu.real, mu_im=self.mu.imag)
        return d


CSV_HEADER = ("k", "h", "m", "E", "F", "re_mu", "im_mu", "im_mu_log_over_h")


def bohr_sommerfeld(k: int, profile: Optional[SurfaceProfile] = None,
                    B: Optional[Callable[[float], float]] = None, eta: float = ETA,
                    E_max: float = E_MAX, m: Optional[int] = None, xtol: float = 1e-15):
    """Solve ``B(E) = 2 pi m / k`` with the smallest admissible m (or a given m).

    Returns ``(m, E)``.  B is increasing, so the bracketed root is unique.
    """
    if k <= 0:
        raise ValueError("k must be a positive integer")
    profile = profile or SurfaceProfile()
    B = B or (lambda E: action_B(E, profile))
    B0 = B(0.0)
    if m is None:
        m = int(np.ceil(k * (B0 + eta) / (2 * np.pi)))
    target = 2 * np.pi * m / k
    if target > B(E_max):
        raise NoRootError(f"2 pi m / k = {target:.6g} exceeds B(E_max) for k={k}")
    if target <= B0:
        raise NoRootError("quantization target below B(0); E would be nonpositive")
    E = brentq(lambda E: B(E) - target, 0.0, E_max, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)
    return m, float(E)


def determine_F(E: float, h: float, a, profile: Optional[SurfaceProfile] = None,
                variant: str = "leading", eps: Optional[float] = None) -> float:
    """Imaginary shift F of mu^2 fixed by the amplitude balance around the loop.

    ``variant="leading"``: ``F = 2 h c1 / |log E|``.
    ``variant="full"``: keeps the finite part of the return time,
    ``F = h sqrt(1+E) c1 / c_full`` with ``c_full = int 1/(2 phi')`` over a period.
    """
    if not (0 < E < 1):
        raise ValueError("determine_F needs 0 < E < 1")
    profile = profile or SurfaceProfile()
    c1 = coeff_c1(a, E, profile, eps=eps)
    if c1 == 0:
        return 0.0
    if variant == "leading":
        return 2 * h * c1 / abs(np.log(E))
    if variant == "full":
        eps = profile.z_g if eps is None else eps
        return h * np.sqrt(1 + E) * c1 / coeff_c_full(E, eps, profile)
    raise ValueError(f"unknown F variant {variant!r}")


def quasi_eigenvalue(k: int, a, profile: Optional[SurfaceProfile] = None, variant: str = "leading",
                     m: Optional[int] = None) -> QuasiEigenvalue:
    profile = profile or SurfaceProfile()
    m, E = bohr_sommerfeld(k, profile, m=m)
    F = determine_F(E, 1.0 / k, a, profile, variant=variant)
    return QuasiEigenvalue(int(k), m, E, F)


def quasi_eigenvalue_sequence(k_list: Iterable[int], a, profile: Optional[SurfaceProfile] = None,
                              k_min: int = 50, variant: str = "leading") -> List[QuasiEigenvalue]:
    out = []
    for k in k_list:
        if k < k_min:
            raise ValueError(f"k={k} below k_min={k_min}")
        out.append(quasi_eigenvalue(int(k), a, profile, variant=variant))
    return out


def fit_power(x, y) -> float:
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])
