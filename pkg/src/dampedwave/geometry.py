"""Surface-of-revolution profile, damping profiles and the conjugation subpotential.

The torus is parametrised by ``z`` on the circle R/2piZ with metric
``dz^2 + R(z)^2 dtheta^2``.  Everything downstream works with the effective
potential ``W = R^-2``, which is exactly ``1 - z^2`` on ``|z| <= z_g`` and
blends smoothly into ``(2 - cos z)^-2`` away from the hyperbolic geodesic.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

TWO_PI = 2.0 * np.pi


def _flat(s):
    """exp(-1/s) for s > 0, 0 otherwise, with its first two derivatives."""
    s = np.asarray(s, dtype=float)
    pos = s > 0
    safe = np.where(pos, s, 1.0)
    f = np.where(pos, np.exp(-1.0 / safe), 0.0)
    f1 = np.where(pos, f / safe**2, 0.0)
    f2 = np.where(pos, f * (1.0 / safe**4 - 2.0 / safe**3), 0.0)
    return f, f1, f2


def smoothstep(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1.  Returns (S, S', S'')."""
    s = np.asarray(s, dtype=float)
    f, f1, f2 = _flat(s)
    g, g1, g2 = _flat(1.0 - s)
    g1, g2 = -g1, g2
    d = f + g
    d1 = f1 + g1
    n1 = f1 * g - f * g1
    n1p = f2 * g - f * g2
    S = f / d
    S1 = n1 / d**2
    S2 = (n1p * d - 2.0 * n1 * d1) / d**3
    return S, S1, S2


def wrap(z):
    """Map angles to (-pi, pi]."""
    z = np.asarray(z, dtype=float)
    return np.pi - np.mod(np.pi - z, TWO_PI)


class ProfileValues(NamedTuple):
    R: np.ndarray
    dR: np.ndarray
    d2R: np.ndarray
    W: np.ndarray
    dW: np.ndarray


@dataclass(frozen=True)
class SurfaceProfile:
    """Warp function R(z) of the lumpy torus.

    ``W = R^-2`` equals ``1 - z^2`` on ``|z| <= z_g`` and ``(2 - cos z)^-2`` for
    ``|z| >= z_g + blend``; in between the two are mixed with a C-infinity step.
    """

    z_g: float = 0.3
    blend: float = 0.65
    family: str = "cosine_lump"

    def __post_init__(self):
        if self.family != "cosine_lump":
            raise ValueError(f"unknown background family {self.family!r}")
        if not (0.0 < self.z_g and self.z_g + self.blend < 1.0):
            raise ValueError("need 0 < z_g and z_g + blend < 1 so that 1 - z^2 stays positive")
        if self.blend <= 0.0:
            raise ValueError("blend width must be positive")

    def potential(self, z):
        """Return (W, W', W'') at z."""
        z = wrap(z)
        sgn = np.where(z < 0, -1.0, 1.0)
        az = np.abs(z)
        # exact barrier 1 - z^2
        q0, q1, q2 = 1.0 - z**2, -2.0 * z, -2.0 * np.ones_like(z)
        # background (2 - cos z)^-2
        c = 2.0 - np.cos(z)
        b0 = c**-2
        b1 = -2.0 * np.sin(z) * c**-3
        b2 = -2.0 * np.cos(z) * c**-3 + 6.0 * np.sin(z) ** 2 * c**-4
        S, S1, S2 = smoothstep((az - self.z_g) / self.blend)
        # weight of the exact region: m(z) = 1 - S((|z| - z_g)/blend)
        m = 1.0 - S
        m1 = -S1 * sgn / self.blend
        m2 = -S2 / self.blend**2
        W = m * q0 + (1 - m) * b0
        dW = m1 * (q0 - b0) + m * q1 + (1 - m) * b1
        d2W = m2 * (q0 - b0) + 2 * m1 * (q1 - b1) + m * q2 + (1 - m) * b2
        return W, dW, d2W

    def W(self, z):
        return self.potential(z)[0]

    def scalar_W_V1(self, z: float):
        """(W, V1) at a single point with plain floats; used inside ODE right-hand sides."""
        z = math.remainder(z, 2 * math.pi)
        az = abs(z)
        if az <= self.z_g:
            W = 1.0 - z * z
            return W, 1.25 * z * z / (W * W) + 0.5 / W
        W, dW, d2W = (float(v) for v in self.potential(np.array([z])))
        R = W**-0.5
        dR = -0.5 * W**-1.5 * dW
        d2R = 0.75 * W**-2.5 * dW**2 - 0.5 * W**-1.5 * d2W
        return W, d2R / (2 * R) - dR**2 / (4 * R * R)

    def eval(self, z) -> ProfileValues:
        W, dW, d2W = self.potential(z)
        R = W**-0.5
        dR = -0.5 * W**-1.5 * dW
        d2R = 0.75 * W**-2.5 * dW**2 - 0.5 * W**-1.5 * d2W
        return ProfileValues(R, dR, d2R, W, dW)

    def subpotential(self, z):
        """V1 with  R^(1/2) (-R^-1 d R d) R^(-1/2) = -d^2 + V1."""
        p = self.eval(z)
        return p.d2R / (2 * p.R) - p.dR**2 / (4 * p.R**2)

    def to_config(self) -> dict:
        return {"family": self.family, "z_g": self.z_g, "blend": self.blend}


def eval_profile(z, profile: Optional[SurfaceProfile] = None) -> ProfileValues:
    """(R, R', R'', W, W') at z for the given (default) profile."""
    return (profile or SurfaceProfile()).eval(z)


def subpotential_V1(z, profile: Optional[SurfaceProfile] = None):
    return (profile or SurfaceProfile()).subpotential(z)


def _ramp(s):
    """Monotone C-infinity ramp r(s) = 1 - (1-s)(1-S(s)) on [0, 1].

    r vanishes to first order at s = 0 (r ~ s) and saturates to 1 with all
    derivatives zero at s = 1, so r^k vanishes to order exactly k.
    """
    r, r1, r2, _ = _ramp_with_complement(s)
    return r, r1, r2


def _ramp_with_complement(s):
    """(r, r', r'', 1 - r); the complement is formed without cancellation near s = 1."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    S, S1, S2 = smoothstep(s)
    Sc = smoothstep(1.0 - s)[0]  # equals 1 - S exactly in exact arithmetic
    q = (1.0 - s) * Sc
    r = 1.0 - q
    r1 = Sc + (1.0 - s) * S1
    r2 = -2.0 * S1 + (1.0 - s) * S2
    return r, r1, r2, q


class Domain(str, enum.Enum):
    circle_z = "circle_z"
    interval_x = "interval_x"


@dataclass(frozen=True)
class DampingProfile:
    """Nonnegative damping a(.) with analytic first and second derivatives.

    ``kind="ramp"`` (default) is ``r((|z| - z_a)/w)^k_van``: zero on
    ``|z| <= z_a``, one on ``|z| >= z_a + w``.  ``kind="bump"`` is the
    complementary profile ``1 - r((|z - center| - z_a)/w)^k_van`` with
    ``a(center) = 1``; on a circle it leaves ``|z - center| >= z_a + w``
    undamped.  ``kind="constant"`` is ``a == level``.
    """

    z_a: float = 0.5
    w: float = 0.4
    k_van: int = 8
    kind: str = "ramp"
    level: float = 1.0
    center: float = 0.0
    domain: Domain = Domain.circle_z

    def __post_init__(self):
        if self.kind not in ("ramp", "bump", "constant"):
            raise ValueError(f"unknown damping kind {self.kind!r}")
        if self.kind != "constant" and (self.w <= 0 or self.z_a < 0):
            raise ValueError("damping needs w > 0 and z_a >= 0")
        if self.level < 0:
            raise ValueError("damping level must be nonnegative")

    @property
    def flat_halfwidth(self) -> float:
        """Radius of the zero set around z = 0 (0 if a(0) > 0)."""
        if self.kind == "ramp":
            return self.z_a if self.level > 0 else np.inf
        if self.kind == "constant":
            return np.inf if self.level == 0 else 0.0
        return 0.0

    @property
    def sup(self) -> float:
        return float(self.level)

    def _coord(self, z):
        z = np.asarray(z, dtype=float)
        if self.domain == Domain.circle_z:
            d = wrap(z - self.center)
        else:
            d = z - self.center
        return d

    def derivatives(self, z):
        """Return (a, a', a'') at z."""
        z = np.asarray(z, dtype=float)
        if self.kind == "constant":
            one = np.ones_like(z)
            return self.level * one, 0 * one, 0 * one
        d = self._coord(z)
        sgn = np.where(d < 0, -1.0, 1.0)
        s = (np.abs(d) - self.z_a) / self.w
        r, r1, r2, q = _ramp_with_complement(s)
        k = self.k_van
        inside = (s > 0) & (s < 1)
        rk = r**k
        with np.errstate(divide="ignore"):
            one_minus_rk = -np.expm1(k * np.log1p(-q))
        d1 = np.where(inside, k * r ** (k - 1) * r1 * sgn / self.w, 0.0)
        d2 = np.where(inside, (k * (k - 1) * r ** (k - 2) * r1**2 + k * r ** (k - 1) * r2) / self.w**2, 0.0)
        if self.kind == "ramp":
            return self.level * rk, self.level * d1, self.level * d2
        return self.level * one_minus_rk, -self.level * d1, -self.level * d2

    def __call__(self, z):
        return self.derivatives(z)[0]

    def to_config(self) -> dict:
        return {"z_a": self.z_a, "w": self.w, "k_van": self.k_van, "kind": self.kind,
                "level": self.level, "center": self.center, "domain": self.domain.value}


@dataclass(frozen=True)
class CallableDamping:
    """Damping given by user callables, for regularity experiments."""

    a: Callable
    da: Callable
    d2a: Callable
    k_van: int
    flat_halfwidth: float = 0.0
    domain: Domain = Domain.interval_x

    def derivatives(self, z):
        z = np.asarray(z, dtype=float)
        return self.a(z), self.da(z), self.d2a(z)

    def __call__(self, z):
        return self.a(np.asarray(z, dtype=float))

    @property
    def sup(self) -> float:
        return float(np.max(self.a(np.linspace(-np.pi, np.pi, 4097))))


ZERO_DAMPING = DampingProfile(kind="constant", level=0.0)


class RegularityReport(NamedTuple):
    ok: bool
    C0: float
    C1: float
    C2: float


def check_damping_regularity(a, grid, cap: float = 1e4, use_fd: bool = False,
                             fd_step: float = 1e-4) -> RegularityReport:
    """Smallest C_j with |d^j a| <= C_j a^((k-j)/k) on the grid, j = 0, 1, 2.

    The bound is only meaningful for vanishing order k > 2; smaller k fails
    outright.  Derivatives come from the profile's analytic evaluators unless
    ``use_fd`` asks for centered differences.
    """
    grid = np.asarray(grid, dtype=float)
    k = a.k_van
    if use_fd:
        a0 = a(grid)
        a1 = (a(grid + fd_step) - a(grid - fd_step)) / (2 * fd_step)
        a2 = (a(grid + fd_step) - 2 * a0 + a(grid - fd_step)) / fd_step**2
    else:
        a0, a1, a2 = a.derivatives(grid)
    if np.any(a0 < 0):
        return RegularityReport(False, np.inf, np.inf, np.inf)
    consts = []
    for j, dj in enumerate((a0, a1, a2)):
        mag = np.abs(dj)
        base = a0 ** ((k - j) / k) if k > 0 else np.ones_like(a0)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(base > 0, mag / base, np.where(mag > 0, np.inf, 0.0))
        consts.append(float(np.max(ratio)) if ratio.size else 0.0)
    ok = k > 2 and all(c <= cap for c in consts)
    return RegularityReport(ok, *consts)


class ControlStatus(str, enum.Enum):
    perfect = "perfect"
    imperfect_at_z0 = "imperfect_at_z0"


def control_status(a, profile: Optional[SurfaceProfile] = None, probe: float = 1e-3) -> ControlStatus:
    """Geometric control classification for the separated models.

    On the torus the closed geodesic z = 0 escapes the damping exactly when a
    vanishes on a neighbourhood of z = 0; the elliptic geodesic z = pi must
    also be damped for control.  For 1D circle/interval models any nonempty
    damped set controls.
    """
    zs = np.linspace(-np.pi, np.pi, 8193)
    vals = a(zs)
    if np.max(vals) <= 0:
        return ControlStatus.imperfect_at_z0
    if profile is None or getattr(a, "domain", Domain.circle_z) == Domain.interval_x:
        return ControlStatus.perfect
    near0 = a(np.linspace(-probe, probe, 65))
    if np.all(near0 == 0):
        return ControlStatus.imperfect_at_z0
    if a(np.array([np.pi]))[0] <= 0:
        return ControlStatus.imperfect_at_z0
    return ControlStatus.perfect


def sample_csv_rows(profile: SurfaceProfile, a, n: int = 512):
    """Rows (z, R, W, a) on a uniform periodic grid."""
    z = np.linspace(0, TWO_PI, n, endpoint=False)
    p = profile.eval(z)
    return np.column_stack([z, p.R, p.W, a(z)])
