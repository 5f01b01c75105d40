"""Semiclassical resolvent-norm scans for the 1D overdamped operators.

On the circle the viscous operator is assembled in divergence form,

    P(z, h) = (h D+)^T diag(1 + i sqrt(z) a_half / h) (h D+) + V - z,

with ``D+`` the forward difference and ``a_half`` the damping at cell edges.
Pairing ``P u = g`` with ``u`` gives the two a priori identities exactly:

    real:  sum Re(1 + i sqrt(z) a/h) |D u|^2 + sum (V - Re z) |u|^2 = Re <g, u>
    imag:  (Re sqrt(z) / h) sum a |D u|^2 - Im z ||u||^2          = Im <g, u>

``multiplicative_barrier`` replaces the viscous term by ``+ i h sqrt(z) a``
(a potential-type damping), same sign convention.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import TWO_PI, DampingProfile, Domain, SurfaceProfile, smoothstep

log = logging.getLogger(__name__)

VARIANTS = ("viscous_flat", "viscous_barrier", "multiplicative_barrier")
DEFAULT_H = (1 / 50, 1 / 100, 1 / 200, 1 / 400)


class ResolutionError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


def flat_damping() -> DampingProfile:
    """Bump damping on the circle; any nonzero bump controls every ray in 1D."""
    return DampingProfile(z_a=0.4, w=0.6, k_van=4, kind="bump", level=1.0, center=np.pi,
                          domain=Domain.circle_z)


def barrier_damping() -> DampingProfile:
    """Damping vanishing on |z| <= 0.5, i.e. around the barrier top at z = 0."""
    return DampingProfile()


@dataclass
class SemiclassicalOperator:
    variant: str
    z: complex
    h: float
    x: np.ndarray
    dx: float
    D: sp.csr_matrix         # h D+
    a_half: np.ndarray
    coef: np.ndarray         # edge coefficient multiplying |D u|^2
    V: np.ndarray
    mult: np.ndarray         # extra diagonal (multiplicative damping)
    P: sp.csc_matrix

    def apply(self, u):
        return self.P @ u


def grid_points(h: float, ppw: float, L: float = TWO_PI) -> int:
    return int(np.ceil(ppw * L / (TWO_PI * h)))


def assemble_semiclassical(variant: str, z: complex, h: float, a=None,
                           profile: Optional[SurfaceProfile] = None, ppw: float = 40.0,
                           N: Optional[int] = None) -> SemiclassicalOperator:
    """Discretize P(z, h) for one variant on the periodic circle of length 2 pi."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if ppw < 30:
        raise ResolutionError("need at least 30 points per wavelength")
    N = grid_points(h, ppw) if N is None else N
    if N < grid_points(h, 30):
        raise ResolutionError(f"N={N} below 30 points per wavelength at h={h}")
    if a is None:
        a = flat_damping() if variant == "viscous_flat" else barrier_damping()
    dx = TWO_PI / N
    x = np.arange(N) * dx
    Dp = sp.diags([-np.ones(N), np.ones(N - 1), [1.0]], [0, 1, -(N - 1)], shape=(N, N)) / dx
    D = (h * Dp).tocsr()
    a_half = np.asarray(a(x + dx / 2), dtype=float)
    rz = np.sqrt(complex(z))
    if variant == "viscous_flat":
        V = np.zeros(N)
    else:
        profile = profile or SurfaceProfile()
        V = profile.W(x)
    if variant == "multiplicative_barrier":
        coef = np.ones(N, dtype=complex)
        mult = 1j * h * rz * np.asarray(a(x), dtype=float)
    else:
        coef = 1 + 1j * rz * a_half / h
        mult = np.zeros(N, dtype=complex)
    P = (D.T @ sp.diags(coef) @ D + sp.diags(V + mult - z)).tocsc()
    return SemiclassicalOperator(variant, complex(z), h, x, dx, D, a_half, coef, V, mult, P)


def s_min(op: SemiclassicalOperator, tol: float = 1e-6, retries: int = 2) -> float:
    """Smallest singular value via the largest eigenvalue of P^{-H} P^{-1}."""
    lu = spla.splu(op.P)
    n = op.P.shape[0]

    def mv(v):
        return lu.solve(lu.solve(v), trans="H")

    A = spla.LinearOperator((n, n), matvec=mv, dtype=complex)
    rng = np.random.default_rng(0)
    for attempt in range(retries + 1):
        try:
            v0 = rng.standard_normal(n) + 0j
            lam = spla.eigsh(A, k=1, which="LM", tol=tol, v0=v0, maxiter=2000 * (attempt + 1),
                             return_eigenvectors=False)
            return float(1.0 / np.sqrt(lam[0].real))
        except spla.ArpackNoConvergence:
            log.warning("s_min iteration did not converge (attempt %d)", attempt + 1)
    raise ConvergenceError("smallest-singular-value iteration did not converge")


def solve(op: SemiclassicalOperator, g):
    return spla.splu(op.P).solve(np.asarray(g, dtype=complex))


def apriori_check(u, g, op: SemiclassicalOperator, normalize: bool = True):
    """Left-minus-right of both a priori identities, by default divided by ||g|| ||u||."""
    u = np.asarray(u, complex)
    g = np.asarray(g, complex)
    w = op.dx
    Du = op.D @ u
    gu = w * np.vdot(u, g)  # <g, u>
    z = op.z
    real_lhs = w * np.sum(op.coef.real * np.abs(Du) ** 2) + w * np.sum((op.V + op.mult.real - z.real) * np.abs(u) ** 2)
    imag_lhs = w * np.sum(op.coef.imag * np.abs(Du) ** 2) + w * np.sum((op.mult.imag - z.imag) * np.abs(u) ** 2)
    res_re, res_im = abs(real_lhs - gu.real), abs(imag_lhs - gu.imag)
    if not normalize:
        return float(res_re), float(res_im)
    scale = w * np.linalg.norm(g) * np.linalg.norm(u)
    if scale == 0:
        return 0.0, 0.0
    return float(res_re / scale), float(res_im / scale)


def fit_exponent(hs, smins):
    """Slope nu of log(1/s_min) against log(1/h), with a 1-sigma error."""
    X = np.log(1 / np.asarray(hs, float))
    Y = np.log(1 / np.asarray(smins, float))
    if X.size >= 3:
        p, cov = np.polyfit(X, Y, 1, cov=True)
        err = float(np.sqrt(cov[0, 0]))
    else:
        p = np.polyfit(X, Y, 1)
        err = float("nan")
    return float(p[0]), err


def fit_log_corrected(hs, values):
    """Fit log(values) = nu log(1/h) + log log(1/h) + b; returns (nu, rms residual)."""
    X = np.log(1 / np.asarray(hs, float))
    Y = np.log(np.asarray(values, float)) - np.log(X)
    p = np.polyfit(X, Y, 1)
    return float(p[0]), float(np.sqrt(np.mean((Y - np.polyval(p, X)) ** 2)))


@dataclass
class ResolventScan:
    variant: str
    h_list: np.ndarray
    z_grid: np.ndarray
    s_min: np.ndarray                 # shape (len(h_list), len(z_grid))
    nu: float = float("nan")
    nu_err: float = float("nan")
    nu_log_corrected: float = float("nan")
    log_fit_residual: float = float("nan")
    apriori: Dict[str, float] = field(default_factory=dict)
    smoothness_ratio: float = float("nan")

    def rows(self):
        for i, h in enumerate(self.h_list):
            for j, z in enumerate(self.z_grid):
                yield (self.variant, z.real, z.imag, h, self.s_min[i, j])

    def to_summary(self):
        return {"variant": self.variant, "nu": self.nu, "nu_err": self.nu_err,
                "nu_log_corrected": self.nu_log_corrected, "log_fit_residual": self.log_fit_residual,
                "apriori_max": self.apriori, "smoothness_ratio": self.smoothness_ratio,
                "h_list": list(map(float, self.h_list))}


def z_box(h: float, alpha: float = 0.2, n_re: int = 3, n_im: int = 3):
    """Scan box [1 - alpha, 1 + alpha] + i [-h, h/4] (z = 1 is always included)."""
    re = np.linspace(1 - alpha, 1 + alpha, n_re)
    im = np.linspace(-h, h / 4, n_im)
    pts = [complex(r, i) for r in re for i in im]
    if 1 + 0j not in pts:
        pts.insert(0, 1 + 0j)
    return np.array(pts)


def scan_inverse_norm(variant: str, h_list: Sequence[float] = DEFAULT_H, z_grid=None, a=None,
                      profile: Optional[SurfaceProfile] = None, ppw: float = 40.0,
                      seed: int = 0) -> ResolventScan:
    """s_min(z, h) over a z-grid; the exponent is fitted along z = 1.

    ``z_grid`` may be a callable ``h -> array`` (the default box scales with h)
    or a fixed array.  Every solve also checks the a priori identities against a
    random right-hand side.
    """
    h_list = np.asarray(h_list, float)
    if z_grid is None:
        z_grid = z_box
    grids = [np.asarray(z_grid(h) if callable(z_grid) else z_grid, complex) for h in h_list]
    nz = max(g.size for g in grids)
    S = np.full((h_list.size, nz), np.nan)
    rng = np.random.default_rng(seed)
    worst = {"real": 0.0, "imag": 0.0}
    ratio = 1.0
    s_at_1 = []
    for i, h in enumerate(h_list):
        for j, z in enumerate(grids[i]):
            op = assemble_semiclassical(variant, z, h, a, profile, ppw)
            S[i, j] = s_min(op)
            g = rng.standard_normal(op.x.size) + 1j * rng.standard_normal(op.x.size)
            u = solve(op, g)
            rr, ri = apriori_check(u, g, op)
            worst["real"] = max(worst["real"], rr)
            worst["imag"] = max(worst["imag"], ri)
        zs = grids[i]
        on_axis = np.flatnonzero(np.isclose(zs, 1 + 0j))
        s_at_1.append(S[i, on_axis[0]])
        # raising Im z at fixed Re z should not blow up the inverse norm
        for r in np.unique(np.round(zs.real, 12)):
            idx = np.flatnonzero(np.isclose(zs.real, r))
            idx = idx[np.argsort(zs[idx].imag)]
            inv = 1 / S[i, idx]
            if inv.size > 1:
                ratio = max(ratio, float(np.max(inv[1:] / inv[:-1])))
    nu, err = fit_exponent(h_list, s_at_1)
    nu_lc, res_lc = fit_log_corrected(h_list, 1 / np.asarray(s_at_1))
    z_common = grids[0] if all(g.size == grids[0].size for g in grids) else np.arange(nz)
    return ResolventScan(variant, h_list, np.asarray(z_common), S, nu, err, nu_lc, res_lc, worst, ratio)


# --- cutoff resolvent with a complex absorbing potential on the line ---

def hyperbolic_barrier(x):
    """Compactly supported barrier (1 - x^2)^3 on |x| < 1: top 1 at x = 0, nondegenerate."""
    x = np.asarray(x, float)
    return np.where(np.abs(x) < 1, (1 - x**2) ** 3, 0.0)


def absorbing_potential(x, start: float = 2.0, width: float = 1.0):
    """0 on |x| <= start, 1 on |x| >= start + width, smoothstep in between."""
    S, _, _ = smoothstep((np.abs(np.asarray(x, float)) - start) / width)
    return S


def cutoff(x, inner: float = 1.0, outer: float = 1.5):
    """1 on |x| <= inner, 0 on |x| >= outer."""
    S, _, _ = smoothstep((outer - np.abs(np.asarray(x, float))) / (outer - inner))
    return S


def cutoff_resolvent_norm(h: float, z: complex = 1.0, V: Optional[Callable] = hyperbolic_barrier,
                          chi: Optional[Callable] = cutoff, L: float = 4.0, ppw: float = 40.0,
                          cap_start: float = 2.0, cap_width: float = 1.0) -> float:
    """||chi Q^-1 chi|| with Q = (hD)^2 + V - z + i W_abs on [-L, L] (Dirichlet)."""
    N = grid_points(h, ppw, 2 * L)
    dx = 2 * L / (N + 1)
    x = -L + dx * (np.arange(N) + 1)
    lap = sp.diags([np.ones(N - 1), -2 * np.ones(N), np.ones(N - 1)], [-1, 0, 1]) / dx**2
    Vx = np.zeros(N) if V is None else V(x)
    W = absorbing_potential(x, cap_start, cap_width)
    Q = (-(h * h) * lap.astype(complex) + sp.diags(Vx - z + 1j * W)).tocsc()
    c = np.zeros(N) if chi is None else chi(x)
    if not np.any(c):
        return 0.0
    lu = spla.splu(Q)

    def mv(v):
        return c * lu.solve(c * np.ravel(v))

    def rmv(v):
        return c * lu.solve(c * np.ravel(v), trans="H")

    A = spla.LinearOperator((N, N), matvec=mv, rmatvec=rmv, dtype=complex)
    s = spla.svds(A, k=1, which="LM", tol=1e-8, return_singular_vectors=False,
                  random_state=np.random.default_rng(0))
    return float(s[0])


def cutoff_resolvent_estimate(h_list: Sequence[float] = DEFAULT_H, barrier: bool = True, **kw):
    """Fitted exponent nu in ||chi Q^-1 chi|| ~ h^-nu, plus the log-corrected fit."""
    V = hyperbolic_barrier if barrier else None
    norms = np.array([cutoff_resolvent_norm(h, V=V, **kw) for h in h_list])
    X = np.log(1 / np.asarray(h_list, float))
    nu = float(np.polyfit(X, np.log(norms), 1)[0])
    nu_lc, res = fit_log_corrected(h_list, norms)
    return {"h": list(map(float, h_list)), "norms": norms.tolist(), "nu": nu,
            "nu_log_corrected": nu_lc, "log_fit_residual": res}
