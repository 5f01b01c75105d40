"""Brute-force spectrum of the per-mode damped wave pencil.

For angular mode k the stationary problem is ``(-tau^2 + L_k + i tau a) psi = 0``
with ``L_k = -R^-1 d R d + k^2 W``, self-adjoint in ``R dz``.  Conjugating by
``R^(1/2)`` gives the symmetric operator ``S_k = -d^2 + V1 + k^2 W`` in ``dz``;
both share the pencil spectrum and we discretize ``S_k`` with eighth-order
periodic finite differences.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import TWO_PI, SurfaceProfile

log = logging.getLogger(__name__)

# central weights for d^2/dx^2, offsets 0..4
FD8 = np.array([-205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])


class ResolutionError(ValueError):
    pass


class EmptyWindowError(ValueError):
    pass


def periodic_second_difference(N: int, L: float = TWO_PI) -> sp.csr_matrix:
    """Eighth-order periodic approximation of d^2/dz^2 on N points."""
    dz = L / N
    diags, offs = [], []
    for j, w in enumerate(FD8):
        for o in ({0} if j == 0 else {j, -j}):
            diags.append(np.full(N, w / dz**2))
            offs.append(o)
            # wrap-around
            if o != 0:
                diags.append(np.full(N, w / dz**2))
                offs.append(o - N if o > 0 else o + N)
    return sp.diags(diags, offs, shape=(N, N), format="csr")


@dataclass
class ModeOperator:
    """Discretized mode operator on a uniform periodic grid."""

    k: int
    N: int
    z: np.ndarray
    S: sp.csr_matrix
    a: np.ndarray
    R: np.ndarray
    W: np.ndarray

    @property
    def dz(self) -> float:
        return TWO_PI / self.N

    @property
    def L(self) -> sp.csr_matrix:
        """L_k = R^-1/2 S R^1/2 (acts on unconjugated functions)."""
        r = np.sqrt(self.R)
        return (sp.diags(1 / r) @ self.S @ sp.diags(r)).tocsr()

    def weighted_symmetry_defect(self) -> float:
        """max |(D_R L) - (D_R L)^T| / max |D_R L|."""
        M = (sp.diags(self.R) @ self.L).tocsr()
        D = M - M.T
        return float(abs(D).max() / abs(M).max())

    def to_unconjugated(self, v):
        return v / np.sqrt(self.R)[:, None] if np.ndim(v) == 2 else v / np.sqrt(self.R)

    def pencil_residual(self, tau: complex, psi) -> float:
        """||(-tau^2 + S + i tau a) psi|| / ||psi|| for a conjugated eigenvector."""
        r = -tau**2 * psi + self.S @ psi + 1j * tau * self.a * psi
        return float(np.linalg.norm(r) / np.linalg.norm(psi))


def assemble_mode(k: int, profile: Optional[SurfaceProfile], a, N: Optional[int] = None,
                  ppk: int = 40, enforce_resolution: bool = True) -> ModeOperator:
    """Build the conjugated mode operator; N defaults to ``ppk * max(k, 1)``."""
    if N is None:
        N = ppk * max(int(k), 1)
    if enforce_resolution and N < 40 * k:
        raise ResolutionError(f"N={N} below 40 points per unit k (k={k})")
    z = np.arange(N) * (TWO_PI / N)
    D2 = periodic_second_difference(N)
    if profile is None:
        R = np.ones(N)
        W = np.ones(N)
        V1 = np.zeros(N)
    else:
        vals = profile.eval(z)
        R, W = vals.R, vals.W
        V1 = profile.subpotential(z)
    S = (-D2 + sp.diags(V1 + k * k * W)).tocsr()
    return ModeOperator(int(k), N, z, S, np.asarray(a(z), dtype=float), R, W)


@dataclass
class Eigenpair:
    tau: complex
    psi: np.ndarray
    residual: float
    converged: bool


def _shift_invert_operator(op: ModeOperator, sigma: complex):
    N = op.N
    K = (op.S + sp.diags(1j * sigma * op.a - sigma**2)).tocsc()
    lu = spla.splu(K)
    ia = 1j * op.a

    def mv(v):
        vp, vf = v[:N], v[N:]
        x = lu.solve(vf - (ia - sigma) * vp)
        return np.concatenate([x, vp + sigma * x])

    return spla.LinearOperator((2 * N, 2 * N), matvec=mv, dtype=complex)


def qep_eigs(op: ModeOperator, sigma: complex, n_eigs: int = 24, tol: float = 1e-13,
             refine: bool = True) -> List[Eigenpair]:
    """Eigenvalues of the companion linearization nearest ``sigma`` by shift-invert Arnoldi."""
    A = _shift_invert_operator(op, sigma)
    vals, vecs = spla.eigs(A, k=n_eigs, which="LM", tol=tol, ncv=max(2 * n_eigs + 1, 60))
    taus = sigma + 1.0 / vals
    out = []
    for tau, v in zip(taus, vecs.T):
        psi = v[: op.N]
        if refine:
            tau, psi = _refine(op, tau, psi)
        res = op.pencil_residual(tau, psi)
        out.append(Eigenpair(complex(tau), psi / np.linalg.norm(psi), res, True))
    return out


def _refine(op: ModeOperator, tau: complex, psi, steps: int = 2):
    """Newton/inverse-iteration polish of a pencil eigenpair."""
    for _ in range(steps):
        K = (op.S + sp.diags(1j * tau * op.a - tau**2)).tocsc()
        try:
            x = spla.spsolve(K, psi)
        except Exception:  # singular to working precision means already converged
            break
        psi = x / np.linalg.norm(x)
        num = np.vdot(psi, op.S @ psi)
        A = np.vdot(psi, op.a * psi)
        # tau^2 - i A tau - num = 0, root nearest the current tau
        disc = np.sqrt(-(A**2) + 4 * num)
        roots = ((1j * A + disc) / 2, (1j * A - disc) / 2)
        tau = min(roots, key=lambda r: abs(r - tau))
    return tau, psi


def qep_spectrum(op: ModeOperator, window: Optional[Tuple[float, float, float, float]] = None,
                 n_eigs: int = 24, return_pairs: bool = False):
    """Eigenvalues with Re tau in [re_lo, re_hi] and Im tau in [im_lo, im_hi].

    The window is covered by shifts spaced one unit apart along Re tau, each
    harvesting ``n_eigs`` Ritz values.  Defaults to ``[k-2, k+2] x [-0.1, 1.1]``.
    """
    k = op.k
    re_lo, re_hi, im_lo, im_hi = window or (k - 2.0, k + 2.0, -0.1, 1.1)
    shifts = np.arange(re_lo + 0.5, re_hi, 1.0)
    if shifts.size == 0:
        shifts = np.array([(re_lo + re_hi) / 2])
    found: List[Eigenpair] = []
    for s in shifts:
        for ep in qep_eigs(op, complex(s, (im_lo + im_hi) / 2), n_eigs=n_eigs):
            t = ep.tau
            if re_lo <= t.real <= re_hi and im_lo <= t.imag <= im_hi:
                if all(abs(t - f.tau) > 1e-7 * max(1.0, abs(t)) for f in found):
                    found.append(ep)
    found.sort(key=lambda e: (e.tau.real, e.tau.imag))
    if return_pairs:
        return found
    return [e.tau for e in found]


def qep_dense(op: ModeOperator):
    """All pencil eigenvalues by dense companion QZ (small N only)."""
    from scipy.linalg import eig

    N = op.N
    S = op.S.toarray()
    Z = np.zeros((N, N))
    I = np.eye(N)
    A = np.block([[Z, I], [S, 1j * np.diag(op.a)]])
    return eig(A, right=False)


def im_identity(op: ModeOperator, tau: complex, psi) -> float:
    """Im tau - <a psi, psi>/(2 ||psi||^2)."""
    return float(tau.imag - np.real(np.vdot(psi, op.a * psi)) / (2 * np.vdot(psi, psi).real))


def undamped_spectrum(op: ModeOperator, lo: float, hi: float):
    """Positive real tau = sqrt(lambda) for eigenvalues lambda of S_k in [lo^2, hi^2]."""
    lam = spla.eigsh(op.S, k=min(op.N - 2, 40), sigma=((lo + hi) / 2) ** 2, which="LM",
                     return_eigenvectors=False)
    tau = np.sqrt(np.clip(lam, 0, None))
    return np.sort(tau[(tau >= lo) & (tau <= hi)])


def match_quasimode(pred_tau: complex, spectrum: Sequence[complex], h: Optional[float] = None):
    """Nearest oracle eigenvalue to a predicted tau.  Returns (distance, nearest, h*distance)."""
    if len(spectrum) == 0:
        raise EmptyWindowError("no oracle eigenvalues in the window")
    spec = np.asarray(spectrum)
    i = int(np.argmin(np.abs(spec - pred_tau)))
    d = float(abs(spec[i] - pred_tau))
    return d, complex(spec[i]), (h * d if h is not None else None)


def fit_im_law(ks, im_taus):
    """Fit Im tau ~ c / log k; returns (c, relative spread of Im tau * log k)."""
    v = np.asarray(im_taus) * np.log(np.asarray(ks, float))
    c = float(np.mean(v))
    return c, float((v.max() - v.min()) / c)
