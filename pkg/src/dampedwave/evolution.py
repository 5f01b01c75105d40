"""Time-domain damped waves: per-mode evolution, 1D viscous damping and rate fits.

Both solvers write the equation as ``y' = A y`` for ``y = (w, w_t)`` with
``A = [[0, I], [-K, -C]]`` (K symmetric positive semidefinite, C symmetric
positive semidefinite damping) and advance it with the two-stage Gauss-Legendre
collocation method.  Gauss methods conserve quadratic invariants, so the
discrete energy ``E = (||w_t||^2 + <K w, w>)/2`` obeys

    E_{n+1} - E_n = -dt * sum_i b_i <C V_i, V_i>

exactly, ``V_i`` being the stage velocities.  That identity is what the
dissipation checks measure.

The 1D viscous problem is stiff (``C`` scales like ``1/dx^2``), so by default it
is propagated exactly with ``expm(dt A)``; the energy lost over a step is then
``y^T G y`` with ``G`` the integrated dissipation Gramian.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import TWO_PI
from .spectral_oracle import ModeOperator

log = logging.getLogger(__name__)

_S3 = np.sqrt(3.0)
GL_A = np.array([[0.25, 0.25 - _S3 / 6], [0.25 + _S3 / 6, 0.25]])
GL_B = np.array([0.5, 0.5])


class CFLError(ValueError):
    pass


class InsufficientDecayError(ValueError):
    pass


@dataclass
class DecayRecord:
    t: np.ndarray
    energy: np.ndarray
    dissipation_defect: float = 0.0      # max_n |E_{n+1} - E_n + D_n| / (E_0 dt)
    max_increase: float = 0.0            # max_n (E_{n+1} - E_n) / E_0
    fits: Dict[str, dict] = field(default_factory=dict)

    def to_rows(self):
        return np.column_stack([self.t, self.energy])


class GaussLegendre2:
    """Two-stage Gauss-Legendre stepper for ``y' = [[0, I], [-K, -C]] y``.

    The stage system is diagonalised through the Butcher matrix; each stage
    needs one sparse solve with ``(1 + d C) + d^2 K``, ``d = dt * lambda``.
    """

    def __init__(self, K, C, dt: float):
        self.K = sp.csr_matrix(K)
        self.C = sp.csr_matrix(C)
        self.n = self.K.shape[0]
        self.dt = dt
        lam, Q = np.linalg.eig(GL_A)
        self.lam, self.Q, self.Qinv = lam, Q, np.linalg.inv(Q)
        I = sp.identity(self.n, format="csc", dtype=complex)
        self.lus = []
        for l in lam:
            d = dt * l
            M = (I + d * self.C + d * d * self.K).tocsc()
            self.lus.append((d, spla.splu(M)))

    def _apply_A(self, w, v):
        return v, -(self.K @ w) - (self.C @ v)

    def _solve(self, i, b1, b2):
        """(I - d A) x = b."""
        d, lu = self.lus[i]
        x1 = lu.solve(d * b2 + b1 + d * (self.C @ b1))
        x2 = (x1 - b1) / d
        return x1, x2

    def step(self, w, v):
        """Advance one step; returns (w_new, v_new, stage velocities)."""
        Aw, Av = self._apply_A(w, v)
        # transformed stages: (I - dt lam_i A) Z_i = (Q^-1 1)_i A y
        q = self.Qinv @ np.ones(2)
        Z = [self._solve(i, q[i] * Aw, q[i] * Av) for i in range(2)]
        K = [(self.Q[j, 0] * Z[0][0] + self.Q[j, 1] * Z[1][0],
              self.Q[j, 0] * Z[0][1] + self.Q[j, 1] * Z[1][1]) for j in range(2)]
        dt = self.dt
        w_new = w + dt * (GL_B[0] * K[0][0] + GL_B[1] * K[1][0])
        v_new = v + dt * (GL_B[0] * K[0][1] + GL_B[1] * K[1][1])
        stages_v = [v + dt * (GL_A[i, 0] * K[0][1] + GL_A[i, 1] * K[1][1]) for i in range(2)]
        return w_new, v_new, stages_v

    def energy(self, w, v, weight: float = 1.0) -> float:
        return 0.5 * weight * float(np.real(np.vdot(v, v) + np.vdot(w, self.K @ w)))

    def dissipation(self, stages_v, weight: float = 1.0) -> float:
        return self.dt * weight * float(sum(GL_B[i] * np.real(np.vdot(s, self.C @ s)) for i, s in enumerate(stages_v)))


def _run(stepper: GaussLegendre2, w0, v0, T_final: float, weight: float, n_samples: int = 400,
         keep: Sequence[float] = ()):
    """March to T_final; return DecayRecord plus snapshots at times in ``keep``."""
    dt = stepper.dt
    nsteps = int(np.ceil(T_final / dt - 1e-9))
    every = max(1, nsteps // n_samples)
    w, v = np.asarray(w0, dtype=complex), np.asarray(v0, dtype=complex)
    E = stepper.energy(w, v, weight)
    E0 = E
    ts, Es = [0.0], [E]
    worst_defect, worst_increase = 0.0, -np.inf
    keep = sorted(keep)
    snaps = {}
    ki = 0
    for n in range(1, nsteps + 1):
        w, v, stages = stepper.step(w, v)
        E_new = stepper.energy(w, v, weight)
        D = stepper.dissipation(stages, weight)
        if E0 > 0:
            worst_defect = max(worst_defect, abs(E_new - E + D) / (E0 * dt))
            worst_increase = max(worst_increase, (E_new - E) / E0)
        E = E_new
        t = n * dt
        while ki < len(keep) and t >= keep[ki] - 1e-12:
            snaps[keep[ki]] = (t, w.copy(), v.copy())
            ki += 1
        if n % every == 0 or n == nsteps:
            ts.append(t)
            Es.append(E)
    rec = DecayRecord(np.array(ts), np.array(Es), worst_defect, worst_increase)
    return rec, snaps, (w, v)


def resample_periodic(u, N: int):
    """Spectral (FFT) resampling of a periodic sample vector to N points."""
    u = np.asarray(u)
    M = u.size
    if M == N:
        return u.copy()
    U = np.fft.fft(u) / M
    V = np.zeros(N, dtype=complex)
    m = min(M, N) // 2
    V[:m] = U[:m]
    V[-m:] = U[-m:]
    return np.fft.ifft(V) * N


def evolve_mode(k: int, initial, T_final: float, op: ModeOperator, dt: Optional[float] = None,
                n_samples: int = 400, keep: Sequence[float] = ()):
    """Integrate ``w'' + S_k w + a w' = 0`` (conjugated mode equation).

    ``initial = (w0, w1)`` sampled on the operator grid.  Returns
    ``(DecayRecord, snapshots, final_state, stepper)``.
    """
    dt_max = 0.2 / max(k, 1)
    dt = dt_max if dt is None else dt
    if dt > dt_max * (1 + 1e-12):
        raise CFLError(f"dt={dt} exceeds 0.2/k={dt_max}")
    stepper = GaussLegendre2(op.S, sp.diags(op.a), dt)
    rec, snaps, final = _run(stepper, initial[0], initial[1], T_final, op.dz, n_samples, keep)
    return rec, snaps, final, stepper


def energy_norm(op: ModeOperator, w, v) -> float:
    """sqrt(||v||^2 + <S w, w>) in the dz inner product."""
    return float(np.sqrt(op.dz * np.real(np.vdot(v, v) + np.vdot(w, op.S @ w))))


def duhamel_check(op: ModeOperator, v, tau: complex, T_final: Optional[float] = None,
                  dt: Optional[float] = None, n_checks: int = 20):
    """Compare the evolution of ``(v, i tau v)`` with ``e^{i t tau} v``.

    The difference solves the damped equation forced by ``-e^{i t tau} P(tau) v``,
    so its energy norm is at most ``||P(tau) v|| (1 - e^{-gamma t}) / gamma`` with
    ``gamma = Im tau``.  ``P(tau) v`` is the discrete pencil residual on the
    operator grid.  Returns rows ``(t, difference, bound)``.
    """
    k = op.k
    T_final = np.log(abs(tau)) ** 2 if T_final is None else T_final
    dt = 0.1 / k if dt is None else dt
    Pv = -tau**2 * v + op.S @ v + 1j * tau * op.a * v
    r = float(np.sqrt(op.dz) * np.linalg.norm(Pv))
    gamma = tau.imag
    times = list(np.linspace(T_final / n_checks, T_final, n_checks))
    _, snaps, _, _ = evolve_mode(k, (v, 1j * tau * v), T_final, op, dt=dt, n_samples=10, keep=times)
    rows = []
    for t_req in times:
        t, w, wt = snaps[t_req]
        ph = np.exp(1j * t * tau)
        diff = energy_norm(op, w - ph * v, wt - 1j * tau * ph * v)
        bound = r * (1 - np.exp(-gamma * t)) / gamma if gamma > 0 else r * t
        rows.append((t, diff, bound))
    return np.array(rows), r


def viscous_operators(a, N: int, L: float = TWO_PI, boundary: str = "periodic"):
    """Divergence-form K = D+^T D+ and C = D+^T diag(a_half) D+ on a uniform grid."""
    if boundary == "periodic":
        dx = L / N
        x = np.arange(N) * dx
        D = sp.diags([-np.ones(N), np.ones(N - 1), [1.0]], [0, 1, -(N - 1)], shape=(N, N)) / dx
    elif boundary == "dirichlet":
        dx = L / (N + 1)
        x = (np.arange(N) + 1) * dx
        # N + 1 edges between 0, x_1..x_N, L
        D = sp.diags([np.ones(N), -np.ones(N)], [0, -1], shape=(N + 1, N)) / dx
    else:
        raise ValueError(f"unknown boundary {boundary!r}")
    n_edges = D.shape[0]
    x_half = (np.arange(n_edges) + 0.5) * dx if boundary == "periodic" else np.arange(n_edges) * dx + dx / 2
    a_half = np.asarray(a(x_half), dtype=float)
    K = (D.T @ D).tocsr()
    C = (D.T @ sp.diags(a_half) @ D).tocsr()
    return x, dx, K, C, D, a_half


def _propagator_and_gramian(A, Q, dt):
    """Return (expm(dt A), int_0^dt expm(s A)^T Q expm(s A) ds) for a stable real A.

    The integral solves ``A^T G + G A = M^T Q M - Q``; A must have no pair of
    eigenvalues summing to zero.
    """
    from scipy.linalg import expm, solve_continuous_lyapunov

    M = expm(dt * A)
    if not np.any(Q):
        return M, np.zeros_like(Q)
    G = solve_continuous_lyapunov(A.T, M.T @ Q @ M - Q)
    return M, 0.5 * (G + G.T)


def evolve_overdamped(a, initial, T_final: float, N: int = 256, dt: Optional[float] = None,
                      L: float = TWO_PI, boundary: str = "periodic", n_samples: int = 400,
                      method: str = "expm", stiff_factor: float = 4.0):
    """Integrate ``u_tt - u_xx - (a u_xt)_x = 0``; ``initial = (u0, u1)`` callables or arrays.

    ``method="expm"`` (default) propagates the semi-discrete system exactly with a
    dense matrix exponential, which removes the viscous stiffness altogether; the
    energy lost over each sample interval is the Gramian of ``C`` along the flow,
    obtained from a Lyapunov solve.
    ``method="gauss"`` uses the Gauss-Legendre stepper with dt capped at
    ``stiff_factor / rho(C)`` so the stiffest viscous modes are damped by the
    scheme rather than reflected (Gauss methods are not L-stable).
    """
    if T_final <= 0 or (dt is not None and dt <= 0):
        raise ValueError("T_final and dt must be positive")
    x, dx, K, C, D, a_half = viscous_operators(a, N, L, boundary)
    u0, u1 = (np.asarray(f(x) if callable(f) else f, dtype=float) for f in initial)
    if method == "gauss":
        rho = 4.0 * float(np.max(a_half, initial=0.0)) / dx**2
        dt_auto = min(dx, stiff_factor / rho) if rho > 0 else dx
        stepper = GaussLegendre2(K, C, dt_auto if dt is None else dt)
        rec, _, _ = _run(stepper, u0, u1, T_final, dx, n_samples)
        return rec
    if method != "expm":
        raise ValueError(f"unknown method {method!r}")
    Kd, Cd = K.toarray(), C.toarray()
    if boundary == "periodic":
        # constants are a null direction of K and C; the mean of u_t is conserved
        if abs(np.mean(u1)) > 1e-12 * max(1.0, np.max(np.abs(u1))):
            raise ValueError("u1 must have zero mean on the circle (the mean of u_t is conserved)")
        from scipy.linalg import null_space

        P = null_space(np.ones((1, Kd.shape[0])))
        Kd, Cd = P.T @ Kd @ P, P.T @ Cd @ P
        u0, u1 = P.T @ u0, P.T @ u1
    n = Kd.shape[0]
    A = np.block([[np.zeros((n, n)), np.eye(n)], [-Kd, -Cd]])
    Qdiss = np.zeros_like(A)
    Qdiss[n:, n:] = Cd
    dt = T_final / n_samples if dt is None else dt
    M, G = _propagator_and_gramian(A, Qdiss, dt)
    if not np.all(np.isfinite(M)):
        raise FloatingPointError("matrix exponential overflowed")
    Mq = np.zeros_like(A)
    Mq[:n, :n] = Kd
    Mq[n:, n:] = np.eye(n)

    def energy(y):
        return 0.5 * dx * float(y @ Mq @ y)

    y = np.concatenate([u0, u1])
    E = E0 = energy(y)
    nsteps = int(np.ceil(T_final / dt - 1e-9))
    ts, Es = [0.0], [E]
    worst_defect, worst_increase = 0.0, -np.inf
    for j in range(1, nsteps + 1):
        D_j = dx * float(y @ G @ y)
        y = M @ y
        E_new = energy(y)
        if E0 > 0:
            worst_defect = max(worst_defect, abs(E_new - E + D_j) / (E0 * dt))
            worst_increase = max(worst_increase, (E_new - E) / E0)
        E = E_new
        ts.append(j * dt)
        Es.append(E)
    return DecayRecord(np.array(ts), np.array(Es), worst_defect, worst_increase)


def overdamped_spectral_abscissa(a, N: int = 256, L: float = TWO_PI, boundary: str = "periodic",
                                 resolved_fraction: float = 0.125) -> float:
    """Largest Re lambda over resolved modes of the semi-discrete viscous generator.

    Modes near the grid Nyquist frequency have vanishing discrete group velocity
    and never reach the damping; only modes whose dominant Fourier index is below
    ``resolved_fraction * N`` count.  The constant mode is excluded.
    """
    x, dx, K, C, D, a_half = viscous_operators(a, N, L, boundary)
    n = K.shape[0]
    A = np.block([[np.zeros((n, n)), np.eye(n)], [-K.toarray(), -C.toarray()]])
    lam, V = np.linalg.eig(A)
    j = np.argmax(np.abs(np.fft.fft(V[:n], axis=0)), axis=0)
    dominant = np.minimum(j, n - j)
    keep = dominant < resolved_fraction * n
    if boundary == "periodic":
        # the constant mode is a Jordan block at 0, split by roundoff to +-O(sqrt(eps))
        keep &= dominant > 0
    return float(lam[keep].real.max())


def _window(record: DecayRecord, floor: float, skip: float):
    E0 = record.energy[0]
    mask = (record.t >= skip) & (record.energy > floor * E0)
    return record.t[mask], record.energy[mask]


def fit_decay(record: DecayRecord, model: str = "exp", floor: float = 1e-12, skip: float = 0.0,
              tau_imag: Optional[float] = None) -> dict:
    """Least-squares fit of log E(t).

    ``exp``: log E = b - t/C.  ``subexp_sqrt``: log E = b - 2 c sqrt(t).
    ``mode``: slope fixed to -2 Im tau (needs ``tau_imag``); reports the offset
    and residual.
    """
    t, E = _window(record, floor, skip)
    if t.size < 50:
        raise InsufficientDecayError(f"only {t.size} samples in the fit window")
    if E[-1] / E[0] > 0.5:
        raise InsufficientDecayError("energy decayed by less than a factor 2")
    y = np.log(E)
    if model == "exp":
        slope, b = np.polyfit(t, y, 1)
        pred = b + slope * t
        out = {"rate": float(-slope), "C": float(-1 / slope), "offset": float(b)}
    elif model == "subexp_sqrt":
        s = np.sqrt(t)
        slope, b = np.polyfit(s, y, 1)
        pred = b + slope * s
        out = {"c": float(-slope / 2), "offset": float(b)}
    elif model == "mode":
        if tau_imag is None:
            raise ValueError("mode fit needs tau_imag")
        b = float(np.mean(y + 2 * tau_imag * t))
        pred = b - 2 * tau_imag * t
        out = {"rate": 2 * tau_imag, "offset": b}
    else:
        raise ValueError(f"unknown model {model!r}")
    out["residual"] = float(np.sqrt(np.mean((y - pred) ** 2)) / max(1e-300, np.ptp(y)))
    out["n"] = int(t.size)
    record.fits[model] = out
    return out


def sobolev_norm(data, s: float, k: int) -> float:
    """Per-mode Sobolev norm with multiplier ``Lambda = (1 + k^2 + |D_z|^2)^(1/2)``.

    ``data`` is one sampled function (returns its H^s norm) or a pair
    ``(u0, u1)`` (returns the H^(1+s) x H^s norm).
    """
    if isinstance(data, (tuple, list)):
        u0, u1 = data
        return float(np.sqrt(sobolev_norm(u0, 1 + s, k) ** 2 + sobolev_norm(u1, s, k) ** 2))
    u = np.asarray(data)
    n = u.size
    xi = np.fft.fftfreq(n, d=1.0 / n)
    U = np.fft.fft(u) / np.sqrt(n)
    weight = (1.0 + k * k + xi**2) ** s
    return float(np.sqrt(np.sum(weight * np.abs(U) ** 2) * TWO_PI / n))


@dataclass
class ModeDecay:
    """One member of the quasimode family: k, fitted energy rate, E_k(0)/||data||^2."""

    k: int
    rate: float
    energy_ratio: float


def fit_rate_law(family: Sequence[ModeDecay]):
    """Fit rate = c / log k; returns (c, relative spread of rate * log k)."""
    v = np.array([m.rate * np.log(m.k) for m in family])
    c = float(np.mean(v))
    return c, float(np.ptp(v) / c)


def mode_envelope(family: Sequence[ModeDecay], t, logk_max: float = 600.0, n_logk: int = 4000):
    """Lower envelope f(t) = sup over the family of E_k(t) / ||data_k||^2, in log form.

    Measured members contribute ``log ratio_k - rate_k t``.  Beyond the measured
    range the family is continued with the fitted laws ``rate = c / log k`` and
    ``log ratio = alpha - 2 delta log k``; this is what makes the sup over k reach
    every t.  Returns a dict with ``log_f``, the fitted ``c`` and ``delta`` and
    the index of the k that attains the sup at each t.
    """
    t = np.atleast_1d(np.asarray(t, float))
    ks = np.array([m.k for m in family], float)
    c, spread = fit_rate_law(family)
    slope, alpha = np.polyfit(np.log(ks), np.log([m.energy_ratio for m in family]), 1)
    delta = -slope / 2
    measured = np.array([np.log(m.energy_ratio) - m.rate * t for m in family])
    logk = np.linspace(np.log(ks.max()), logk_max, n_logk)
    model = alpha - 2 * delta * logk[None, :] - c * t[:, None] / logk[None, :]
    log_f = np.maximum(measured.max(axis=0), model.max(axis=1))
    argmax_logk = np.where(measured.max(axis=0) >= model.max(axis=1),
                           np.log(ks[np.argmax(measured, axis=0)]), logk[np.argmax(model, axis=1)])
    if np.any(argmax_logk >= logk_max - 1e-9):
        raise ValueError("envelope sup reached logk_max; enlarge it")
    return {"t": t, "log_f": log_f, "c": c, "spread": spread, "delta": float(delta),
            "alpha": float(alpha), "argmax_logk": argmax_logk}


def fit_envelope(t, log_f):
    """Fit log f = b - c sqrt(t); returns c, b, the lower-bound constant C and fit residuals.

    ``C`` is the smallest constant with ``f(t) >= C^-1 exp(-c sqrt t)`` on the grid.
    The residual of a pure exponential fit is reported for comparison.
    """
    t = np.asarray(t, float)
    s = np.sqrt(t)
    slope, b = np.polyfit(s, log_f, 1)
    c = float(-slope)
    C = float(np.exp(np.max(-c * s - log_f)))
    span = max(1e-300, np.ptp(log_f))
    res_sqrt = float(np.sqrt(np.mean((log_f - (b + slope * s)) ** 2)) / span)
    e_slope, e_b = np.polyfit(t, log_f, 1)
    res_exp = float(np.sqrt(np.mean((log_f - (e_b + e_slope * t)) ** 2)) / span)
    return {"c": c, "offset": float(b), "C": C, "residual_sqrt": res_sqrt, "residual_exp": res_exp}


def random_bump_profiles(n: int, seed: int = 0):
    """Random admissible single-bump damping profiles on the circle."""
    from .geometry import DampingProfile, Domain

    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        out.append(DampingProfile(z_a=float(rng.uniform(0.1, 0.5)), w=float(rng.uniform(0.3, 0.8)),
                                  k_van=int(rng.integers(3, 9)), kind="bump",
                                  level=float(rng.uniform(0.5, 2.0)), center=float(rng.uniform(0, TWO_PI)),
                                  domain=Domain.circle_z))
    return out


def smooth_mean_zero_data(x, seed: int = 0, modes: int = 4):
    """Random trigonometric polynomial with zero mean (the mean of u_t is conserved)."""
    rng = np.random.default_rng(seed)
    f = np.zeros_like(x, dtype=float)
    for m in range(1, modes + 1):
        f += rng.normal() * np.cos(m * x) + rng.normal() * np.sin(m * x)
    return f
