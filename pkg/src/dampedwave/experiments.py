"""Scenario runners shared by the CLI, the scripts and the acceptance tests.

Each runner returns an :class:`Outcome`: a JSON-able summary, named CSV
tables and a dict of pass/fail checks.
"""
from __future__ import annotations

import functools
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import evolution, hfio, resolvent
from .geometry import ZERO_DAMPING, DampingProfile, SurfaceProfile
from .quantize import fit_power, quasi_eigenvalue
from .quasimode import build_quasimode
from .spectral_oracle import assemble_mode, match_quasimode, qep_spectrum
from .wkb import coeff_c1

log = logging.getLogger(__name__)

SCENARIOS = ("quasimode_sweep", "oracle_sweep", "decay_subexp", "decay_overdamped",
             "resolvent_scan", "egorov_suite")


@dataclass
class Outcome:
    scenario: str
    summary: dict = field(default_factory=dict)
    tables: Dict[str, Tuple[Sequence[str], List[tuple]]] = field(default_factory=dict)
    checks: Dict[str, bool] = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def _timed(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kw):
        t0 = time.perf_counter()
        out = fn(*args, **kw)
        out.seconds = time.perf_counter() - t0
        return out

    return wrapper


@_timed
def quasimode_sweep(k_list=(50, 100, 200, 400), a: Optional[DampingProfile] = None,
                    profile: Optional[SurfaceProfile] = None, detune_gaps: float = 10.0,
                    min_slope: float = 1.8, min_ratio: float = 1e3, ratio_from_k: int = 100) -> Outcome:
    """Residuals of tuned and detuned quasimodes and the fitted order in h."""
    a = a or DampingProfile()
    profile = profile or SurfaceProfile()
    rows = []
    for k in k_list:
        q = build_quasimode(k, a, profile)
        qd = build_quasimode(k, a, profile, detune_gaps=detune_gaps)
        rows.append((k, 1.0 / k, q.mu.real, q.mu.imag, q.residual_L2, qd.residual_L2,
                     qd.residual_L2 / q.residual_L2))
    h = np.array([r[1] for r in rows])
    res = np.array([r[4] for r in rows])
    slope = fit_power(h, res)
    ratios = {r[0]: r[6] for r in rows}
    out = Outcome("quasimode_sweep")
    out.summary = {"k": list(k_list), "slope": slope, "residuals": res.tolist(), "detune_gaps": detune_gaps,
                   "control_ratios": ratios}
    out.tables["residuals"] = (("k", "h", "re_mu", "im_mu", "residual", "residual_detuned", "ratio"), rows)
    out.checks["slope"] = bool(slope >= min_slope)
    out.checks["negative_control"] = all(v >= min_ratio for k, v in ratios.items() if k >= ratio_from_k)
    return out


@_timed
def oracle_sweep(k_list=(50, 100, 200), a: Optional[DampingProfile] = None,
                 profile: Optional[SurfaceProfile] = None, band_k=(50, 100, 200, 400, 800, 1600),
                 rel_tol: float = 0.5, drift_k=(50,), invariant_k=(50, 100)) -> Outcome:
    """Predicted Im mu law against the brute-force pencil spectrum, plus oracle invariants."""
    a = a or DampingProfile()
    profile = profile or SurfaceProfile()
    c1 = coeff_c1(a, 0.0, profile)
    out = Outcome("oracle_sweep")
    band_rows = []
    for k in band_k:
        for variant in ("full", "leading"):
            qe = quasi_eigenvalue(k, a, profile, variant=variant)
            band_rows.append((k, variant, qe.E, qe.F, qe.scaled_im))
    scaled = [r[4] for r in band_rows]
    out.checks["im_band"] = bool(min(scaled) >= c1 / 4 and max(scaled) <= 4 * c1)

    rows = []
    ok = True
    for k in k_list:
        qe = quasi_eigenvalue(k, a, profile, variant="full")
        qe_lead = quasi_eigenvalue(k, a, profile, variant="leading")
        op = assemble_mode(k, profile, a)
        spec = qep_spectrum(op, window=(qe.tau.real - 1.5, qe.tau.real + 1.5, -0.1, a.sup / 2 + 0.1))
        d, nearest, _ = match_quasimode(qe.tau, spec, 1.0 / k)
        rel = abs(nearest.imag - qe.tau.imag) / qe.tau.imag
        rel_lead = abs(nearest.imag - qe_lead.tau.imag) / qe_lead.tau.imag
        ok &= rel <= rel_tol
        rows.append((k, qe.tau.real, qe.tau.imag, qe_lead.tau.imag, nearest.real, nearest.imag, rel, rel_lead))
    out.checks["oracle_im"] = bool(ok)

    # structural invariants
    inv_rows = []
    n_total = n_in = 0
    zero_max_im = 0.0
    drift_max = 0.0
    for k in invariant_k:
        op = assemble_mode(k, profile, a)
        taus = np.array(qep_spectrum(op, window=(k - 2.0, k + 2.0, -1.0, a.sup)))
        n_total += taus.size
        n_in += int(np.sum((taus.imag >= -1e-9) & (taus.imag <= a.sup / 2 + 1e-9)))
        op0 = assemble_mode(k, profile, ZERO_DAMPING)
        t0 = np.array(qep_spectrum(op0, window=(k - 2.0, k + 2.0, -1.0, 1.0)))
        zero_max_im = max(zero_max_im, float(np.max(np.abs(t0.imag))) if t0.size else 0.0)
        inv_rows.append((k, taus.size, float(taus.imag.min()), float(taus.imag.max()), t0.size))
    for k in drift_k:
        t1 = np.array(qep_spectrum(assemble_mode(k, profile, a, ppk=40)))
        t2 = np.array(qep_spectrum(assemble_mode(k, profile, a, ppk=80)))
        drift = max(float(np.min(np.abs(t2 - t))) for t in t1)
        drift_max = max(drift_max, drift / k)
    out.checks["im_invariant_all"] = n_in == n_total and n_total > 0
    out.checks["undamped_real"] = zero_max_im <= 1e-8
    out.checks["grid_drift"] = drift_max <= 1e-6
    out.summary = {"c1": c1, "band": [c1 / 4, 4 * c1], "scaled_im_range": [min(scaled), max(scaled)],
                   "oracle_rel_err": {r[0]: r[6] for r in rows},
                   "oracle_rel_err_leading": {r[0]: r[7] for r in rows},
                   "n_eigs": n_total, "n_in_band": n_in, "undamped_max_abs_im": zero_max_im,
                   "grid_drift_over_k": drift_max}
    out.tables["im_law"] = (("k", "variant", "E", "F", "im_mu_log_over_h"), band_rows)
    out.tables["oracle"] = (("k", "re_tau_pred", "im_tau_pred", "im_tau_pred_leading", "re_tau_oracle",
                             "im_tau_oracle", "rel_err", "rel_err_leading"), rows)
    out.tables["invariants"] = (("k", "n_eigs", "min_im", "max_im", "n_undamped"), inv_rows)
    return out


@_timed
def decay_subexp(k_list=(50, 100, 200, 400), a: Optional[DampingProfile] = None,
                 profile: Optional[SurfaceProfile] = None, delta: float = 0.5, T_final: float = 12.0,
                 ppk: int = 20, t_range=(10.0, 1e4), n_t: int = 200, max_spread: float = 0.3,
                 rate_tol: float = 0.2) -> Outcome:
    """Per-mode energy decay of quasimode data and the sub-exponential envelope."""
    a = a or DampingProfile()
    profile = profile or SurfaceProfile()
    family, rows, traj = [], [], []
    ok_rate = True
    worst_defect = 0.0
    for k in k_list:
        q = build_quasimode(k, a, profile)
        op = assemble_mode(k, profile, a, ppk=ppk, enforce_resolution=False)
        v = evolution.resample_periodic(q.u, op.N)
        v /= np.sqrt(op.dz) * np.linalg.norm(v)
        data = (v, 1j * q.tau * v)
        rec, _, _, _ = evolution.evolve_mode(k, data, T_final, op)
        fit = evolution.fit_decay(rec, "exp")
        norm2 = evolution.sobolev_norm(data, delta, k) ** 2
        ratio = rec.energy[0] / norm2
        family.append(evolution.ModeDecay(k, fit["rate"], ratio))
        pred = 2 * q.tau.imag
        ok_rate &= abs(fit["rate"] - pred) <= rate_tol * pred
        worst_defect = max(worst_defect, rec.dissipation_defect)
        rows.append((k, q.tau.real, q.tau.imag, fit["rate"], pred, fit["rate"] * np.log(k), ratio,
                     rec.dissipation_defect))
        traj += [(k, t, E) for t, E in zip(rec.t, rec.energy)]
    c, spread = evolution.fit_rate_law(family)
    t = np.geomspace(*t_range, n_t)
    env = evolution.mode_envelope(family, t)
    efit = evolution.fit_envelope(t, env["log_f"])
    out = Outcome("decay_subexp")
    out.summary = {"rate_law_c": c, "rate_spread": spread, "delta": delta, "envelope": efit,
                   "amplitude_delta_fit": env["delta"], "max_dissipation_defect": worst_defect}
    out.tables["rates"] = (("k", "re_tau", "im_tau", "rate_fit", "rate_pred", "rate_log_k",
                            "energy_ratio", "dissipation_defect"), rows)
    out.tables["trajectories"] = (("k", "t", "E"), traj)
    out.tables["envelope"] = (("t", "sqrt_t", "log_f", "argmax_log_k"),
                              list(zip(t, np.sqrt(t), env["log_f"], env["argmax_logk"])))
    out.checks["rate_matches_mode"] = bool(ok_rate)
    out.checks["rate_spread"] = bool(spread <= max_spread)
    out.checks["envelope_finite_c"] = bool(np.isfinite(efit["c"]) and efit["c"] > 0 and np.isfinite(efit["C"]))
    out.checks["envelope_beats_exponential"] = bool(efit["residual_sqrt"] < efit["residual_exp"])
    out.checks["dissipation_identity"] = bool(worst_defect <= 1e-8)
    return out


@_timed
def decay_overdamped(n_profiles: int = 5, seed: int = 0, N_list=(256, 512), refine_tol: float = 0.05,
                     decades: float = 4.0, T_max: float = 2000.0) -> Outcome:
    """Viscous 1D runs over random bump dampings on the circle."""
    rows = []
    ok_refine = True
    worst_defect, worst_increase = 0.0, -np.inf
    rates = []
    for i, p in enumerate(evolution.random_bump_profiles(n_profiles, seed)):
        ab = evolution.overdamped_spectral_abscissa(p, N_list[0])
        T = min(T_max, decades * np.log(10) / (-2 * ab))
        fits = []
        for N in N_list:
            rec = evolution.evolve_overdamped(
                p, (lambda x: 0 * x, lambda x, i=i: evolution.smooth_mean_zero_data(x, seed=seed + i)),
                T_final=T, N=N)
            f = evolution.fit_decay(rec, "exp", skip=T / 3)
            fits.append(f["rate"])
            worst_defect = max(worst_defect, rec.dissipation_defect)
            worst_increase = max(worst_increase, rec.max_increase)
        rel = abs(fits[0] - fits[-1]) / fits[-1]
        ok_refine &= rel <= refine_tol
        rates.append(fits[-1])
        rows.append((i, p.center, p.z_a, p.w, p.k_van, p.level, fits[0], fits[-1], rel, -2 * ab))
    out = Outcome("decay_overdamped")
    out.summary = {"rates": rates, "min_rate": float(min(rates)), "max_dissipation_defect": worst_defect,
                   "max_energy_increase": worst_increase}
    out.tables["rates"] = (("profile", "center", "z_a", "w", "k_van", "level", "rate_coarse", "rate_fine",
                            "refine_rel", "rate_spectral"), rows)
    out.checks["refinement"] = bool(ok_refine)
    out.checks["positive_rate"] = bool(min(rates) > 0)
    out.checks["dissipation_identity"] = bool(worst_defect <= 1e-8)
    out.checks["monotone"] = bool(worst_increase <= 1e-10)
    return out


@_timed
def resolvent_scan(h_list=resolvent.DEFAULT_H, flat_band=(0.8, 1.15), barrier_min: float = 1.2,
                   seed: int = 0) -> Outcome:
    """s_min scans for all variants plus the cutoff estimate with an absorbing potential."""
    out = Outcome("resolvent_scan")
    rows, summ = [], {}
    worst = 0.0
    for v in resolvent.VARIANTS:
        sc = resolvent.scan_inverse_norm(v, h_list, seed=seed)
        rows += list(sc.rows())
        summ[v] = sc.to_summary()
        worst = max(worst, *sc.apriori.values())
        out.checks[f"smooth_{v}"] = bool(sc.smoothness_ratio <= 10)
    cut = {"free": resolvent.cutoff_resolvent_estimate(h_list, barrier=False),
           "barrier": resolvent.cutoff_resolvent_estimate(h_list, barrier=True)}
    out.summary = {"variants": summ, "cutoff": cut, "apriori_max": worst}
    out.tables["smin"] = (("variant", "re_z", "im_z", "h", "s_min"), rows)
    out.tables["exponents"] = (("variant", "nu", "nu_err", "nu_log_corrected"),
                               [(v, s["nu"], s["nu_err"], s["nu_log_corrected"]) for v, s in summ.items()])
    nu_flat = summ["viscous_flat"]["nu"]
    out.checks["flat_exponent"] = bool(flat_band[0] <= nu_flat <= flat_band[1])
    out.checks["barrier_exponent"] = bool(summ["viscous_barrier"]["nu"] >= barrier_min)
    out.checks["apriori"] = bool(worst <= 1e-8)
    return out


@_timed
def egorov_suite(h_list=(0.1, 0.05, 0.025), N: int = 256, tol: float = 1e-8, seed: int = 0) -> Outcome:
    """Exact conjugation, unitarity and group law of the oscillator propagator."""
    rng = np.random.default_rng(seed)
    rows = []
    for h in h_list:
        basis = hfio.make_basis(N, h)
        x0, xi0 = rng.uniform(-0.5, 0.5, 2)
        f = hfio.coherent_state(basis.x, x0, xi0, h)
        rows.append((h, hfio.egorov_check(f, h, basis), hfio.unitarity_defect(0.7, f, basis),
                     hfio.group_law_defect(0.4, 0.9, f, basis)))
    out = Outcome("egorov_suite")
    ego = [r[1] for r in rows]
    out.summary = {"egorov": ego, "unitarity": [r[2] for r in rows], "group_law": [r[3] for r in rows]}
    out.tables["egorov"] = (("h", "egorov_residual", "unitarity_defect", "group_law_defect"), rows)
    out.checks["egorov"] = bool(max(ego) <= tol)
    # non-growing in h up to roundoff
    out.checks["egorov_non_growing"] = bool(all(b <= 10 * max(a_, 1e-14) for a_, b in zip(ego, ego[1:])))
    out.checks["unitarity"] = bool(max(r[2] for r in rows) <= tol)
    out.checks["group_law"] = bool(max(r[3] for r in rows) <= tol)
    return out


RUNNERS = {
    "quasimode_sweep": quasimode_sweep,
    "oracle_sweep": oracle_sweep,
    "decay_subexp": decay_subexp,
    "decay_overdamped": decay_overdamped,
    "resolvent_scan": resolvent_scan,
    "egorov_suite": egorov_suite,
}
