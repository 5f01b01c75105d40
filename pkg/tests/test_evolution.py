import numpy as np
import pytest

from dampedwave.evolution import (
    CFLError,
    DecayRecord,
    InsufficientDecayError,
    ModeDecay,
    duhamel_check,
    evolve_mode,
    evolve_overdamped,
    fit_decay,
    fit_envelope,
    fit_rate_law,
    mode_envelope,
    overdamped_spectral_abscissa,
    random_bump_profiles,
    resample_periodic,
    smooth_mean_zero_data,
    sobolev_norm,
)
from dampedwave.geometry import DampingProfile, Domain, SurfaceProfile, check_damping_regularity
from dampedwave.quasimode import build_quasimode
from dampedwave.spectral_oracle import assemble_mode

PROFILE = SurfaceProfile()
A_DEF = DampingProfile()
ZERO = DampingProfile(kind="constant", level=0.0)
BUMP = DampingProfile(z_a=0.3, w=0.5, k_van=6, kind="bump", center=2.0, domain=Domain.circle_z)


@pytest.fixture(scope="module")
def mode50():
    q = build_quasimode(50, A_DEF)
    op = assemble_mode(50, PROFILE, A_DEF)
    v = resample_periodic(q.u, op.N)
    return q, op, v


def test_synthetic_exponential_fit():
    t = np.linspace(0, 20, 200)
    out = fit_decay(DecayRecord(t, np.exp(-t)), "exp")
    assert out["C"] == pytest.approx(1.0, abs=1e-6)


def test_synthetic_sqrt_fit():
    t = np.linspace(0, 400, 200)
    out = fit_decay(DecayRecord(t, 3 * np.exp(-2 * 0.7 * np.sqrt(t))), "subexp_sqrt")
    assert out["c"] == pytest.approx(0.7, rel=1e-10)


def test_fit_preconditions():
    t = np.linspace(0, 1, 200)
    with pytest.raises(InsufficientDecayError):
        fit_decay(DecayRecord(t, np.exp(-0.1 * t)))
    t = np.linspace(0, 20, 30)
    with pytest.raises(InsufficientDecayError):
        fit_decay(DecayRecord(t, np.exp(-t)))


def test_sobolev_s0_is_L2():
    z = np.arange(256) * 2 * np.pi / 256
    u = np.exp(np.cos(z)) + 1j * np.sin(3 * z)
    l2 = np.sqrt(np.sum(np.abs(u) ** 2) * 2 * np.pi / 256)
    assert sobolev_norm(u, 0.0, 40) == pytest.approx(l2, rel=1e-13)


def test_sobolev_doubling_k():
    z = np.arange(512) * 2 * np.pi / 512
    u = np.exp(np.cos(z))
    assert sobolev_norm(u, 1.0, 200) / sobolev_norm(u, 1.0, 100) == pytest.approx(2.0, rel=1e-3)


def test_sobolev_quasimode_scaling():
    delta, ratios = 0.5, []
    for k in (50, 100):
        q = build_quasimode(k, A_DEF)
        n2 = sobolev_norm((q.u, 1j * q.tau * q.u), delta, k) ** 2
        ratios.append(n2 / abs(q.tau) ** (2 + 2 * delta))
    assert 0.5 < ratios[1] / ratios[0] < 2.0


def test_cfl_guard(mode50):
    _, op, v = mode50
    with pytest.raises(CFLError):
        evolve_mode(50, (v, 0 * v), 1.0, op, dt=0.01)


def test_undamped_mode_conserves_energy(mode50):
    _, _, v = mode50
    op = assemble_mode(50, PROFILE, ZERO)
    rec, *_ = evolve_mode(50, (v, 50j * v), 50.0, op, n_samples=100)
    assert np.ptp(rec.energy) <= 1e-8 * rec.energy[0]


def test_dissipation_identity_and_monotone(mode50):
    q, op, v = mode50
    rec, *_ = evolve_mode(50, (v, 1j * q.tau * v), 5.0, op, n_samples=50)
    assert rec.dissipation_defect <= 1e-8
    assert rec.max_increase <= 1e-10


def test_duhamel_bound(mode50):
    q, op, v = mode50
    rows, r = duhamel_check(op, v, q.tau, n_checks=5)
    assert np.all(rows[:, 1] <= rows[:, 2])
    assert r < 1.0


def test_overdamped_undamped_conservative():
    rec = evolve_overdamped(ZERO, (lambda x: 0 * x, lambda x: np.sin(x) + 0.3 * np.cos(2 * x)), 20.0, N=128)
    assert np.ptp(rec.energy) <= 1e-8 * rec.energy[0]


def test_overdamped_bump_decays_and_refines():
    assert check_damping_regularity(BUMP, np.linspace(0, 2 * np.pi, 4001)).ok
    rates = []
    for N in (128, 256):
        gap = -overdamped_spectral_abscissa(BUMP, N)
        T = 4 * np.log(10) / (2 * gap)
        data = (lambda x: 0 * x, lambda x: smooth_mean_zero_data(x, seed=3))
        rec = evolve_overdamped(BUMP, data, T, N=N)
        assert rec.dissipation_defect <= 1e-8
        assert rec.max_increase <= 1e-10
        rates.append(fit_decay(rec, "exp", skip=T / 4)["rate"])
    assert rates[0] > 0
    assert abs(rates[1] - rates[0]) <= 0.05 * rates[1]


def test_overdamped_gauss_path_agrees():
    data = (lambda x: 0 * x, lambda x: np.sin(x))
    e1 = evolve_overdamped(BUMP, data, 2.0, N=64).energy[-1]
    e2 = evolve_overdamped(BUMP, data, 2.0, N=64, method="gauss").energy[-1]
    assert e2 == pytest.approx(e1, rel=1e-3)


def test_overdamped_validation():
    with pytest.raises(ValueError):
        evolve_overdamped(BUMP, (lambda x: 0 * x, lambda x: 1 + 0 * x), 1.0, N=64)
    with pytest.raises(ValueError):
        evolve_overdamped(BUMP, (lambda x: 0 * x, np.sin), -1.0, N=64)


def test_random_profiles_admissible():
    grid = np.linspace(0, 2 * np.pi, 8001)
    for a in random_bump_profiles(5, seed=0):
        assert check_damping_regularity(a, grid).ok


def test_envelope_on_synthetic_family():
    ks = [50, 100, 200, 400]
    fam = [ModeDecay(k, 2.0 / np.log(k), k ** -1.0) for k in ks]
    c, spread = fit_rate_law(fam)
    assert c == pytest.approx(2.0) and spread < 1e-12
    t = np.logspace(1, 4, 200)
    env = mode_envelope(fam, t)
    assert env["delta"] == pytest.approx(0.5)
    fit = fit_envelope(t, env["log_f"])
    assert 0 < fit["c"] < np.inf and np.isfinite(fit["C"])
    assert np.all(env["log_f"] >= -fit["c"] * np.sqrt(t) - np.log(fit["C"]) - 1e-12)
    assert fit["residual_sqrt"] < fit["residual_exp"]
