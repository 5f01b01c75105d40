import numpy as np
import pytest

from dampedwave.geometry import DampingProfile, SurfaceProfile, eval_profile
from dampedwave.quasimode import (
    Quasimode,
    ResolutionError,
    build_quasimode,
    chi,
    inner_solve,
    residual,
    spectral_second_derivative,
    to_csv_rows,
)
from dampedwave.wkb import SpectralSplit

A_DEF = DampingProfile()
ZERO = DampingProfile(kind="constant", level=0.0)
PROFILE = SurfaceProfile()


@pytest.fixture(scope="module")
def modes():
    return {k: (build_quasimode(k, A_DEF), build_quasimode(k, A_DEF, detune_gaps=10)) for k in (50, 100)}


def test_inner_solution_real_when_undamped():
    h = 0.02
    ie = inner_solve(SpectralSplit(E=h, F=0.0, h=h))
    assert np.max(np.abs(ie.sample(np.linspace(0, 0.3, 50))[0].imag)) == 0.0


def test_inner_ode_residual_and_wronskian():
    h = 0.02
    s = SpectralSplit(E=0.01, F=0.002, h=h)
    ie, io = inner_solve(s, 0), inner_solve(s, 1)
    z = np.linspace(0.01, 0.29, 50)
    d = 1e-4
    dd = (-ie.sample(z + 2 * d)[1] + 8 * ie.sample(z + d)[1] - 8 * ie.sample(z - d)[1] + ie.sample(z - 2 * d)[1]) / (12 * d)
    v = ie.sample(z)[0]
    rhs = (PROFILE.W(z) + h * h * PROFILE.subpotential(z) - s.mu**2) / h**2 * v
    assert np.max(np.abs(dd - rhs)) <= 1e-9 * np.max(np.abs(rhs))
    ve, de = ie.sample(z)
    vo, do = io.sample(z)
    wr = ve * do - de * vo
    assert np.max(np.abs(wr - wr[0])) <= 1e-9 * abs(wr[0])


def test_partition_of_unity():
    eps = 0.3
    z = np.linspace(0, eps, 1001)
    assert np.max(np.abs(chi(z, eps) + chi(z + 2 * np.pi, eps) - 1)) <= 1e-12
    assert chi(np.array([1.0]), eps)[0] == 1.0


def test_mismatch_orders(modes):
    (q50, d50), (q100, d100) = modes[50], modes[100]
    assert q100.mismatch_value < q50.mismatch_value
    assert np.log(q50.mismatch_value / q100.mismatch_value) / np.log(2) >= 1.8
    assert np.log(q50.mismatch_deriv / q100.mismatch_deriv) / np.log(2) >= 0.8
    assert d100.mismatch_value > 0.5  # detuned energy leaves an O(1) seam


def test_normalized_and_smooth_seam(modes):
    q = modes[100][0]
    assert q.norm() == pytest.approx(1.0, abs=1e-12)
    # spectral derivative of the periodic samples stays bounded by 1/h: no seam jump
    du = np.fft.ifft(1j * np.fft.fftfreq(q.u.size, 1 / q.u.size) * np.fft.fft(q.u))
    assert np.max(np.abs(du)) * q.h < 10 * np.max(np.abs(q.u))


def test_residual_small_and_negative_control(modes):
    (q50, d50), (q100, d100) = modes[50], modes[100]
    assert q100.residual_L2 < q50.residual_L2 / 2**1.8
    assert d100.residual_L2 >= 1e3 * q100.residual_L2


def test_constant_function_residual():
    n, h, mu = 4096, 0.02, 1.0 + 0j
    z = np.arange(n) * 2 * np.pi / n
    q = Quasimode(z, np.full(n, (2 * np.pi) ** -0.5, dtype=complex), h, mu)
    expected = np.linalg.norm((PROFILE.W(z) + h * h * PROFILE.subpotential(z) - mu**2) * q.u) / np.linalg.norm(q.u)
    assert residual(q, ZERO) == pytest.approx(expected, rel=1e-12)


def test_under_resolution():
    z = np.arange(64) * 2 * np.pi / 64
    with pytest.raises(ResolutionError):
        residual(Quasimode(z, np.ones(64, complex), 0.01, 1.0), ZERO)


def test_separation_matches_full_laplacian(modes):
    # 2D check: h^2 (-Lap_g)(R^-1/2 u e^{ik theta}) agrees with the conjugated 1D operator
    q = modes[50][0]
    k, h = q.k, q.h
    R = eval_profile(q.z).R
    w = q.u / np.sqrt(R)
    n_t = 4 * k
    theta = np.arange(n_t) * 2 * np.pi / n_t
    field = w[:, None] * np.exp(1j * k * theta)[None, :]
    xi = np.fft.fftfreq(q.z.size, 1 / q.z.size)
    dz = lambda f: np.fft.ifft(1j * xi[:, None] * np.fft.fft(f, axis=0), axis=0)
    eta = np.fft.fftfreq(n_t, 1 / n_t)
    dtt = np.fft.ifft(-(eta**2)[None, :] * np.fft.fft(field, axis=1), axis=1)
    lap = dz(R[:, None] * dz(field)) / R[:, None] + dtt / R[:, None] ** 2
    lhs = -h * h * np.sqrt(R)[:, None] * lap * np.exp(-1j * k * theta)[None, :]
    rhs = -h * h * spectral_second_derivative(q.u) + (PROFILE.W(q.z) + h * h * PROFILE.subpotential(q.z)) * q.u
    assert np.linalg.norm(lhs[:, 3] - rhs) <= 1e-6 * np.linalg.norm(rhs)


def test_csv_rows(modes):
    q = modes[50][0]
    rows = to_csv_rows(q)
    assert rows.shape == (q.z.size, 3)
    assert set(q.sidecar()) >= {"h", "mu_re", "mu_im", "residual"}
