import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dampedwave.geometry import (
    CallableDamping,
    ControlStatus,
    DampingProfile,
    Domain,
    SurfaceProfile,
    check_damping_regularity,
    control_status,
    eval_profile,
    sample_csv_rows,
    subpotential_V1,
)

PROFILE = SurfaceProfile()


def _spectral_derivative(f, order=1):
    n = f.size
    xi = np.fft.fftfreq(n, d=1.0 / n)
    return np.fft.ifft((1j * xi) ** order * np.fft.fft(f))


def test_hyperbolic_top_values():
    v = eval_profile(0.0)
    assert v.W == pytest.approx(1.0, abs=1e-15)
    assert v.dW == pytest.approx(0.0, abs=1e-15)


def test_inside_exact_region():
    zg = PROFILE.z_g
    assert PROFILE.W(zg / 2) == pytest.approx(1 - zg**2 / 4, abs=1e-15)


def test_elliptic_point_matches_background():
    v = eval_profile(np.pi)
    assert v.W == pytest.approx(1 / 9, abs=1e-14)
    step = 1e-5
    fd = (PROFILE.W(np.pi + step) - PROFILE.W(np.pi - step)) / (2 * step)
    assert abs(fd) < 1e-9
    assert abs(v.dW) < 1e-12


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=-10, max_value=10, allow_nan=False))
def test_even_and_periodic(z):
    for f in (PROFILE.W, DampingProfile()):
        assert f(z) == pytest.approx(f(-z), abs=1e-13)
        assert f(z) == pytest.approx(f(z + 2 * np.pi), abs=1e-12)


def test_exact_quadratic_region_identically():
    z = np.linspace(-PROFILE.z_g, PROFILE.z_g, 1001)
    assert np.max(np.abs(PROFILE.W(z) - (1 - z**2))) <= 2 * np.finfo(float).eps


def test_W_decreasing_on_half_period():
    z = np.linspace(1e-6, np.pi - 1e-6, 4000)
    assert np.all(np.diff(PROFILE.W(z)) < 0)


def test_V1_against_conjugation_oracle():
    # R^(1/2) (-R^-1 d_z R d_z) R^(-1/2) f  ==  -f'' + V1 f
    n = 2**12
    z = np.linspace(0, 2 * np.pi, n, endpoint=False)
    R = eval_profile(z).R
    V1 = subpotential_V1(z)
    rng = np.random.default_rng(1)
    for _ in range(20):
        c = rng.normal(size=6) + 1j * rng.normal(size=6)
        f = sum(c[j] * np.exp(1j * (j - 3) * z) for j in range(6)) * np.exp(np.cos(z))
        g = f / np.sqrt(R)
        lhs = -np.sqrt(R) / R * _spectral_derivative(R * _spectral_derivative(g))
        rhs = -_spectral_derivative(f, 2) + V1 * f
        assert np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs) < 1e-6


def test_regularity_default_and_k6():
    grid = np.linspace(-np.pi, np.pi, 20001)
    rep = check_damping_regularity(DampingProfile(), grid)
    assert rep.ok and np.isfinite(rep.C2)
    rep6 = check_damping_regularity(DampingProfile(k_van=6), grid)
    assert rep6.ok


def test_regularity_constant_one():
    rep = check_damping_regularity(DampingProfile(kind="constant"), np.linspace(-3, 3, 101))
    assert rep.ok
    assert rep.C0 == 1.0 and rep.C1 == 0.0 and rep.C2 == 0.0


def test_regularity_order_two_fails():
    a = CallableDamping(
        a=lambda x: np.maximum(x, 0) ** 2,
        da=lambda x: 2 * np.maximum(x, 0),
        d2a=lambda x: 2.0 * (x > 0),
        k_van=2,
    )
    assert not check_damping_regularity(a, np.linspace(-1, 1, 2001)).ok


def test_control_status_examples():
    assert control_status(DampingProfile(), PROFILE) == ControlStatus.imperfect_at_z0
    assert control_status(DampingProfile(kind="constant"), PROFILE) == ControlStatus.perfect
    bump = DampingProfile(kind="bump", z_a=0.3, w=0.5, center=1.0, domain=Domain.circle_z)
    assert control_status(bump) == ControlStatus.perfect


def test_invalid_profiles_rejected():
    with pytest.raises(ValueError):
        SurfaceProfile(z_g=0.5, blend=0.6)
    with pytest.raises(ValueError):
        DampingProfile(w=-1)


def test_csv_rows_shape():
    rows = sample_csv_rows(PROFILE, DampingProfile(), n=64)
    assert len(rows) == 64 and len(rows[0]) == 4
