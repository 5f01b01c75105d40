import numpy as np
import pytest

from dampedwave.geometry import DampingProfile
from dampedwave.resolvent import (
    ResolutionError,
    apriori_check,
    assemble_semiclassical,
    cutoff_resolvent_estimate,
    cutoff_resolvent_norm,
    fit_exponent,
    s_min,
    scan_inverse_norm,
    solve,
    z_box,
)

ZERO = DampingProfile(kind="constant", level=0.0)
ONE = DampingProfile(kind="constant", level=1.0)


def test_undamped_flat_smin_is_fourier_distance():
    h, z = 0.02, 1.0
    op = assemble_semiclassical("viscous_flat", z, h, a=ZERO)
    N = op.x.size
    j = np.arange(N)
    lam = h**2 * 4 / op.dx**2 * np.sin(np.pi * j / N) ** 2
    assert s_min(op, tol=1e-10) == pytest.approx(np.min(np.abs(lam - z)), rel=1e-6)


def test_viscous_default_bounded_below_by_h():
    h = 0.02
    assert s_min(assemble_semiclassical("viscous_flat", 1.0, h)) >= 0.1 * h


def test_uniform_damping_no_blowup():
    scan = scan_inverse_norm("viscous_flat", h_list=(1 / 50, 1 / 100, 1 / 200), z_grid=[1.0], a=ONE)
    assert np.all(scan.s_min >= 0.1)
    assert abs(scan.nu) < 0.2


def test_perfect_control_exponent_short_sweep():
    scan = scan_inverse_norm("viscous_flat", h_list=(1 / 50, 1 / 100, 1 / 200), z_grid=[1.0])
    assert 0.8 <= scan.nu <= 1.15


@pytest.mark.parametrize("variant", ["viscous_flat", "viscous_barrier", "multiplicative_barrier"])
def test_apriori_identities(variant):
    rng = np.random.default_rng(4)
    for z in (1.0, complex(0.9, -0.01), complex(1.1, 0.005)):
        op = assemble_semiclassical(variant, z, 0.02)
        g = rng.standard_normal(op.x.size) + 1j * rng.standard_normal(op.x.size)
        u = solve(op, g)
        assert np.linalg.norm(op.P @ u - g) <= 1e-10 * np.linalg.norm(g)
        assert max(apriori_check(u, g, op)) <= 1e-8


def test_apriori_undamped_real_z_imag_part():
    op = assemble_semiclassical("viscous_flat", 0.97, 0.02, a=ZERO)
    g = np.random.default_rng(1).standard_normal(op.x.size) + 0j
    u = solve(op, g)
    assert abs(np.vdot(u, g).imag) * op.dx <= 1e-10 * np.linalg.norm(g) * np.linalg.norm(u) * op.dx
    assert apriori_check(u, g, op)[1] <= 1e-12


def test_apriori_bilinear_scaling():
    op = assemble_semiclassical("viscous_barrier", 1.0, 0.02)
    rng = np.random.default_rng(2)
    u = rng.standard_normal(op.x.size) + 1j * rng.standard_normal(op.x.size)
    g = rng.standard_normal(op.x.size) + 1j * rng.standard_normal(op.x.size)  # not a solution pair
    r1 = apriori_check(u, g, op, normalize=False)
    r2 = apriori_check(2 * u, 2 * g, op, normalize=False)
    np.testing.assert_allclose(r2, 4 * np.array(r1), rtol=1e-12)


def test_resolution_guard():
    with pytest.raises(ResolutionError):
        assemble_semiclassical("viscous_flat", 1.0, 0.02, N=100)
    with pytest.raises(ValueError):
        assemble_semiclassical("bogus", 1.0, 0.02)


def test_scan_box_and_smoothness():
    box = z_box(0.02)
    assert 1.0 in box
    assert min(b.imag for b in box) == pytest.approx(-0.02)
    scan = scan_inverse_norm("viscous_flat", h_list=(1 / 50, 1 / 100))
    assert np.all(scan.s_min > 0)
    assert scan.smoothness_ratio <= 10


def test_fit_exponent_exact_power():
    hs = np.array([0.02, 0.01, 0.005])
    nu, err = fit_exponent(hs, 3 * hs**1.3)
    assert nu == pytest.approx(1.3, abs=1e-12) and err < 1e-10


def test_cutoff_zero_and_free():
    assert cutoff_resolvent_norm(0.02, chi=lambda x: 0 * x) == 0.0
    nu = cutoff_resolvent_estimate((0.02, 0.01, 0.005), barrier=False)["nu"]
    assert nu == pytest.approx(1.0, abs=0.1)
