import numpy as np
import pytest
from scipy.integrate import quad

from dampedwave.geometry import DampingProfile, SurfaceProfile
from dampedwave.quantize import (
    NoRootError,
    bohr_sommerfeld,
    determine_F,
    fit_power,
    quasi_eigenvalue,
    quasi_eigenvalue_sequence,
)
from dampedwave.wkb import action_B, coeff_c1

A_DEF = DampingProfile()
ZERO = DampingProfile(kind="constant", level=0.0)


def _B_oracle(E):
    W = SurfaceProfile().W
    f = lambda z: np.sqrt(1 + E - W(z))
    return 2 * quad(f, 0, np.pi, points=[0.3, 0.95], epsabs=1e-13, epsrel=1e-13, limit=400)[0]


def test_linear_stub():
    B0 = 4.0
    m, E = bohr_sommerfeld(100, B=lambda E: B0 + E, E_max=1.0)
    assert E == pytest.approx(2 * np.pi * m / 100 - B0, abs=1e-14)


def test_k200_against_independent_action():
    m, E = bohr_sommerfeld(200)
    assert 0 < E < 0.5
    assert m == 150
    assert _B_oracle(E) == pytest.approx(2 * np.pi * m / 200, abs=1e-11)


@pytest.mark.parametrize("k", [50, 100, 200, 400])
def test_residual_postcondition(k):
    m, E = bohr_sommerfeld(k)
    assert abs(action_B(E) - 2 * np.pi * m / k) <= 1e-12


def test_bracket_independence_and_monotone_m():
    m, E1 = bohr_sommerfeld(100, E_max=0.5)
    _, E2 = bohr_sommerfeld(100, E_max=0.9)
    assert abs(E1 - E2) <= 1e-12
    _, E3 = bohr_sommerfeld(100, m=m + 1)
    assert E3 > E1


def test_no_root():
    with pytest.raises(NoRootError):
        bohr_sommerfeld(100, m=200)


def test_determine_F():
    assert determine_F(0.01, 0.005, ZERO) == 0.0
    m, E = bohr_sommerfeld(200)
    F = determine_F(E, 1 / 200, A_DEF)
    assert F > 0
    assert F * abs(np.log(E)) / (2 * (1 / 200) * coeff_c1(A_DEF, E)) == pytest.approx(1.0, rel=1e-14)
    with pytest.raises(ValueError):
        determine_F(1.5, 0.01, A_DEF)


def test_im_mu_law():
    seq = quasi_eigenvalue_sequence([50, 100, 200, 400, 800], A_DEF)
    h = np.array([q.h for q in seq])
    im = np.array([q.mu.imag for q in seq])
    assert fit_power(h / np.log(1 / h), im) == pytest.approx(1.0, abs=0.1)
    assert max(abs(q.mu.real - 1) / q.h for q in seq) < 1.0
    Fh = [q.F / q.h for q in seq]
    assert all(b <= a + 1e-15 for a, b in zip(Fh, Fh[1:]))
    assert Fh[-1] < Fh[0]


def test_undamped_sequence_is_real():
    assert all(q.mu.imag == 0 for q in quasi_eigenvalue_sequence([50, 100], ZERO))


def test_k_min_enforced():
    with pytest.raises(ValueError):
        quasi_eigenvalue_sequence([20], A_DEF)


def test_row_export():
    q = quasi_eigenvalue(100, A_DEF)
    assert q.tau == pytest.approx(q.mu * 100)
    assert len(q.row()) == 8
