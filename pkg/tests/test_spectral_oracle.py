import numpy as np
import pytest
from scipy.linalg import eigvalsh

from dampedwave.geometry import DampingProfile, SurfaceProfile
from dampedwave.quantize import quasi_eigenvalue
from dampedwave.spectral_oracle import (
    EmptyWindowError,
    ResolutionError,
    assemble_mode,
    im_identity,
    match_quasimode,
    qep_dense,
    qep_eigs,
    qep_spectrum,
    undamped_spectrum,
)

PROFILE = SurfaceProfile()
A_DEF = DampingProfile()
ZERO = DampingProfile(kind="constant", level=0.0)


@pytest.fixture(scope="module")
def damped50():
    op = assemble_mode(50, PROFILE, A_DEF)
    return op, qep_spectrum(op, return_pairs=True)


def test_flat_circle_spectrum():
    op = assemble_mode(0, None, ZERO, N=128, enforce_resolution=False)
    lam = eigvalsh(op.S.toarray())[:9]
    np.testing.assert_allclose(lam, [0, 1, 1, 4, 4, 9, 9, 16, 16], atol=1e-9)


def test_symmetry_positivity_and_potential():
    op = assemble_mode(50, PROFILE, A_DEF)
    assert op.weighted_symmetry_defect() <= 1e-10
    assert abs(op.S - op.S.T).max() <= 1e-10 * abs(op.S).max()
    assert eigvalsh(op.S.toarray(), subset_by_index=[0, 0])[0] >= -1e-8 * 50**2
    V1 = PROFILE.subpotential(op.z)
    # diagonal = stencil constant + V1 + k^2 W, so the k^2/R^2 term has minimum k^2 min W
    stencil = op.S.diagonal() - V1 - 50**2 * op.W
    assert np.ptp(stencil) <= 1e-9 * abs(stencil[0])


def test_resolution_guard():
    with pytest.raises(ResolutionError):
        assemble_mode(50, PROFILE, A_DEF, N=1000)


def test_shift_invert_matches_dense_companion():
    op = assemble_mode(4, PROFILE, A_DEF, N=160)
    dense = qep_dense(op)
    sparse = [ep.tau for ep in qep_eigs(op, complex(4.0, 0.3), n_eigs=6)]
    for t in sparse:
        assert np.min(np.abs(dense - t)) <= 1e-8 * abs(t)


def test_undamped_spectrum_real_and_symmetric():
    op = assemble_mode(50, PROFILE, ZERO)
    spec = qep_spectrum(op)
    assert max(abs(t.imag) for t in spec) <= 1e-10
    ref = undamped_spectrum(op, 48, 52)
    for t in spec:
        assert np.min(np.abs(ref - t.real)) <= 1e-8
    neg = qep_spectrum(op, window=(-52, -48, -0.1, 0.1))
    np.testing.assert_allclose(sorted(-np.conj(neg), key=lambda c: c.real), spec, atol=1e-8)


def test_im_identity_and_band(damped50):
    op, pairs = damped50
    assert pairs
    for ep in pairs:
        assert ep.residual <= 1e-8
        assert abs(im_identity(op, ep.tau, ep.psi)) <= 1e-6
        assert -1e-6 <= ep.tau.imag <= A_DEF.sup / 2 + 1e-6


def test_match_prediction_k50(damped50):
    _, pairs = damped50
    qe = quasi_eigenvalue(50, A_DEF, variant="full")
    spec = [ep.tau for ep in pairs]
    d, nearest, hd = match_quasimode(qe.tau, spec, qe.h)
    assert abs(nearest.imag - qe.tau.imag) <= 0.5 * qe.tau.imag
    assert hd == pytest.approx(d / 50)


def test_match_exact_and_empty():
    assert match_quasimode(50 + 0.1j, [49.0, 50 + 0.1j])[0] == 0.0
    with pytest.raises(EmptyWindowError):
        match_quasimode(50.0, [])


def test_grid_doubling_drift(damped50):
    op, pairs = damped50
    fine = qep_spectrum(assemble_mode(50, PROFILE, A_DEF, N=2 * op.N))
    for ep in pairs:
        assert np.min(np.abs(np.asarray(fine) - ep.tau)) <= 1e-6 * 50
