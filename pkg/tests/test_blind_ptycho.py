import warnings

import numpy as np
import pytest

from blindptycho.angular_sync import rank_one_sync
from blindptycho.blind_deconv import SolverConfig
from blindptycho.blind_ptycho import (
    BlindScene, MaskSupportWarning, blur_support, build_shift_instance, fix_scale,
    measurement_residual, random_blind_scene, recover_mask, recover_multi_shift,
    recover_specimen_zero_shift, relative_error, save_shift_estimates, shift_order,
)
from blindptycho.errors import DivisionError, SolverError
from blindptycho.measurement import add_noise, forward_full
from blindptycho.signal_ops import circ_conv, face_split, reverse, shifted_product
from conftest import crandn, rel


def mask_factor(m, k):
    mr = reverse(m)
    return mr * np.conj(np.roll(mr, -k))


def test_scene_validation(rng):
    C = crandn(rng, 16, 3)
    with pytest.raises(ValueError):
        BlindScene(C=crandn(rng, 16, 5), x_prime=crandn(rng, 5), m=np.eye(16)[0], delta=1)
    with pytest.raises(ValueError):
        BlindScene(C=C, x_prime=crandn(rng, 2), m=np.eye(16)[0], delta=1)
    with pytest.raises(ValueError):
        BlindScene(C=C, x_prime=crandn(rng, 3), m=np.eye(16)[3], delta=2)
    sc = random_blind_scene(16, 4, 3, rng)
    assert np.allclose(sc.x, sc.C @ sc.x_prime) and sc.m_norm > 0


def test_shift_order():
    assert shift_order(3) == [0, 1, 2, -2, -1]
    assert list(blur_support(8, 3)) == [0, 7, 6]


def test_khatri_rao_lift_of_autocorrelation(rng):
    d, N = 16, 3
    C, xp = crandn(rng, d, N), crandn(rng, N)
    x = C @ xp
    x2 = np.outer(xp, np.conj(xp)).reshape(-1)
    for k in range(-3, 4):
        lifted = face_split(C, np.roll(np.conj(C), k, axis=0))
        assert rel(lifted @ x2, shifted_product(x, k)) < 1e-12


def test_instance_matches_forward_model(rng):
    sc = random_blind_scene(16, 3, 3, rng)
    Y = forward_full(sc.scene())
    x2 = np.outer(sc.x_prime, np.conj(sc.x_prime)).reshape(-1)
    for k in shift_order(3):
        model = build_shift_instance(Y, sc.C, 3, k)
        f = mask_factor(sc.m, k)
        h = f[blur_support(16, 3)]
        assert rel((model.B @ h) * np.conj(model.A @ np.conj(x2)), model.y) < 1e-10
        conv = 16 * circ_conv(shifted_product(sc.x, k), f)
        assert rel(model.y, np.fft.fft(conv) / 16**2) < 1e-10
    # k and k - d address the same shift
    assert np.array_equal(build_shift_instance(Y, sc.C, 3, 14).y,
                          build_shift_instance(Y, sc.C, 3, -2).y)
    for bad in (3, -3, 8, 16):
        with pytest.raises(ValueError):
            build_shift_instance(Y, sc.C, 3, bad)


def test_zero_shift_recovery():
    ok = 0
    for seed in range(10):
        sc = random_blind_scene(64, 6, 4, seed)
        est = recover_specimen_zero_shift(forward_full(sc.scene()), sc.C, 6, sc.m_norm)
        ok += relative_error(est, sc.x) <= 0.05
    assert ok >= 7


def test_zero_shift_delta_coefficients(rng):
    C = crandn(rng, 32, 4)
    xp = np.eye(4)[0]
    m = np.zeros(32, complex)
    m[:4] = crandn(rng, 4)
    sc = BlindScene(C=C, x_prime=xp, m=m, delta=4)
    lifted = np.kron(xp, np.conj(xp)).reshape(4, 4)
    v, frac = rank_one_sync(lifted)
    assert relative_error(v, xp) < 1e-15 and frac == 1.0
    est = recover_specimen_zero_shift(forward_full(sc.scene()), C, 4, sc.m_norm)
    assert relative_error(est, sc.x) <= 0.05


def test_zero_measurements_fail(rng):
    C = crandn(rng, 32, 4)
    with pytest.raises(SolverError):
        recover_specimen_zero_shift(np.zeros((32, 32)), C, 4, 1.0)
    with pytest.raises(SolverError):
        recover_multi_shift(np.zeros((32, 32)), C, 4, 1.0)


def test_mask_recovery_from_true_specimen():
    for seed in range(5):
        sc = random_blind_scene(16, 4, 3, seed)
        m_est = recover_mask(forward_full(sc.scene()), sc.x, 4)
        assert relative_error(m_est, sc.m) <= 1e-6
        assert not np.any(m_est[4:])


def test_point_mask(rng):
    sc = BlindScene(C=crandn(rng, 16, 2), x_prime=crandn(rng, 2), m=np.eye(16)[0] * 2, delta=1)
    m_est = recover_mask(forward_full(sc.scene()), sc.x, 1)
    assert relative_error(m_est, sc.m) <= 1e-10


def test_mask_division_guard(rng):
    sc = random_blind_scene(16, 4, 3, rng)
    x_bad = np.ones(16, complex)  # its autocorrelation spectra are delta functions
    with pytest.raises(DivisionError):
        recover_mask(forward_full(sc.scene()), x_bad, 4)


def test_mask_support_warning(rng):
    sc = random_blind_scene(16, 4, 3, rng)
    wrong = sc.x + 0.8 * np.linalg.norm(sc.x) / 4 * crandn(rng, 16)
    with pytest.warns(MaskSupportWarning):
        recover_mask(forward_full(sc.scene()), wrong, 4)


def test_fix_scale(rng):
    x, m = crandn(rng, 8), crandn(rng, 8)
    x1, m1 = fix_scale(x, m, np.linalg.norm(m))
    assert np.allclose(x1, x) and np.allclose(m1, m)
    x2, m2 = fix_scale(x, 2 * m, np.linalg.norm(m))
    assert np.allclose(x2, 2 * x) and np.allclose(m2, m)
    x3, m3 = fix_scale(x, m, 0.37)
    assert np.linalg.norm(m3) == pytest.approx(0.37)
    assert np.allclose(np.outer(x3, np.conj(m3)), np.outer(x, np.conj(m)))
    with pytest.raises(Exception):
        fix_scale(x, np.zeros(8), 1.0)
    with pytest.raises(ValueError):
        fix_scale(x, m, 0.0)


def test_residual_invariant_under_scale_fix(rng):
    sc = random_blind_scene(16, 4, 3, rng)
    Y = forward_full(sc.scene())
    x = sc.x * 1.3
    m = sc.m * (0.5 + 0.2j)
    x2, m2 = fix_scale(x, m, 0.9)
    assert measurement_residual(Y, x, m) == pytest.approx(measurement_residual(Y, x2, m2), rel=1e-10)
    assert measurement_residual(Y, sc.x, sc.m) < 1e-28


def test_multi_shift_invariants():
    for seed in range(3):
        sc = random_blind_scene(32, 4, 3, seed)
        Y = add_noise(forward_full(sc.scene()), 30 if seed else np.inf, seed)
        est = recover_multi_shift(Y, sc.C, 4, sc.m_norm, SolverConfig(max_iters=600,
                                                                      record_history=False))
        R = est.residuals
        assert np.all(R >= 0)
        assert est.chosen_residual <= R[0, 0]
        assert est.chosen_residual == R.min()
        assert est.chosen == np.unravel_index(np.argmin(R), R.shape)
        ex = [relative_error(x, sc.x) for x in est.x_est]
        em = [relative_error(m, sc.m) for m in est.m_est]
        i, j = est.chosen
        assert min(ex) <= ex[i] <= max(ex) and min(em) <= em[j] <= max(em)
        for m in est.m_est:
            assert np.linalg.norm(m) == pytest.approx(sc.m_norm)


def test_noiseless_consistency_small():
    good = 0
    for seed in range(6):
        sc = random_blind_scene(32, 4, 3, seed)
        est = recover_multi_shift(forward_full(sc.scene()), sc.C, 4, sc.m_norm)
        good += est.chosen_residual <= 1e-2
    assert good > 3


def test_relative_error():
    rng = np.random.default_rng(3)
    a = crandn(rng, 12)
    assert relative_error(a, a) == 0
    assert relative_error(-a, a) < 1e-15
    for theta in np.linspace(0, 6, 7):
        assert relative_error(np.exp(1j * theta) * a, a) < 1e-14
    b = crandn(rng, 12)
    b -= np.vdot(a, b) / np.vdot(a, a) * a
    b *= np.linalg.norm(a) / np.linalg.norm(b)
    assert relative_error(a, b) == pytest.approx(np.sqrt(2), abs=1e-10)
    with pytest.raises(ValueError):
        relative_error(a, np.zeros(12))


def test_serialization(tmp_path):
    sc = random_blind_scene(16, 3, 3, 0)
    est = recover_multi_shift(forward_full(sc.scene()), sc.C, 3, sc.m_norm)
    save_shift_estimates(tmp_path, est, {"seed": 0})
    text = (tmp_path / "estimates.csv").read_text()
    assert "# chosen_i=" in text and "vector,shift,index,re,im" in text
    grid = [line for line in (tmp_path / "residuals.csv").read_text().splitlines()
            if not line.startswith("#")]
    assert len(grid) == 1 + 5


def test_failed_shifts_are_excluded(monkeypatch):
    from blindptycho import blind_ptycho as bp
    from blindptycho.errors import DegenerateEstimateError

    real = bp.recover_specimen_shift

    def flaky(Y, C, delta, k, *args, **kw):
        if k == 1:
            raise DegenerateEstimateError("forced")
        return real(Y, C, delta, k, *args, **kw)

    monkeypatch.setattr(bp, "recover_specimen_shift", flaky)
    sc = random_blind_scene(16, 3, 3, 1)
    est = bp.recover_multi_shift(forward_full(sc.scene()), sc.C, 3, sc.m_norm)
    assert 1 in est.failures and est.x_est[1] is None
    assert np.all(np.isinf(est.residuals[1])) and np.all(np.isinf(est.residuals[:, 1]))
    assert est.chosen[0] != 1 and est.chosen[1] != 1
