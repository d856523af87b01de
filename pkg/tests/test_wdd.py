import numpy as np
import pytest

from blindptycho.errors import AliasingError, DivisionError, IllConditionedMaskError
from blindptycho.measurement import (
    MeasurementMatrix, PtychoScene, add_noise, forward_full, forward_subsampled_freq,
    forward_subsampled_freq_space, random_scene,
)
from blindptycho.signal_ops import reverse, shifted_product
from blindptycho.wdd import (
    lhs_transform, lhs_transform_subsampled, mask_spectra, max_autocorrelation_lag, wdd_divide,
    wdd_divide_subsampled, wdd_recover, write_mask_diagnostics,
)
from conftest import aligned, conv_oracle, crandn, dft_oracle, rel


def mask_factor(m, k):
    mr = reverse(m)
    return mr * np.conj(np.roll(mr, -k))


def test_lhs_transform_is_decoupled_convolution(rng):
    sc = random_scene(8, 3, rng)
    T = lhs_transform(forward_full(sc))
    for k in range(8):
        expect = 8 * conv_oracle(shifted_product(sc.x, k), mask_factor(sc.m, k))
        assert np.linalg.norm(T[:, k] - expect) <= 1e-8 * np.linalg.norm(T)


def test_lhs_transform_edge_cases(rng):
    sc = random_scene(8, 3, rng)
    zero = forward_full(PtychoScene(x=np.zeros(8), m=sc.m, delta=3))
    assert not np.any(lhs_transform(zero))
    e0 = np.eye(8)[0]
    T = lhs_transform(forward_full(PtychoScene(x=sc.x, m=e0, delta=1)))
    assert rel(T[:, 0], 8 * np.abs(sc.x) ** 2) < 1e-12
    with pytest.raises(ValueError):
        lhs_transform(np.ones((4, 8)))


def test_mask_spectra(rng):
    with pytest.raises(IllConditionedMaskError):
        mask_spectra(np.ones(4), 1)
    with pytest.raises(IllConditionedMaskError):
        mask_spectra(np.zeros(4), 1)
    m = np.zeros(8, complex)
    m[:4] = crandn(rng, 4)
    sp = mask_spectra(m, 4)
    for k in range(-3, 4):
        assert rel(sp.denom[k], dft_oracle(mask_factor(m, k))) < 1e-12
    brute = min(abs(dft_oracle(mask_factor(m, k))[q]) for k in range(-3, 4) for q in range(8))
    assert sp.mu == pytest.approx(brute, rel=1e-10)
    assert max_autocorrelation_lag(m) == 3


def test_divide_recovers_diagonals(rng):
    sc = random_scene(8, 4, rng)
    diags = wdd_divide(lhs_transform(forward_full(sc)), mask_spectra(sc.m, 4), 4)
    for k in range(-3, 4):
        assert rel(diags.diags[k], shifted_product(sc.x, k)) < 1e-6
    assert rel(diags.diags[0], np.abs(sc.x) ** 2) < 1e-6
    assert diags.hermitian_defect() < 1e-10


def test_divide_guard(rng):
    sc = random_scene(8, 3, rng)
    sp = mask_spectra(sc.m, 3)
    sp.denom[1] = sp.denom[1].copy()
    sp.denom[1][2] = 0.0
    with pytest.raises(DivisionError):
        wdd_divide(lhs_transform(forward_full(sc)), sp, 3)


@pytest.mark.parametrize("d", [8, 16, 64])
def test_noiseless_exactness(d):
    for seed in range(5):
        sc = random_scene(d, 4, seed)
        diags = wdd_divide(lhs_transform(forward_full(sc)), mask_spectra(sc.m, 4))
        for k, v in diags.diags.items():
            assert rel(v, shifted_product(sc.x, k)) < 1e-6


def test_recover_end_to_end_and_noise_trend():
    sc = random_scene(64, 6, 3)
    clean = forward_full(sc)
    assert aligned(wdd_recover(clean, sc.m, kappa=6), sc.x) <= 1e-4
    e40 = aligned(wdd_recover(add_noise(clean, 40, 1), sc.m, kappa=6), sc.x)
    e20 = aligned(wdd_recover(add_noise(clean, 20, 1), sc.m, kappa=6), sc.x)
    assert e40 < e20


def test_noise_doubling_does_not_help():
    sc = random_scene(32, 4, 11)
    clean = forward_full(sc)
    worse = 0
    for seed in range(6):
        a = aligned(wdd_recover(add_noise(clean, 30, seed), sc.m), sc.x)
        b = aligned(wdd_recover(add_noise(clean, 30 - 20 * np.log10(2), seed), sc.m), sc.x)
        worse += b >= a
    assert worse == 6


def test_positive_specimen_with_point_mask(rng):
    x = rng.uniform(0.5, 2.0, 16)
    e0 = np.eye(16)[0]
    meas = forward_full(PtychoScene(x=x, m=e0, delta=1))
    est = wdd_recover(meas, e0, kappa=1, allow_magnitude_only=True)
    assert np.allclose(est, x)


def test_subsampled_frequency(rng):
    sc = random_scene(16, 4, rng)
    meas = forward_subsampled_freq(sc, 8)
    sp = mask_spectra(sc.m, 4)
    diags = wdd_divide_subsampled(lhs_transform_subsampled(meas), sp, 8, 16)
    est = wdd_recover(meas, sc.m)
    assert aligned(est, sc.x) <= 1e-5
    full = forward_subsampled_freq(sc, 16)
    same = wdd_divide_subsampled(lhs_transform_subsampled(full), sp, 16, 16)
    ref = wdd_divide(lhs_transform(full), sp)
    for k in ref.diags:
        assert np.allclose(same.diags[k], ref.diags[k])
        assert np.allclose(diags.diags[k], ref.diags[k])


def test_subsampled_guards(rng):
    sc = random_scene(16, 4, rng)
    sp = mask_spectra(sc.m, 4)
    with pytest.raises(AliasingError):
        wdd_divide_subsampled(np.zeros((16, 4)), sp, 4, 16)
    with pytest.raises(AliasingError):
        wdd_recover(forward_subsampled_freq_space(sc, 8, 8), sc.m)
    with pytest.raises(ValueError):
        wdd_divide_subsampled(np.zeros((16, 5)), sp, 5, 16)


def test_fourier_domain_variant(rng):
    d, delta = 32, 4
    mh = np.zeros(d, complex)
    mh[:delta] = crandn(rng, delta)
    m = np.fft.ifft(mh)
    x = crandn(rng, d)
    meas = MeasurementMatrix(Y=forward_full(PtychoScene(x=x, m=m, delta=d)).Y, d=d)
    assert aligned(wdd_recover(meas, m, domain="fourier"), x) <= 1e-8
    with pytest.raises(ValueError):
        wdd_recover(meas, m, domain="polar")


def test_mask_diagnostics_csv(tmp_path, rng):
    sc = random_scene(16, 3, rng)
    path = tmp_path / "mask.csv"
    write_mask_diagnostics(path, mask_spectra(sc.m, 3))
    text = path.read_text()
    assert "offset,min_modulus,max_modulus,condition" in text
    assert len([line for line in text.splitlines() if not line.startswith("#")]) == 1 + 5
