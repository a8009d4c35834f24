import numpy as np
import pytest

from conftest import crandn
from fdrelay.channel import SystemConfig, draw_channel_batch, draw_channels, trial_rng
from fdrelay.filters import (FilterSet, Mode, SingularRealization, alpha_zf, batch_filters, build_filters,
                             mmse_rx_filter, nsp_residual, trace_q, tx_covariance, zf_detector, zf_precoder)


def test_zf_detector_ones():
    w = zf_detector(np.ones((4, 1)))
    assert np.allclose(w, np.full((1, 4), 0.25))


def test_zf_detector_left_inverse_and_lstsq(rng):
    g = crandn(rng, 64, 5)
    w = zf_detector(g)
    assert np.max(np.abs(w @ g - np.eye(5))) < 1e-9
    for j in range(64):
        e = np.zeros(64)
        e[j] = 1.0
        col = np.linalg.lstsq(g, e, rcond=None)[0]
        assert np.allclose(w[:, j], col, atol=1e-12)


def test_zf_detector_singular():
    g = np.ones((8, 2), dtype=complex)
    with pytest.raises(SingularRealization):
        zf_detector(g)


def test_alpha_values():
    assert alpha_zf(np.ones(5), 0.0, 64, 5) == pytest.approx(np.sqrt(59 / 5))
    assert alpha_zf(np.ones(5), 0.0, 64, 5) == pytest.approx(3.43511, abs=1e-5)
    assert alpha_zf(np.ones(5), 1e-3, 64, 5) == pytest.approx(np.sqrt(59 * 1.001 / 5))
    with pytest.raises(ValueError):
        alpha_zf(np.ones(5), 0.0, 5, 5)


def test_zf_precoder_scalar_channel():
    a = zf_precoder(np.array([[1.0, 0.0]]), alpha_zf([1.0], 0.0, 2, 1))
    assert np.allclose(a, [[1.0], [0.0]])


def test_zf_precoder_right_inverse(rng):
    g = crandn(rng, 5, 64)
    a = zf_precoder(g, 2.5)
    assert np.max(np.abs(g @ a - 2.5 * np.eye(5))) < 1e-9


def test_precoded_power_normalization():
    # E||A x||^2 = 1 over channel and symbol draws
    from fdrelay.modem import qam
    K, N, n = 5, 32, 10_000
    r = np.random.default_rng(3)
    beta = np.exp(r.standard_normal(K))
    cfg = SystemConfig(K=K, n_rx=N, n_tx=N, eps_h2=1e-3, beta_rd=beta)
    b = draw_channel_batch(cfg, r, n)
    _, a, _, ok = batch_filters(cfg, b, Mode.NI)
    x = qam(16).points[r.integers(0, 16, (n, K))]
    p = np.sum(np.abs(np.einsum("bnk,bk->bn", a, x)) ** 2, axis=1)
    assert ok.all()
    assert np.mean(p) == pytest.approx(1.0, rel=0.02)


def test_mmse_scalar_wiener():
    f = mmse_rx_filter(np.ones((1, 1)), [1.0], np.ones((1, 1)), np.eye(1), 1.0, 0.0)
    assert f[0, 0] == pytest.approx(0.5)


def test_mmse_noiseless_limit(rng):
    g = crandn(rng, 16, 3)
    f = mmse_rx_filter(g, np.ones(3), crandn(rng, 16, 16), np.eye(16), 1e-8, 0.0)
    assert np.max(np.abs(f @ g - g)) < 1e-3


def test_mmse_rejects_zero_noise(rng):
    with pytest.raises(ValueError):
        mmse_rx_filter(crandn(rng, 4, 1), [1.0], crandn(rng, 4, 4), np.eye(4), 0.0, 1.0)


def _setup(rng, N=16, K=3, p_r=10.0, eps_t2=1e-3):
    g = crandn(rng, N, K)
    p_s = rng.uniform(0.5, 2.0, K)
    h = crandn(rng, N, N)
    a = zf_precoder(crandn(rng, K, N), 1.3)
    f_tx = np.eye(N)
    r_t = tx_covariance(a, f_tx, eps_t2)
    return g, p_s, h, a, f_tx, r_t, p_r


def test_trace_q_substitutions(rng):
    g, p_s, h, a, f_tx, _, _ = _setup(rng)
    n = g.shape[0]
    assert trace_q(np.eye(n), f_tx, g, p_s, h, a, 1e-3, 0.7, 0.0) == pytest.approx(n * 0.7)
    s = (g * p_s) @ g.conj().T
    assert trace_q(np.zeros((n, n)), f_tx, g, p_s, h, a, 1e-3, 0.7, 5.0) == pytest.approx(np.trace(s).real)
    with pytest.raises(ValueError):
        trace_q(np.eye(n + 1), f_tx, g, p_s, h, a, 1e-3, 0.7, 0.0)


def test_mmse_is_minimizer_under_perturbation(rng):
    g, p_s, h, a, f_tx, r_t, p_r = _setup(rng)
    f = mmse_rx_filter(g, p_s, h, r_t, 0.5, p_r)
    q0 = trace_q(f, f_tx, g, p_s, h, a, 1e-3, 0.5, p_r)
    for _ in range(100):
        d = crandn(rng, *f.shape)
        d *= 1e-3 / np.linalg.norm(d)
        assert q0 <= trace_q(f + d, f_tx, g, p_s, h, a, 1e-3, 0.5, p_r)


def test_mmse_stationarity_finite_differences(rng):
    g, p_s, h, a, f_tx, r_t, p_r = _setup(rng)
    f = mmse_rx_filter(g, p_s, h, r_t, 0.5, p_r)
    step = 1e-5
    for idx in zip(rng.integers(0, 16, 5), rng.integers(0, 16, 5)):
        for unit in (1.0, 1j):
            d = np.zeros_like(f)
            d[idx] = step * unit
            grad = (trace_q(f + d, f_tx, g, p_s, h, a, 1e-3, 0.5, p_r)
                    - trace_q(f - d, f_tx, g, p_s, h, a, 1e-3, 0.5, p_r)) / (2 * step)
            assert abs(grad) < 1e-6


def test_nsp_residual():
    h = np.ones((4, 4))
    assert nsp_residual(np.zeros((4, 4)), h, np.eye(4)) == 0.0
    assert nsp_residual(np.eye(4), h, np.zeros((4, 4))) == 0.0
    assert nsp_residual(np.eye(4), h, np.eye(4)) == pytest.approx(4.0)


def test_mmse_reduces_nsp_residual_and_li_power():
    cfg = SystemConfig(K=2, n_rx=16, n_tx=16, p_r=10.0, sigma_nr2=0.5)
    wins, li_mmse, li_raw = 0, 0.0, 0.0
    r = np.random.default_rng(8)
    for t in range(1000):
        ch = draw_channels(cfg, t)
        fs = build_filters(cfg, ch, Mode.MMSE)
        wins += nsp_residual(fs.f_rx, ch.h_li_est, fs.f_tx) < nsp_residual(np.eye(16), ch.h_li_est, fs.f_tx)
        tx = fs.a_zf @ ((r.standard_normal(2) + 1j * r.standard_normal(2)) / np.sqrt(2))
        li_mmse += np.sum(np.abs(fs.f_rx @ ch.h_li @ tx) ** 2)
        li_raw += np.sum(np.abs(ch.h_li @ tx) ** 2)
    assert wins >= 950
    assert li_mmse < li_raw


@pytest.mark.parametrize("mode", list(Mode))
def test_build_filters_modes(mode):
    cfg = SystemConfig(K=3, n_rx=16, n_tx=16, p_r=2.0)
    fs = build_filters(cfg, draw_channels(cfg, 1), mode)
    assert isinstance(fs, FilterSet) and fs.alpha_zf > 0
    if mode is not Mode.MMSE:
        assert np.array_equal(fs.f_rx, np.eye(16)) and np.array_equal(fs.f_tx, np.eye(16))
    assert fs.transmits_during_reception == (mode is not Mode.HD)


def test_batch_filters_match_single():
    cfg = SystemConfig(K=3, n_rx=12, n_tx=10, p_r=3.0, p_s=[1.0, 0.5, 2.0], sigma_nr2=0.3, eps_t2=0.01,
                       beta_rd=[1.0, 0.3, 2.0], beta_sr=[0.5, 1.0, 1.5])
    chb = draw_channel_batch(cfg, trial_rng(1), 6)
    m, fa, alpha, ok = batch_filters(cfg, chb, Mode.MMSE)
    assert ok.all()
    for i in range(6):
        from fdrelay.channel import ChannelSet
        ch = ChannelSet(*(getattr(chb, f)[i] for f in ("h_sr", "h_rd", "h_li", "h_sr_est", "h_rd_est",
                                                        "h_li_est", "beta_sr", "beta_rd")))
        fs = build_filters(cfg, ch, Mode.MMSE)
        assert np.allclose(m[i], fs.w_zf @ fs.f_rx, atol=1e-10)
        assert np.allclose(fa[i], fs.a_zf, atol=1e-10)
        assert alpha[i] == pytest.approx(fs.alpha_zf)
