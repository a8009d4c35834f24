"""Per-realization linear processing at the relay.

ZF detection and precoding are built on channel estimates.  The loopback
suppression filter is the receive-side MMSE solution with the transmit
prefilter fixed to identity; the null-space condition is only evaluated as a
residual.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .channel import ChannelSet, SystemConfig

RCOND_MIN = 1e-12


class Mode(str, enum.Enum):
    MMSE = "MMSE"
    NI = "NI"
    HD = "HD"


class SingularRealization(np.linalg.LinAlgError):
    """A Gram matrix was numerically singular; the realization must be redrawn."""


@dataclass
class FilterSet:
    w_zf: np.ndarray
    a_zf: np.ndarray
    alpha_zf: float
    f_rx: np.ndarray
    f_tx: np.ndarray
    mode: Mode

    @property
    def transmits_during_reception(self) -> bool:
        return self.mode is not Mode.HD


def _check_rcond(gram, what):
    # 1-norm reciprocal condition estimate from the LU factors
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(gram, check_finite=True)
    anorm = np.linalg.norm(gram, 1)
    rcond = sla.lapack.get_lapack_funcs("gecon", (lu,))(lu, anorm, norm="1")[0]
    if not rcond >= RCOND_MIN:
        raise SingularRealization(f"{what}: reciprocal condition {rcond:.3e} below {RCOND_MIN:g}")
    return lu, piv


def zf_detector(g_sr_est) -> np.ndarray:
    """Left inverse ``(G^H G)^{-1} G^H`` of an ``N_rx x K`` channel."""
    g = np.asarray(g_sr_est, dtype=complex)
    gh = g.conj().T
    lu = _check_rcond(gh @ g, "ZF detector Gram matrix")
    return sla.lu_solve(lu, gh)


def alpha_zf(beta_rd, eps_h2: float, n_tx: int, K: int) -> float:
    """Precoder power normalization ``sqrt((N_tx - K) / sum_k (beta_k (1 + eps_h2))^-1)``."""
    if n_tx <= K:
        raise ValueError(f"need n_tx > K, got n_tx={n_tx}, K={K}")
    beta = np.broadcast_to(np.asarray(beta_rd, float), (K,))
    if np.any(beta <= 0):
        raise ValueError("large-scale gains must be > 0")
    return float(np.sqrt((n_tx - K) / np.sum(1.0 / (beta * (1.0 + eps_h2)))))


def zf_precoder(g_rd_est, alpha: float) -> np.ndarray:
    """Right inverse scaled by ``alpha``: ``alpha G^H (G G^H)^{-1}``."""
    g = np.asarray(g_rd_est, dtype=complex)
    lu = _check_rcond(g @ g.conj().T, "ZF precoder Gram matrix")
    # (G G^H)^{-1} is Hermitian, so G^H (G G^H)^{-1} = ((G G^H)^{-1} G)^H
    return alpha * sla.lu_solve(lu, g).conj().T


def tx_covariance(a_zf, f_tx, eps_t2: float) -> np.ndarray:
    """``F_tx A A^H F_tx^H + eps_t2 I`` under unit-covariance detected symbols."""
    fa = f_tx @ a_zf
    return fa @ fa.conj().T + eps_t2 * np.eye(fa.shape[0])


def mmse_solve(s, li_cov, r_nr, p_r: float) -> np.ndarray:
    """``S (S + p_r L + R_nr)^{-1}`` for precomputed signal and loopback covariances."""
    n = s.shape[0]
    if np.ndim(r_nr) == 0:
        if not r_nr > 0:
            raise ValueError("relay noise variance must be > 0")
        c = s + p_r * li_cov
        c[np.diag_indices(n)] += float(r_nr)
    else:
        c = s + p_r * li_cov + r_nr
    c = 0.5 * (c + c.conj().T)
    if not np.all(np.isfinite(c)):
        raise ValueError("non-finite entries in the MMSE covariance")
    try:
        x = sla.solve(c, s, assume_a="pos")
    except np.linalg.LinAlgError as exc:
        raise SingularRealization(f"MMSE covariance not positive definite: {exc}") from exc
    # S and C are Hermitian: S C^{-1} = (C^{-1} S)^H
    return x.conj().T


def mmse_rx_filter(g_sr_est, p_s, h_li_est, r_t, r_nr, p_r: float) -> np.ndarray:
    """Receive-side loopback suppression filter.

    ``F = S (S + p_r H_LI R_t H_LI^H + R_nr)^{-1}`` with ``S = G D_pS G^H``.
    ``r_nr`` may be a scalar noise variance or a full covariance.
    """
    g = np.asarray(g_sr_est, dtype=complex)
    p_s = np.broadcast_to(np.asarray(p_s, float), (g.shape[1],))
    s = (g * p_s) @ g.conj().T
    li_cov = h_li_est @ r_t @ h_li_est.conj().T
    return mmse_solve(s, li_cov, r_nr, p_r)


def trace_q(f_rx, f_tx, g_sr_est, p_s, h_li_est, a_zf, eps_t2, r_nr, p_r) -> float:
    """Trace of the relay-input error covariance for a filter pair."""
    g = np.asarray(g_sr_est, dtype=complex)
    n = g.shape[0]
    if np.ndim(r_nr) == 0:
        r_nr = float(r_nr) * np.eye(n)
    p_s = np.broadcast_to(np.asarray(p_s, float), (g.shape[1],))
    if f_rx.shape != (n, n) or h_li_est.shape[0] != n or f_tx.shape[0] != h_li_est.shape[1]:
        raise ValueError("inconsistent shapes")
    s = (g * p_s) @ g.conj().T
    r_t = tx_covariance(a_zf, f_tx, eps_t2)
    e = np.eye(n) - f_rx
    fh = f_rx @ h_li_est
    q = e @ s @ e.conj().T + p_r * fh @ r_t @ fh.conj().T + f_rx @ r_nr @ f_rx.conj().T
    return float(np.trace(q).real)


def nsp_residual(f_rx, h_li_est, f_tx) -> float:
    """Frobenius norm of ``F_rx H_LI F_tx`` (zero under null-space projection)."""
    return float(np.linalg.norm(f_rx @ h_li_est @ f_tx))


def build_filters(cfg: SystemConfig, ch: ChannelSet, mode=Mode.MMSE, p_s=None, p_r=None) -> FilterSet:
    """Assemble the ZF pair and the loopback filter for one realization.

    ``p_s``/``p_r`` override the configured powers (used by the allocator).
    """
    mode = Mode(mode)
    p_s = cfg.p_s if p_s is None else np.broadcast_to(np.asarray(p_s, float), (cfg.K,))
    p_r = cfg.p_r if p_r is None else float(p_r)
    g_sr = ch.g_sr_est
    w = zf_detector(g_sr)
    alpha = alpha_zf(ch.beta_rd, cfg.eps_h2, cfg.n_tx, cfg.K)
    a = zf_precoder(ch.g_rd_est, alpha)
    f_tx = np.eye(cfg.n_tx)
    if mode is Mode.MMSE:
        r_t = tx_covariance(a, f_tx, cfg.eps_t2)
        f_rx = mmse_rx_filter(g_sr, p_s, ch.h_li_est, r_t, cfg.sigma_nr2, p_r)
    else:
        f_rx = np.eye(cfg.n_rx)
    return FilterSet(w, a, alpha, f_rx, f_tx, mode)


def _herm(x):
    return np.swapaxes(x.conj(), -1, -2)


def batch_filters(cfg: SystemConfig, chb: ChannelSet, mode=Mode.MMSE, p_s=None, p_r=None):
    """Vectorized filters for a stacked batch of realizations.

    Returns ``(m, fa, alpha, ok)``: the combined receive matrices
    ``W_zf F_rx`` ``(n, K, N_rx)``, the transmit matrices ``F_tx A_zf``
    ``(n, N_tx, K)``, the per-realization ``alpha_zf`` and a mask of
    realizations whose Gram matrices passed the conditioning check.
    Only ``W_zf F_rx`` is formed, never ``F_rx`` itself.
    """
    mode = Mode(mode)
    p_s = cfg.p_s if p_s is None else np.broadcast_to(np.asarray(p_s, float), (cfg.K,))
    p_r = cfg.p_r if p_r is None else float(p_r)
    g = chb.g_sr_est
    gh = _herm(g)
    gram_sr = gh @ g
    grd = chb.g_rd_est
    gram_rd = grd @ _herm(grd)
    ok = (1.0 / np.linalg.cond(gram_sr) >= RCOND_MIN) & (1.0 / np.linalg.cond(gram_rd) >= RCOND_MIN)
    eye_k = np.eye(cfg.K)
    gram_sr = np.where(ok[:, None, None], gram_sr, eye_k)
    gram_rd = np.where(ok[:, None, None], gram_rd, eye_k)
    w = np.linalg.solve(gram_sr, gh)
    beta = np.asarray(chb.beta_rd)
    alpha = np.sqrt((cfg.n_tx - cfg.K) / np.sum(1.0 / (beta * (1.0 + cfg.eps_h2)), axis=-1))
    a = alpha[:, None, None] * _herm(np.linalg.solve(gram_rd, grd))
    if mode is not Mode.MMSE:
        return w, a, alpha, ok
    # W F_rx = W S C^{-1} = (C^{-1} S W^H)^H, C = S + p_r H (A A^H + eps I) H^H + sigma^2 I
    s = (g * p_s) @ gh
    h = chb.h_li_est
    ha = h @ a
    c = s + p_r * (ha @ _herm(ha) + cfg.eps_t2 * (h @ _herm(h)))
    c[..., np.arange(cfg.n_rx), np.arange(cfg.n_rx)] += cfg.sigma_nr2
    m = _herm(np.linalg.solve(c, s @ _herm(w)))
    return m, a, alpha, ok
