"""Channel-statistic coefficients, per-pair achievable rates and energy efficiency.

The SINR of each hop is written as a linear-fractional function of the
powers,

    SR:  p_k MV / (p_k V + sum_{j!=k} p_j MP_kj + p_R LI + AN)
    RD:  p_R MV / (p_R V + p_R MP + AN)

with coefficients averaged over channel realizations (fading plus
estimation error) at fixed powers.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .channel import SystemConfig, draw_channel_batch, trial_rng
from .filters import Mode, batch_filters

log = logging.getLogger(__name__)

DEFAULT_N_IT = 1000
_BATCH = 250


@dataclass
class RateCoefficients:
    mv_sr: np.ndarray
    v_sr: np.ndarray
    mp_sr: np.ndarray  # (K, K), zero diagonal
    li_sr: np.ndarray
    an_sr: np.ndarray
    mv_rd: np.ndarray
    v_rd: np.ndarray
    mp_rd: np.ndarray
    an_rd: np.ndarray
    n_samples: int = 0
    singular: int = 0

    @property
    def K(self) -> int:
        return len(self.mv_sr)

    def uniform(self) -> "RateCoefficients":
        """Pair-averaged copy (every pair sees the mean statistics)."""
        K = self.K
        off = ~np.eye(K, dtype=bool)
        mp = np.zeros((K, K))
        mp[off] = self.mp_sr[off].mean()
        f = lambda v: np.full(K, np.mean(v))
        return RateCoefficients(f(self.mv_sr), f(self.v_sr), mp, f(self.li_sr), f(self.an_sr), f(self.mv_rd),
                                f(self.v_rd), f(self.mp_rd), f(self.an_rd), self.n_samples, self.singular)


@dataclass
class RateReport:
    r_sr: np.ndarray
    r_rd: np.ndarray

    @property
    def r(self) -> np.ndarray:
        return np.minimum(self.r_sr, self.r_rd)

    @property
    def sum_rate(self) -> float:
        return float(self.r.sum())


class _Moments:
    """Running sums for the coefficient estimators."""

    def __init__(self, K):
        self.n = 0
        self.s_sr = np.zeros(K, complex)
        self.s2_sr = np.zeros((K, K))
        self.li = np.zeros(K)
        self.an = np.zeros(K)
        self.s_rd = np.zeros(K, complex)
        self.s2_rd = np.zeros((K, K))

    def add(self, t_sr, t2_sr, li, an, t_rd, t2_rd):
        self.n += t_sr.shape[0]
        self.s_sr += np.diagonal(t_sr, axis1=1, axis2=2).sum(0)
        self.s2_sr += t2_sr.sum(0)
        self.li += li.sum(0)
        self.an += an.sum(0)
        self.s_rd += np.diagonal(t_rd, axis1=1, axis2=2).sum(0)
        self.s2_rd += t2_rd.sum(0)


def estimate_coefficients(cfg: SystemConfig, p_s=None, p_r=None, n_it: int = DEFAULT_N_IT, mode=Mode.MMSE,
                          seed=0) -> RateCoefficients:
    """Monte Carlo estimate of the rate coefficients at powers ``(p_s, p_r)``.

    The loopback filter (MMSE mode) is rebuilt for every realization at the
    given powers.  ``seed`` keys the realization stream together with
    ``cfg.master_seed``; singular realizations are skipped and counted.
    Second moments are conditioned on the channel estimates, with the
    Gaussian estimation error averaged out exactly.
    """
    if n_it < 1:
        raise ValueError("n_it must be >= 1")
    K = cfg.K
    p_s = cfg.p_s if p_s is None else np.broadcast_to(np.asarray(p_s, float), (K,))
    p_r = cfg.p_r if p_r is None else float(p_r)
    rng = trial_rng(cfg.master_seed, *np.atleast_1d(seed))
    mom = _Moments(K)
    singular = 0
    done = 0
    while done < n_it:
        b = min(_BATCH, n_it - done)
        chb = draw_channel_batch(cfg, rng, b)
        m, fa, _, ok = batch_filters(cfg, chb, mode, p_s, p_r)
        singular += int((~ok).sum())
        done += b
        if not ok.any():
            continue
        m, fa = m[ok], fa[ok]
        e2 = cfg.eps_h2
        beta_sr, beta_rd = chb.beta_sr[ok], chb.beta_rd[ok]
        m_norm = np.sum(np.abs(m) ** 2, axis=-1)  # (n, K)
        fa_norm = np.sum(np.abs(fa) ** 2, axis=-2)  # (n, K)
        # the estimation errors are independent of every filter, so their
        # contribution to the second moments is integrated in closed form
        t_sr = m @ chb.g_sr_est[ok]
        t2_sr = np.abs(t_sr) ** 2 + e2 * m_norm[:, :, None] * beta_sr[:, None, :]
        mh = m @ chb.h_li_est[ok] @ fa
        li = np.sum(np.abs(mh) ** 2, axis=-1) + e2 * m_norm * fa_norm.sum(-1)[:, None]
        an = cfg.sigma_nr2 * m_norm
        t_rd = chb.g_rd_est[ok] @ fa
        t2_rd = np.abs(t_rd) ** 2 + e2 * beta_rd[:, :, None] * fa_norm[:, None, :]
        mom.add(t_sr, t2_sr, li, an, t_rd, t2_rd)
    if singular:
        log.info("skipped %d singular realizations", singular)
    n = mom.n
    if n == 0:
        raise RuntimeError("no usable realizations")
    off = ~np.eye(K, dtype=bool)
    mean_sr = mom.s_sr / n
    mean_rd = mom.s_rd / n
    mv_sr = np.abs(mean_sr) ** 2
    mv_rd = np.abs(mean_rd) ** 2
    v_sr = np.maximum(np.diagonal(mom.s2_sr) / n - mv_sr, 0.0)
    v_rd = np.maximum(np.diagonal(mom.s2_rd) / n - mv_rd, 0.0)
    mp_sr = np.where(off, mom.s2_sr / n, 0.0)
    mp_rd = np.where(off, mom.s2_rd / n, 0.0).sum(axis=1)
    return RateCoefficients(mv_sr, v_sr, mp_sr, mom.li / n, mom.an / n, mv_rd, v_rd, mp_rd,
                            np.full(K, float(cfg.sigma_nd2)), n, singular)


def _log_rate(num, den):
    num = np.asarray(num, float)
    den = np.asarray(den, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        sinr = np.where(num == 0, 0.0, num / den)
    if np.any((num == 0) & (den == 0)):
        log.debug("0/0 SINR treated as zero rate")
    return np.log2(1.0 + sinr)


def sinr_sr_terms(c: RateCoefficients, p_s, p_r):
    p_s = np.broadcast_to(np.asarray(p_s, float), (c.K,))
    num = p_s * c.mv_sr
    den = p_s * c.v_sr + c.mp_sr @ p_s + p_r * c.li_sr + c.an_sr
    return num, den


def sinr_rd_terms(c: RateCoefficients, p_r):
    num = p_r * c.mv_rd
    den = p_r * c.v_rd + p_r * c.mp_rd + c.an_rd
    return num, den


def rate_sr(k, coeffs: RateCoefficients, p_s, p_r):
    """Source-to-relay rate of pair ``k`` (``k=None`` for all pairs)."""
    r = _log_rate(*sinr_sr_terms(coeffs, p_s, p_r))
    return r if k is None else float(r[k])


def rate_rd(k, coeffs: RateCoefficients, p_r):
    """Relay-to-destination rate of pair ``k`` (``k=None`` for all pairs)."""
    r = _log_rate(*sinr_rd_terms(coeffs, p_r))
    return r if k is None else float(r[k])


def rate_report(coeffs: RateCoefficients, p_s, p_r) -> RateReport:
    return RateReport(rate_sr(None, coeffs, p_s, p_r), rate_rd(None, coeffs, p_r))


def energy_efficiency(rates, p_s, p_r) -> float:
    """Sum rate over total transmit power."""
    r = rates.r if isinstance(rates, RateReport) else np.asarray(rates, float)
    total = float(np.sum(p_s) + p_r)
    if total <= 0:
        raise ValueError("total transmit power must be > 0")
    return float(np.sum(r) / total)
