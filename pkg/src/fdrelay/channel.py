"""System configuration, block-fading channel draws and transmit impairments.

Estimates are drawn first and the true channels are built as
``H = H_est + E`` with an independent error ``E ~ CN(0, eps_h2)``.  The
estimate therefore has variance ``nominal + eps_h2`` (the value the precoder
normalization is derived from) and the true channel ``nominal + 2*eps_h2``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .modem import SUPPORTED_ORDERS

_LN10_10 = np.log(10.0) / 10.0


@dataclass(frozen=True)
class SystemConfig:
    """Scalar parameters of one relay setup.

    Powers and variances are linear.  ``p_s`` may be a scalar (same power for
    every pair) or a length-``K`` sequence.  ``beta_sr``/``beta_rd`` pin the
    large-scale gains; when left as ``None`` they are drawn per realization
    (log-normal if ``shadowing_sigma_db > 0``, else all ones).
    """

    K: int = 5
    n_rx: int = 64
    n_tx: int = 64
    mod_order: int = 16
    p_s: object = 1.0
    p_r: float = 1.0
    sigma_li2: float = 1.0
    sigma_nr2: float = 1.0
    sigma_nd2: float = 1.0
    eps_h2: float = 1e-3
    eps_t2: float = 1e-3
    delay: int = 1
    shadowing_sigma_db: float = 0.0
    beta_sr: object = None
    beta_rd: object = None
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "p_s", _as_vector(self.p_s, self.K, "p_s"))
        if self.beta_sr is not None:
            object.__setattr__(self, "beta_sr", _as_vector(self.beta_sr, self.K, "beta_sr"))
        if self.beta_rd is not None:
            object.__setattr__(self, "beta_rd", _as_vector(self.beta_rd, self.K, "beta_rd"))
        self.validate()

    def validate(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if not self.K < min(self.n_rx, self.n_tx):
            raise ValueError(f"need K < min(n_rx, n_tx), got K={self.K}, n_rx={self.n_rx}, n_tx={self.n_tx}")
        if self.mod_order not in SUPPORTED_ORDERS:
            raise ValueError(f"mod_order must be one of {SUPPORTED_ORDERS}")
        if self.delay < 1:
            raise ValueError("delay must be >= 1")
        for name in ("p_r", "sigma_li2", "sigma_nr2", "sigma_nd2", "eps_h2", "eps_t2", "shadowing_sigma_db"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
        if np.any(self.p_s < 0) or not np.all(np.isfinite(self.p_s)):
            raise ValueError("source powers must be finite and >= 0")
        for b in (self.beta_sr, self.beta_rd):
            if b is not None and np.any(b <= 0):
                raise ValueError("large-scale gains must be > 0")

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    @property
    def bits_per_symbol(self) -> int:
        return int(self.mod_order).bit_length() - 1

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = v.tolist() if isinstance(v, np.ndarray) else v
        return out


def _as_vector(v, K, name):
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0:
        arr = np.full(K, float(arr))
    if arr.shape != (K,):
        raise ValueError(f"{name} must be a scalar or have length K={K}, got shape {arr.shape}")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass
class ChannelSet:
    """One block-fading realization (small-scale matrices are unit-scale)."""

    h_sr: np.ndarray
    h_rd: np.ndarray
    h_li: np.ndarray
    h_sr_est: np.ndarray
    h_rd_est: np.ndarray
    h_li_est: np.ndarray
    beta_sr: np.ndarray
    beta_rd: np.ndarray
    err_sr: np.ndarray = field(repr=False, default=None)
    err_rd: np.ndarray = field(repr=False, default=None)
    err_li: np.ndarray = field(repr=False, default=None)

    # properties broadcast over a leading batch axis (see draw_channel_batch)
    @property
    def g_sr(self):
        return self.h_sr * np.sqrt(self.beta_sr)[..., None, :]

    @property
    def g_rd(self):
        return np.sqrt(self.beta_rd)[..., :, None] * self.h_rd

    @property
    def g_sr_est(self):
        return self.h_sr_est * np.sqrt(self.beta_sr)[..., None, :]

    @property
    def g_rd_est(self):
        return np.sqrt(self.beta_rd)[..., :, None] * self.h_rd_est


def crandn(rng: np.random.Generator, shape, var=1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with variance ``var``."""
    z = rng.standard_normal(shape + (2,) if isinstance(shape, tuple) else (shape, 2))
    return np.sqrt(var / 2.0) * (z[..., 0] + 1j * z[..., 1])


def lognormal_params_db(sigma_db: float) -> tuple[float, float]:
    """dB-domain ``(mean, std)`` giving a log-normal gain with linear mean 1.

    With ``10 log10(beta) ~ N(mu, sigma^2)``, ``E[beta] = exp(a mu + (a sigma)^2 / 2)``
    where ``a = ln(10)/10``; unit mean requires ``mu = -a sigma^2 / 2``.
    """
    return -_LN10_10 * sigma_db**2 / 2.0, sigma_db


def draw_large_scale(rng: np.random.Generator, K: int, sigma_db: float) -> np.ndarray:
    if sigma_db <= 0:
        return np.ones(K)
    mu, sd = lognormal_params_db(sigma_db)
    return 10.0 ** ((mu + sd * rng.standard_normal(K)) / 10.0)


def trial_rng(master_seed: int, *keys: int) -> np.random.Generator:
    """Independent stream keyed by ``(master_seed, *keys)``."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), *map(int, keys)]))


def draw_channels(cfg: SystemConfig, trial_seed) -> ChannelSet:
    """Draw one realization.  ``trial_seed`` is an int, a key tuple or a Generator."""
    if isinstance(trial_seed, np.random.Generator):
        rng = trial_seed
    elif isinstance(trial_seed, tuple):
        rng = trial_rng(cfg.master_seed, *trial_seed)
    else:
        rng = trial_rng(cfg.master_seed, trial_seed)
    K, nr, nt, e2 = cfg.K, cfg.n_rx, cfg.n_tx, cfg.eps_h2
    beta_sr = cfg.beta_sr if cfg.beta_sr is not None else draw_large_scale(rng, K, cfg.shadowing_sigma_db)
    beta_rd = cfg.beta_rd if cfg.beta_rd is not None else draw_large_scale(rng, K, cfg.shadowing_sigma_db)

    def pair(shape, var):
        est = crandn(rng, shape, var + e2)
        if e2 == 0:
            return est, est.copy(), np.zeros(shape, dtype=complex)
        err = crandn(rng, shape, e2)
        return est, est + err, err

    sr_est, sr, e_sr = pair((nr, K), 1.0)
    rd_est, rd, e_rd = pair((K, nt), 1.0)
    li_est, li, e_li = pair((nr, nt), cfg.sigma_li2)
    return ChannelSet(sr, rd, li, sr_est, rd_est, li_est, np.asarray(beta_sr, float), np.asarray(beta_rd, float),
                      e_sr, e_rd, e_li)


def draw_channel_batch(cfg: SystemConfig, rng: np.random.Generator, n: int) -> ChannelSet:
    """``n`` independent realizations stacked along a leading axis."""
    K, nr, nt, e2 = cfg.K, cfg.n_rx, cfg.n_tx, cfg.eps_h2

    def gains(pinned):
        if pinned is not None:
            return np.broadcast_to(pinned, (n, K)).copy()
        return draw_large_scale(rng, n * K, cfg.shadowing_sigma_db).reshape(n, K)

    beta_sr, beta_rd = gains(cfg.beta_sr), gains(cfg.beta_rd)

    def pair(shape, var):
        est = crandn(rng, (n,) + shape, var + e2)
        err = crandn(rng, (n,) + shape, e2) if e2 > 0 else np.zeros((n,) + shape, dtype=complex)
        return est, est + err, err

    sr_est, sr, e_sr = pair((nr, K), 1.0)
    rd_est, rd, e_rd = pair((K, nt), 1.0)
    li_est, li, e_li = pair((nr, nt), cfg.sigma_li2)
    return ChannelSet(sr, rd, li, sr_est, rd_est, li_est, beta_sr, beta_rd, e_sr, e_rd, e_li)


def apply_tx_impairment(t_clean, eps_t2: float, rng: np.random.Generator) -> np.ndarray:
    """Add independent ``CN(0, eps_t2)`` distortion to each transmitted entry."""
    t_clean = np.asarray(t_clean, dtype=complex)
    if eps_t2 == 0:
        return t_clean.copy()
    return t_clean + crandn(rng, t_clean.shape, eps_t2)


def snr_relay_db(cfg: SystemConfig) -> float:
    """SNR at the relay, ``10 log10(sum_k beta_SR,k p_S,k / sigma_nr2)``.

    Uses the pinned ``beta_sr`` if present, otherwise its mean (1).
    """
    if cfg.sigma_nr2 <= 0:
        raise ValueError("sigma_nr2 must be > 0 to define the relay SNR")
    beta = cfg.beta_sr if cfg.beta_sr is not None else np.ones(cfg.K)
    return float(10.0 * np.log10(np.sum(beta * cfg.p_s) / cfg.sigma_nr2))


def noise_for_snr(snr_db: float, p_s, K: int, beta=None) -> float:
    """Relay noise variance that yields ``snr_db`` for the given source powers."""
    p = np.broadcast_to(np.asarray(p_s, float), (K,))
    b = np.ones(K) if beta is None else np.asarray(beta, float)
    return float(np.sum(b * p) / 10.0 ** (snr_db / 10.0))
