"""Full-duplex relay transmission loop and BER sweeps.

Per slot ``i`` the relay receives its own delayed retransmission::

    r[i]    = G_SR D_pS^1/2 x[i] + sqrt(p_R) H_LI t[i] + n_r[i]
    t[i]    = F_tx A_zf xhat[i-d] + e[i]            (xhat[<0] = 0)
    xhat[i] = Q(W_zf F_rx r[i])
    y_d[i]  = sqrt(p_R) G_RD t[i] + n_d[i]
    yhat[i] = Q(y_d[i] / (sqrt(p_R) alpha_zf))

Everything except the ``xhat`` recursion is linear in the random draws, so
each block is reduced to a per-slot drive term and a K x K loopback coupling
and the recursion runs in :func:`fdrelay.kernels.feedback_detect`.

Random numbers are keyed by ``(master_seed, N, trial)`` only: every relay
power and mode evaluated at the same antenna count sees the same channels,
symbols and noise.  Half-duplex forwards in a separate phase, so its relay
sees no loopback while its destinations receive the same ``t`` as above.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .channel import ChannelSet, SystemConfig, draw_channels, trial_rng
from .filters import (FilterSet, Mode, SingularRealization, alpha_zf, mmse_solve,
                      tx_covariance, zf_detector, zf_precoder)
from .modem import label_bit_errors, qam

DEFAULT_TRIALS = 500
DEFAULT_SYMBOLS = 200
MAX_REDRAWS = 20
_CHUNK = 50


def db2lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def wilson_interval(errors: int, n: int, z: float = 1.959964) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    p = errors / n
    den = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    lo = 0.0 if errors == 0 else max(0.0, centre - half)
    hi = 1.0 if errors == n else min(1.0, centre + half)
    return lo, hi


@dataclass
class SimResult:
    mode: str
    n_antennas: int
    p_r_db: float
    relay_bit_errors: int = 0
    relay_bits: int = 0
    e2e_bit_errors: int = 0
    e2e_bits: int = 0
    trials: int = 0
    symbols: int = 0
    singular: int = 0

    def __iadd__(self, other: "SimResult"):
        self.relay_bit_errors += other.relay_bit_errors
        self.relay_bits += other.relay_bits
        self.e2e_bit_errors += other.e2e_bit_errors
        self.e2e_bits += other.e2e_bits
        self.trials += other.trials
        self.singular += other.singular
        self.symbols = self.symbols or other.symbols
        return self

    @property
    def relay_ber(self) -> float:
        return self.relay_bit_errors / self.relay_bits if self.relay_bits else float("nan")

    @property
    def e2e_ber(self) -> float:
        return self.e2e_bit_errors / self.e2e_bits if self.e2e_bits else float("nan")

    def relay_ci(self):
        return wilson_interval(self.relay_bit_errors, self.relay_bits)

    def e2e_ci(self):
        return wilson_interval(self.e2e_bit_errors, self.e2e_bits)


@dataclass
class BlockDraws:
    """Unit-scale randomness of one block; scaled per cell."""

    labels: np.ndarray  # (n, K) transmitted labels
    z_r: np.ndarray  # (n, N_rx) relay noise
    z_t: np.ndarray  # (n, N_tx) transmit impairment
    z_d: np.ndarray  # (n, K) destination noise

    @classmethod
    def draw(cls, rng: np.random.Generator, cfg: SystemConfig, n_symbols: int) -> "BlockDraws":
        def cn(*shape):
            z = rng.standard_normal(shape + (2,))
            return (z[..., 0] + 1j * z[..., 1]) * np.sqrt(0.5)

        labels = rng.integers(0, cfg.mod_order, size=(n_symbols, cfg.K))
        return cls(labels, cn(n_symbols, cfg.n_rx), cn(n_symbols, cfg.n_tx), cn(n_symbols, cfg.K))


@dataclass
class _Prepared:
    base: np.ndarray
    coupling: np.ndarray
    dest_gain: np.ndarray = field(repr=False)  # (K, K): G_RD F_tx A / alpha
    dest_imp: np.ndarray = field(repr=False)  # (n, K): impairment + noise at destinations, equalized


def _prepare(cfg: SystemConfig, ch: ChannelSet, fs: FilterSet, dr: BlockDraws, genie_relay: bool) -> _Prepared:
    c = qam(cfg.mod_order)
    x = c.points[dr.labels] * np.sqrt(cfg.p_s)
    m = fs.w_zf @ fs.f_rx
    fa = fs.f_tx @ fs.a_zf
    e = np.sqrt(cfg.eps_t2) * dr.z_t
    coupling = np.zeros((cfg.K, cfg.K), dtype=complex)
    if genie_relay:
        base = c.points[dr.labels].astype(complex)
    else:
        base = x @ (m @ ch.g_sr).T + np.sqrt(cfg.sigma_nr2) * (dr.z_r @ m.T)
        if fs.transmits_during_reception:
            mli = np.sqrt(cfg.p_r) * (m @ ch.h_li)
            base += e @ mli.T
            coupling = mli @ fa
    g_rd = ch.g_rd
    scale = np.sqrt(cfg.p_r) * fs.alpha_zf
    inv = 1.0 / scale if scale > 0 else 1.0
    dest_gain = (np.sqrt(cfg.p_r) * inv) * (g_rd @ fa)
    dest_imp = (np.sqrt(cfg.p_r) * inv) * (e @ g_rd.T) + (np.sqrt(cfg.sigma_nd2) * inv) * dr.z_d
    return _Prepared(base, coupling, dest_gain, dest_imp)


def simulate_blocks(cfg: SystemConfig, blocks, genie_relay: bool = False) -> tuple[int, int, int, int]:
    """Run a batch of ``(ChannelSet, FilterSet, BlockDraws)`` blocks.

    Returns ``(relay_bit_errors, relay_bits, e2e_bit_errors, e2e_bits)``.
    """
    if not blocks:
        return 0, 0, 0, 0
    c = qam(cfg.mod_order)
    d = cfg.delay
    preps = [_prepare(cfg, ch, fs, dr, genie_relay) for ch, fs, dr in blocks]
    n = preps[0].base.shape[0]
    if n <= d:
        raise ValueError(f"need more symbols ({n}) than the processing delay ({d})")
    base = np.stack([p.base for p in preps])
    coupling = np.stack([p.coupling for p in preps])
    if genie_relay:
        rx_labels = np.stack([dr.labels for _, _, dr in blocks])
        rx_sym = c.points[rx_labels]
    else:
        rx_labels, rx_sym = kernels.feedback_detect(base, coupling, d, c.axis_levels)
    relay_err = e2e_err = 0
    for b, (p, (_, _, dr)) in enumerate(zip(preps, blocks)):
        relay_err += label_bit_errors(dr.labels[d:], rx_labels[b, d:])
        y = rx_sym[b, :-d] @ p.dest_gain.T + p.dest_imp[d:]
        y_labels = kernels.quantize_labels(y, c.axis_levels)
        e2e_err += label_bit_errors(dr.labels[:-d], y_labels)
    nbits = len(blocks) * (n - d) * cfg.K * c.bits_per_symbol
    return relay_err, nbits, e2e_err, nbits


def run_block(cfg: SystemConfig, channels: ChannelSet, filters: FilterSet, n_symbols: int,
              rng=None, genie_relay: bool = False) -> SimResult:
    """Simulate one coherence block of ``n_symbols`` slots (first ``d`` slots not counted)."""
    if n_symbols <= cfg.delay:
        raise ValueError(f"n_symbols must exceed the delay {cfg.delay}")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    dr = BlockDraws.draw(rng, cfg, n_symbols)
    re, rb, ee, eb = simulate_blocks(cfg, [(channels, filters, dr)], genie_relay)
    return SimResult(filters.mode.value, cfg.n_rx, float(10 * np.log10(cfg.p_r)) if cfg.p_r > 0 else -np.inf,
                     re, rb, ee, eb, trials=1, symbols=n_symbols)


class _TrialFilters:
    """Filter construction for one realization, reusing p_R-independent parts."""

    def __init__(self, cfg: SystemConfig, ch: ChannelSet):
        self.cfg = cfg
        g = ch.g_sr_est
        self.w = zf_detector(g)
        self.alpha = alpha_zf(ch.beta_rd, cfg.eps_h2, cfg.n_tx, cfg.K)
        self.a = zf_precoder(ch.g_rd_est, self.alpha)
        self.f_tx = np.eye(cfg.n_tx)
        self.eye_rx = np.eye(cfg.n_rx)
        self.s = (g * cfg.p_s) @ g.conj().T
        h = ch.h_li_est
        self.li_cov = h @ tx_covariance(self.a, self.f_tx, cfg.eps_t2) @ h.conj().T
        self._cache = {}

    def get(self, mode: Mode, p_r: float) -> FilterSet:
        key = (mode, p_r if mode is Mode.MMSE else None)
        if key not in self._cache:
            if mode is Mode.MMSE:
                f_rx = mmse_solve(self.s, self.li_cov, self.cfg.sigma_nr2, p_r)
            else:
                f_rx = self.eye_rx
            self._cache[key] = FilterSet(self.w, self.a, self.alpha, f_rx, self.f_tx, mode)
        return self._cache[key]


def _draw_trial(cfg: SystemConfig, n_ant: int, trial: int, n_symbols: int):
    singular = 0
    for attempt in range(MAX_REDRAWS):
        rng = trial_rng(cfg.master_seed, n_ant, trial, attempt)
        ch = draw_channels(cfg, rng)
        try:
            tf = _TrialFilters(cfg, ch)
        except SingularRealization:
            singular += 1
            continue
        return ch, tf, BlockDraws.draw(rng, cfg, n_symbols), singular
    raise SingularRealization(f"trial {trial} at N={n_ant}: {MAX_REDRAWS} singular redraws")


def _run_chunk(cfg, n_ant, trials, cells, n_symbols, genie_relay):
    drawn = [_draw_trial(cfg, n_ant, t, n_symbols) for t in trials]
    out = {}
    for p_r_db, mode in cells:
        ccfg = cfg.replace(p_r=float(db2lin(p_r_db)))
        blocks = [(ch, tf.get(mode, ccfg.p_r), dr) for ch, tf, dr, _ in drawn]
        re, rb, ee, eb = simulate_blocks(ccfg, blocks, genie_relay)
        out[(p_r_db, mode)] = SimResult(mode.value, n_ant, p_r_db, re, rb, ee, eb, len(trials), n_symbols,
                                        sum(s for *_, s in drawn))
    return out


def sweep(cfg: SystemConfig, n_values, p_r_db_values, modes=(Mode.MMSE,), trials: int = DEFAULT_TRIALS,
          symbols_per_trial: int = DEFAULT_SYMBOLS, threads: int = 1, genie_relay: bool = False,
          on_cell=None) -> list[SimResult]:
    """BER over the grid ``N x p_R[dB] x mode`` with ``N = n_rx = n_tx``.

    Results come back in grid order (N outermost, then p_R, then mode).
    ``on_cell`` is called with each finished antenna group's results.
    """
    n_values = list(n_values)
    p_r_db_values = [float(p) for p in p_r_db_values]
    modes = [Mode(m) for m in modes]
    if not (n_values and p_r_db_values and modes):
        raise ValueError("empty grid")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    cells = [(p, m) for p in p_r_db_values for m in modes]
    results = []
    for n_ant in n_values:
        ncfg = cfg.replace(n_rx=int(n_ant), n_tx=int(n_ant))
        chunks = [range(s, min(s + _CHUNK, trials)) for s in range(0, trials, _CHUNK)]
        acc = {cell: SimResult(cell[1].value, int(n_ant), cell[0]) for cell in cells}

        def job(ch_range):
            return _run_chunk(ncfg, int(n_ant), ch_range, cells, symbols_per_trial, genie_relay)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                parts = list(ex.map(job, chunks))
        else:
            parts = [job(c) for c in chunks]
        for part in parts:
            for cell, r in part.items():
                acc[cell] += r
        group = [acc[cell] for cell in cells]
        if on_cell is not None:
            on_cell(group)
        results.extend(group)
    return results
