"""Minimum-power allocation under per-pair rate targets.

Each target ``R_k >= R0_k`` splits into one SINR constraint per hop with
``gamma_k = 2**R0_k - 1``; both are linear in ``(p_S, p_R)`` once the rate
coefficients are frozen, so every iteration is an LP.  The iteration
re-estimates the coefficients (the loopback filter depends on the powers)
and re-solves a fixed number of times.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from . import simplex
from .channel import SystemConfig
from .filters import Mode
from .rates import DEFAULT_N_IT, RateCoefficients, estimate_coefficients, rate_report

log = logging.getLogger(__name__)

DEFAULT_L = 5
P_S0_DB = 3.0
P_R0_DB = 10.0


class AllocStatus(str, enum.Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    ITERATION_LIMIT = "iteration-limit"


@dataclass
class OpaProblem:
    coeffs: RateCoefficients
    r0: np.ndarray
    p_s0: np.ndarray
    p_r0: float
    uniform: bool = False

    def __post_init__(self):
        K = self.coeffs.K
        self.r0 = np.broadcast_to(np.asarray(self.r0, float), (K,)).copy()
        self.p_s0 = np.broadcast_to(np.asarray(self.p_s0, float), (K,)).copy()
        if np.any(self.r0 < 0):
            raise ValueError("rate targets must be >= 0")
        if np.any(self.p_s0 <= 0) or self.p_r0 <= 0:
            raise ValueError("peak powers must be > 0")

    @property
    def gamma(self) -> np.ndarray:
        return np.exp2(self.r0) - 1.0


@dataclass
class LpStandardForm:
    """``min c.x  s.t.  a_ub x <= b_ub,  0 <= x <= upper``.

    Variables are ``(p_S,1 .. p_S,K, p_R)``, or ``(p_S, p_R)`` for the uniform
    variant.  Rows ``0..K-1`` are the source-relay hop, ``K..2K-1`` the
    relay-destination hop.
    """

    c: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    upper: np.ndarray
    blocked_pairs: list = field(default_factory=list)
    uniform: bool = False


@dataclass
class PowerAllocation:
    p_s: np.ndarray
    p_r: float
    status: AllocStatus
    violated_pairs: list = field(default_factory=list)
    iteration: int = 0

    @property
    def total(self) -> float:
        return float(np.sum(self.p_s) + self.p_r)


def linearize_constraints(problem: OpaProblem) -> LpStandardForm:
    c = problem.coeffs
    K = c.K
    g = problem.gamma
    off = ~np.eye(K, dtype=bool)
    # SR: gamma*(p_k V + sum_j p_j MP_kj + p_R LI) - p_k MV <= -gamma*AN
    a_sr = g[:, None] * np.where(off, c.mp_sr, 0.0)
    a_sr[np.diag_indices(K)] = g * c.v_sr - c.mv_sr
    li = (g * c.li_sr)[:, None]
    b_sr = -g * c.an_sr
    # RD: p_R (gamma (V + MP) - MV) <= -gamma*AN
    rd_coef = g * (c.v_rd + c.mp_rd) - c.mv_rd
    b_rd = -g * c.an_rd
    blocked = [int(k) for k in np.flatnonzero((g > 0) & (rd_coef >= 0) & (b_rd < 0))]
    if problem.uniform:
        a_sr = a_sr.sum(axis=1, keepdims=True)
        upper = np.array([problem.p_s0.min(), problem.p_r0])
        obj = np.array([float(K), 1.0])
        width = 1
    else:
        upper = np.append(problem.p_s0, problem.p_r0)
        obj = np.ones(K + 1)
        width = K
    a = np.zeros((2 * K, width + 1))
    a[:K, :width] = a_sr
    a[:K, width:] = li
    a[K:, width] = rd_coef
    return LpStandardForm(obj, a, np.concatenate([b_sr, b_rd]), upper, blocked, problem.uniform)


def _violated_pairs(lp: LpStandardForm, x, K, tol=1e-9):
    res = lp.a_ub @ x - lp.b_ub
    bad = res > tol * max(1.0, np.abs(lp.b_ub).max())
    return sorted(set(np.flatnonzero(bad[:K]).tolist()) | set(np.flatnonzero(bad[K:]).tolist()))


def solve_lp(lp: LpStandardForm) -> PowerAllocation:
    """Minimum-total-power point of ``lp`` (or an infeasibility report)."""
    K = lp.a_ub.shape[0] // 2
    res = simplex.solve(lp.c, lp.a_ub, lp.b_ub, lp.upper)
    x = res.x
    if lp.uniform:
        p_s, p_r = np.full(K, x[0]), float(x[1])
    else:
        p_s, p_r = x[:-1].copy(), float(x[-1])
    if res.status is simplex.LpStatus.OPTIMAL:
        return PowerAllocation(p_s, p_r, AllocStatus.FEASIBLE)
    violated = sorted(set(lp.blocked_pairs) | set(_violated_pairs(lp, x, K)))
    return PowerAllocation(p_s, p_r, AllocStatus.INFEASIBLE, violated)


@dataclass
class AllocationRun:
    allocation: PowerAllocation
    trace: list
    coeffs: RateCoefficients | None = None

    @property
    def feasible(self) -> bool:
        return self.allocation.status is AllocStatus.FEASIBLE


def _iterate(cfg, r0, n_it, L, p_s0, p_r0, mode, uniform, seed) -> AllocationRun:
    if L < 1:
        raise ValueError("L must be >= 1")
    K = cfg.K
    r0 = np.broadcast_to(np.asarray(r0, float), (K,)).copy()
    p_s0 = np.broadcast_to(np.asarray(p_s0, float), (K,)).copy()
    p_s, p_r = p_s0.copy(), float(p_r0)
    trace = []
    coeffs = None
    keys = tuple(int(k) for k in np.atleast_1d(seed))
    for i in range(1, L + 1):
        coeffs = estimate_coefficients(cfg, p_s, p_r, n_it, mode, seed=(*keys, i))
        alloc = solve_lp(linearize_constraints(OpaProblem(coeffs, r0, p_s0, p_r0, uniform)))
        alloc.iteration = i
        if alloc.status is not AllocStatus.FEASIBLE:
            log.info("iteration %d infeasible; pairs %s", i, alloc.violated_pairs)
            trace.append(_trace_row(i, alloc, coeffs, p_s, p_r))
            return AllocationRun(alloc, trace, coeffs)
        trace.append(_trace_row(i, alloc, coeffs, p_s, p_r))
        p_s, p_r = alloc.p_s, alloc.p_r
    return AllocationRun(alloc, trace, coeffs)


def _trace_row(i, alloc, coeffs, prev_s, prev_r):
    rep = rate_report(coeffs, alloc.p_s, alloc.p_r)
    step = float(np.linalg.norm(np.append(alloc.p_s - prev_s, alloc.p_r - prev_r)))
    return {
        "iteration": i,
        "p_s": alloc.p_s.copy(),
        "p_r": alloc.p_r,
        "rates": rep.r,
        "feasible": alloc.status is AllocStatus.FEASIBLE,
        "step": step,
    }


def run_algorithm1(cfg: SystemConfig, r0, n_it: int = DEFAULT_N_IT, L: int = DEFAULT_L, p_s0=None, p_r0=None,
                   mode=Mode.MMSE, seed=0) -> AllocationRun:
    """Iterative per-pair power allocation.

    Starts from the peak powers and repeats ``L`` times: estimate the rate
    coefficients at the current powers, solve the LP, adopt its solution.
    Peak powers default to 3 dB per source and 10 dB at the relay.
    """
    p_s0 = 10 ** (P_S0_DB / 10) if p_s0 is None else p_s0
    p_r0 = 10 ** (P_R0_DB / 10) if p_r0 is None else p_r0
    return _iterate(cfg, r0, n_it, L, p_s0, p_r0, Mode(mode), False, seed)


def run_oupa(cfg: SystemConfig, r0, n_it: int = DEFAULT_N_IT, L: int = DEFAULT_L, p_s0=None, p_r0=None,
             mode=Mode.MMSE, seed=0) -> AllocationRun:
    """Same iteration with one source power shared by all pairs."""
    p_s0 = 10 ** (P_S0_DB / 10) if p_s0 is None else p_s0
    p_r0 = 10 ** (P_R0_DB / 10) if p_r0 is None else p_r0
    return _iterate(cfg, r0, n_it, L, p_s0, p_r0, Mode(mode), True, seed)


def draw_rate_targets(rng: np.random.Generator, K: int, sum_rate: float, support=(1, 2, 3)) -> np.ndarray:
    """Per-pair targets proportional to discrete-uniform weights, summing to ``sum_rate``."""
    w = rng.choice(np.asarray(support, float), size=K)
    return sum_rate * w / w.sum()
