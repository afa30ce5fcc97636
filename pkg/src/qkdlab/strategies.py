"""Attack strategies against a weak-coherent-source link.

Eve treats every non-vacuum pulse as a single photon, remaps the phases,
and runs the intercept-and-resend attack from :mod:`qkdlab.attack` with
resends only on the outcomes identifying phi~_0 and phi~_3.

* strategy one: phase remapping alone, resending ``|0_z>`` / ``|1_x>``.
* strategy two: adds the fake-signals attack; resend states and arrival
  times are optimised against a detector efficiency mismatch.
* strategy three: strategy two with Eve's own dark-count probability ``Y_0``
  and a thinned resend probability ``gamma``, tuned so that gain and QBER
  look like normal operation.

Every strategy is intercept-and-resend, an entanglement-breaking channel,
so any positive rate it produces is a rate for a key Eve knows about.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .attack import (
    NOMINAL,
    NORMAL_ARRIVAL,
    RemappedEnsemble,
    ResendSpec,
    fold_detector_error,
    min_qber,
    optimized_resend,
)
from .channel import LinkObservables, SystemParams, normal_observables, relative_deviation
from .keyrate import KeyRate, secure_rate

RESEND_SUPPORT = (0, 3)
SECURITY_NOTE = "BROKEN (intercept-and-resend)"
INSECURE_LABEL = "INSECURE (entanglement-breaking channel)"

# (efficiency mismatch, phase step) rows of the strategy-two comparison
TABLE2_ROWS = ((0.0667, 1.02), (0.04, 1.31), (0.03, 1.41))
# (distance km, mismatch, phase step, Y_0, gamma) rows of the strategy-three comparison
TABLE3_ROWS = ((88.0, 0.04, 1.31, 1e-9, 0.096), (87.0, 0.03, 1.41, 1.8e-8, 0.1))

MATCH_DELTA_POINTS = 150
MATCH_Y0_POINTS = 81
MATCH_GAMMA_POINTS = 101
MATCH_Y0_RANGE = (1e-10, 1e-6)


class InfeasibleMatch(RuntimeError):
    """No grid point reproduces the normal gain and QBER within tolerance."""


@dataclass(frozen=True)
class StrategyParams:
    delta: float
    mismatch: float = 1.0
    y0: float = 1e-7
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.delta <= math.pi / 2 + 1e-12:
            raise ValueError("delta must lie in (0, pi/2]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0.0 <= self.y0 <= 1.0:
            raise ValueError("y0 must lie in [0, 1]")


@dataclass(frozen=True)
class SinglePhotonAttack:
    e_1: float
    c_1: float


@dataclass(frozen=True)
class StrategyReport:
    params: StrategyParams
    attack: SinglePhotonAttack
    observables: LinkObservables
    key: KeyRate

    @property
    def label(self) -> str:
        # Alice and Bob would distil this key; Eve holds information on all of it.
        return INSECURE_LABEL if self.key.positive else "no key"


def attacked_observables(c_1: float, e_1: float, mu: float, y0: float,
                         gamma: float = 1.0) -> LinkObservables:
    """Gain and QBER when every non-vacuum pulse is intercepted.

    Vacuum pulses and unresent pulses click only through the dark count
    ``y0`` (error rate 1/2); resent pulses click with probability ``c_1``.
    """
    em = math.exp(-mu)
    nonvac = -math.expm1(-mu)
    g = gamma * c_1
    q = y0 * em + (g + (1.0 - g) * y0) * nonvac
    eq = y0 * em / 2.0 + (g * e_1 + (1.0 - g) * y0 / 2.0) * nonvac
    return LinkObservables(q, eq / q)


@lru_cache(maxsize=4096)
def attack_one(delta: float, e_detector: float = 0.0) -> SinglePhotonAttack:
    """Fixed resend of ``|0_z>`` (outcome 0) and ``|1_x>`` (outcome 3), normal arrival."""
    ens = RemappedEnsemble(delta)
    spec = ResendSpec({0: (NOMINAL[0], NORMAL_ARRIVAL), 3: (NOMINAL[3], NORMAL_ARRIVAL)})
    sol = min_qber(spec.penalties(ens, "bb84"))
    return SinglePhotonAttack(fold_detector_error(sol.qber, e_detector), sol.conclusive_prob)


@lru_cache(maxsize=4096)
def attack_two(delta: float, mismatch: float, eta_bob: float,
               e_detector: float = 0.0) -> SinglePhotonAttack:
    """Optimised time-shifted resend on outcomes 0 and 3.

    The efficient detector at the shifted time has efficiency ``eta_bob``
    and the other ``mismatch * eta_bob``; ``c_1`` therefore already
    contains Bob's detection efficiency.
    """
    ens = RemappedEnsemble(delta)
    spec = optimized_resend(ens, "bb84", mismatch, scale=eta_bob)
    sol = min_qber(spec.penalties(ens, "bb84"), support=RESEND_SUPPORT)
    return SinglePhotonAttack(fold_detector_error(sol.qber, e_detector), sol.conclusive_prob)


def strategy_one(p: SystemParams, delta: float) -> LinkObservables:
    a = attack_one(delta, p.e_detector)
    return attacked_observables(a.c_1, a.e_1, p.mu, p.p_dark)


def strategy_two(p: SystemParams, delta: float, mismatch: float) -> LinkObservables:
    a = attack_two(delta, mismatch, p.eta_bob, p.e_detector)
    return attacked_observables(a.c_1, a.e_1, p.mu, p.p_dark)


def strategy_three(p: SystemParams, sp: StrategyParams) -> LinkObservables:
    a = attack_two(sp.delta, sp.mismatch, p.eta_bob, p.e_detector)
    return attacked_observables(a.c_1, a.e_1, p.mu, sp.y0, sp.gamma)


def report_one(p: SystemParams, delta: float, n_bsteps: int = 3) -> StrategyReport:
    a = attack_one(delta, p.e_detector)
    obs = attacked_observables(a.c_1, a.e_1, p.mu, p.p_dark)
    return StrategyReport(StrategyParams(delta, 1.0, p.p_dark, 1.0), a, obs,
                          secure_rate(obs, p.mu, p.f_ec, n_bsteps))


def report_two(p: SystemParams, delta: float, mismatch: float, n_bsteps: int = 0) -> StrategyReport:
    a = attack_two(delta, mismatch, p.eta_bob, p.e_detector)
    obs = attacked_observables(a.c_1, a.e_1, p.mu, p.p_dark)
    return StrategyReport(StrategyParams(delta, mismatch, p.p_dark, 1.0), a, obs,
                          secure_rate(obs, p.mu, p.f_ec, n_bsteps))


def report_three(p: SystemParams, sp: StrategyParams, n_bsteps: int = 0) -> StrategyReport:
    a = attack_two(sp.delta, sp.mismatch, p.eta_bob, p.e_detector)
    obs = attacked_observables(a.c_1, a.e_1, p.mu, sp.y0, sp.gamma)
    return StrategyReport(sp, a, obs, secure_rate(obs, p.mu, p.f_ec, n_bsteps))


@dataclass(frozen=True)
class MatchResult:
    report: StrategyReport
    target: LinkObservables
    deviation: tuple[float, float]
    feasible_points: int


def match_grids(n_delta: int = MATCH_DELTA_POINTS, n_y0: int = MATCH_Y0_POINTS,
                n_gamma: int = MATCH_GAMMA_POINTS):
    deltas = (math.pi / 2) * np.arange(1, n_delta + 1) / n_delta
    y0s = np.logspace(math.log10(MATCH_Y0_RANGE[0]), math.log10(MATCH_Y0_RANGE[1]), n_y0)
    gammas = np.linspace(0.0, 1.0, n_gamma)
    return deltas, y0s, gammas


def match_normal(p: SystemParams, mismatch: float, tol: float = 0.10, n_bsteps: int = 0,
                 grids=None) -> MatchResult:
    """Grid search for a strategy-three attack indistinguishable from normal operation.

    Among grid points whose gain and QBER both lie within relative ``tol`` of
    the normal values, returns the one with the largest key rate (first in
    ``(delta, Y_0, gamma)`` order on ties).
    """
    if not 0.0 <= tol < 1.0:
        raise ValueError("tol must lie in [0, 1)")
    target = normal_observables(p)
    deltas, y0s, gammas = grids if grids is not None else match_grids()
    em = math.exp(-p.mu)
    nonvac = -math.expm1(-p.mu)
    y = np.asarray(y0s)[:, None]
    best: tuple[float, StrategyParams] | None = None
    n_feasible = 0
    for d in deltas:
        a = attack_two(float(d), mismatch, p.eta_bob, p.e_detector)
        g = np.asarray(gammas)[None, :] * a.c_1
        q = y * em + (g + (1.0 - g) * y) * nonvac
        e = (y * em / 2.0 + (g * a.e_1 + (1.0 - g) * y / 2.0) * nonvac) / q
        ok = (np.abs(q - target.q_signal) <= tol * target.q_signal) & (
            np.abs(e - target.e_signal) <= tol * target.e_signal)
        for iy, ig in zip(*np.nonzero(ok)):
            n_feasible += 1
            sp = StrategyParams(float(d), mismatch, float(y0s[iy]), float(gammas[ig]))
            obs = attacked_observables(a.c_1, a.e_1, p.mu, sp.y0, sp.gamma)
            r = secure_rate(obs, p.mu, p.f_ec, n_bsteps).raw
            if math.isnan(r):
                continue
            if best is None or r > best[0]:
                best = (r, sp)
    if best is None:
        raise InfeasibleMatch(
            f"no attack within {tol:.0%} of normal gain/QBER at {p.length} km, mismatch {mismatch}"
        )
    rep = report_three(p, best[1], n_bsteps)
    return MatchResult(rep, target, relative_deviation(rep.observables, target), n_feasible)


def positive_window(p: SystemParams, deltas, n_bsteps: int = 3) -> tuple[float, float] | None:
    """Endpoints of the phase-step interval where strategy one yields a positive rate.

    Sign changes on ``deltas`` are refined by root finding on the raw rate.
    Returns ``None`` if the rate is never positive on the grid.
    """
    deltas = [float(d) for d in deltas]

    def raw(d: float) -> float:
        r = report_one(p, d, n_bsteps).key.raw
        return -1.0 if math.isnan(r) else r

    vals = [raw(d) for d in deltas]
    pos = [i for i, v in enumerate(vals) if v > 0.0]
    if not pos:
        return None
    i0, i1 = pos[0], pos[-1]
    lo = deltas[i0] if i0 == 0 else brentq(raw, deltas[i0 - 1], deltas[i0], xtol=1e-10)
    hi = deltas[i1] if i1 == len(deltas) - 1 else brentq(raw, deltas[i1], deltas[i1 + 1], xtol=1e-10)
    return lo, hi
