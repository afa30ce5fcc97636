"""Weak-coherent-source fiber link: yields, gains and QBER without Eve."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class SystemParams:
    """Link, detector and source parameters.

    Defaults are the simulation parameters used throughout (0.21 dB/km fiber,
    8 % detector efficiency, no misalignment, ``p_dark = 1e-7``, error
    correction inefficiency 1.16) with mean photon number ``8e-4``.

    ``p_dark`` is the system false-detection probability.  It may be given
    directly or derived from a per-detector probability ``p_detector`` as
    ``2 p (1 - p)``; when both are given they must agree.
    """

    alpha: float = 0.21  # dB/km
    length: float = 0.0  # km
    eta_bob: float = 0.08
    e_detector: float = 0.0
    p_dark: float | None = None
    p_detector: float | None = None
    mu: float = 8e-4
    f_ec: float = 1.16

    def __post_init__(self) -> None:
        if self.p_dark is None and self.p_detector is None:
            object.__setattr__(self, "p_dark", 1e-7)
        elif self.p_detector is not None:
            _check_prob("p_detector", self.p_detector)
            derived = 2.0 * self.p_detector * (1.0 - self.p_detector)
            if self.p_dark is None:
                object.__setattr__(self, "p_dark", derived)
            elif abs(self.p_dark - derived) > 1e-12:
                raise ValueError(
                    f"p_dark={self.p_dark} disagrees with 2 p (1 - p) = {derived} for p_detector"
                )
        if self.alpha < 0.0:
            raise ValueError("alpha must be >= 0")
        if self.length < 0.0:
            raise ValueError("length must be >= 0")
        for name in ("eta_bob", "e_detector", "p_dark"):
            _check_prob(name, getattr(self, name))
        if self.mu <= 0.0:
            raise ValueError("mu must be > 0")
        if self.f_ec < 1.0:
            raise ValueError("f_ec must be >= 1")

    def at(self, **changes) -> SystemParams:
        if "p_dark" in changes and "p_detector" not in changes:
            changes["p_detector"] = None
        return replace(self, **changes)


def _check_prob(name: str, p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {p}")


@dataclass(frozen=True)
class LinkObservables:
    """What Alice and Bob measure: overall gain and overall QBER."""

    q_signal: float
    e_signal: float

    def __post_init__(self) -> None:
        if not 0.0 < self.q_signal <= 1.0:
            raise ValueError(f"q_signal must lie in (0, 1], got {self.q_signal}")
        _check_prob("e_signal", self.e_signal)


def overall_eta(p: SystemParams) -> float:
    """Fiber transmission times Bob's detector efficiency."""
    return 10.0 ** (-p.alpha * p.length / 10.0) * p.eta_bob


def eta_n(eta: float, n: int) -> float:
    """Probability that at least one of ``n`` photons is detected."""
    return 1.0 - (1.0 - eta) ** n


def normal_yield_error(p: SystemParams, n: int) -> tuple[float, float]:
    """Yield ``Y_n`` and error rate ``e_n`` of an ``n``-photon pulse with no Eve."""
    en = eta_n(overall_eta(p), n)
    y = p.p_dark * (1.0 - en) + en
    if y == 0.0:
        return 0.0, 0.5
    e = (p.p_dark * (1.0 - en) / 2.0 + en * p.e_detector) / y
    return y, e


def normal_observables(p: SystemParams) -> LinkObservables:
    """Closed-form gain and QBER summed over the Poisson photon-number mix."""
    x = math.exp(-p.mu * overall_eta(p))
    q = p.p_dark * x + 1.0 - x
    eq = p.p_dark * x / 2.0 + (1.0 - x) * p.e_detector
    return LinkObservables(q, eq / q)


def relative_deviation(obs: LinkObservables, target: LinkObservables) -> tuple[float, float]:
    """Relative gain and QBER deviation of ``obs`` from ``target``."""
    return (
        abs(obs.q_signal - target.q_signal) / target.q_signal,
        abs(obs.e_signal - target.e_signal) / target.e_signal,
    )
