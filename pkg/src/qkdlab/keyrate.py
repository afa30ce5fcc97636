"""GLLP key rate with worst-case single-photon bounds and two-way B steps."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .channel import LinkObservables
from .qmath import h2


class NoSinglePhotonBound(ValueError):
    """Worst-case attribution leaves nothing provably secret.

    Either the gain could come entirely from multi-photon pulses, or the
    errors pinned on single photons push their error rate above 1/2.
    """


@dataclass(frozen=True)
class PostProcState:
    omega: float  # single-photon fraction of detections
    e_signal: float
    e_1: float  # single-photon bit error rate
    e_p: float  # single-photon phase error rate
    r_b: float = 1.0  # fraction of bits kept after B steps


@dataclass(frozen=True)
class KeyRate:
    """Reported rate (clamped at zero) and the raw formula value."""

    rate: float
    raw: float

    @property
    def positive(self) -> bool:
        return self.rate > 0.0


def p_multi(mu: float) -> float:
    """Probability that the source emits two or more photons."""
    return -math.expm1(-mu) - mu * math.exp(-mu)


def worst_case_bounds(obs: LinkObservables, mu: float) -> PostProcState:
    """Attribute as much gain as possible to multi-photon pulses and all errors to single photons."""
    pm = p_multi(mu)
    q1 = obs.q_signal - pm
    if q1 <= 0.0:
        raise NoSinglePhotonBound(
            f"gain {obs.q_signal:.4e} does not exceed the multi-photon probability {pm:.4e}"
        )
    e1 = obs.e_signal * obs.q_signal / q1
    if e1 > 0.5:
        raise NoSinglePhotonBound(f"single-photon error bound {e1:.4f} exceeds 1/2")
    return PostProcState(omega=q1 / obs.q_signal, e_signal=obs.e_signal, e_1=e1, e_p=e1, r_b=1.0)


def bstep(s: PostProcState) -> PostProcState:
    """One round of parity-checked pairing (all fields updated from the old values)."""
    d_sig = s.e_signal ** 2 + (1.0 - s.e_signal) ** 2
    d_one = s.e_1 ** 2 + (1.0 - s.e_1) ** 2
    return PostProcState(
        omega=s.omega ** 2 * d_one / d_sig,
        e_signal=s.e_signal ** 2 / d_sig,
        e_1=s.e_1 ** 2 / d_one,
        e_p=2.0 * s.e_p * (1.0 - s.e_1 - s.e_p) / d_one,
        r_b=s.r_b * d_sig / 2.0,
    )


def gllp_rate(obs: LinkObservables, s: PostProcState, f_ec: float) -> KeyRate:
    # f(E) is taken as the constant inefficiency f_ec
    raw = 0.5 * s.r_b * obs.q_signal * (
        -f_ec * h2(s.e_signal) + s.omega * (1.0 - h2(s.e_p))
    )
    return KeyRate(max(raw, 0.0), raw)


def run_post(obs: LinkObservables, mu: float, f_ec: float, n_bsteps: int = 0) -> KeyRate:
    """Worst-case bounds, ``n_bsteps`` B steps, then the GLLP rate."""
    if n_bsteps < 0:
        raise ValueError("n_bsteps must be >= 0")
    s = worst_case_bounds(obs, mu)
    for _ in range(n_bsteps):
        s = bstep(s)
    return gllp_rate(obs, s, f_ec)


def secure_rate(obs: LinkObservables, mu: float, f_ec: float, n_bsteps: int = 0) -> KeyRate:
    """Like :func:`run_post` but a missing single-photon bound reports zero key."""
    try:
        return run_post(obs, mu, f_ec, n_bsteps)
    except NoSinglePhotonBound:
        return KeyRate(0.0, math.nan)
