"""How Eve forces a phase step in the two bidirectional architectures.

Sagnac loop: the AOM imprints its acoustic phase at the moment each
counter-propagating pulse passes it, so the relative phase depends on the
fiber-length asymmetry of the loop.  Plug & play: a time-shifted pulse rides
the modulator edge and only picks up part of the nominal phase.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

LIGHT_SPEED = 2.99792458e8  # m/s

NOMINAL_PHASES = (0.0, math.pi / 2, math.pi, 3 * math.pi / 2)


@dataclass(frozen=True)
class SagnacParams:
    refractive_index: float
    fiber_length_diff: float  # meters
    aom_freq: float  # Hz
    light_speed: float = LIGHT_SPEED

    def __post_init__(self) -> None:
        if self.refractive_index < 1.0:
            raise ValueError("refractive index must be >= 1")
        if self.fiber_length_diff < 0.0:
            raise ValueError("fiber length difference must be >= 0")
        if self.aom_freq <= 0.0:
            raise ValueError("AOM driving frequency must be positive")


@dataclass(frozen=True)
class ModulatorEdge:
    """A pulse arriving on the rising edge of a phase modulator.

    ``time_shift`` is measured from the start of the ramp; the ramp is linear
    and reaches the full ``nominal_phase`` after ``rise_time``.
    """

    rise_time: float  # seconds
    nominal_phase: float  # radians
    time_shift: float  # seconds

    def __post_init__(self) -> None:
        if self.rise_time <= 0.0:
            raise ValueError("rise time must be positive")
        if not any(math.isclose(self.nominal_phase, p, abs_tol=1e-12) for p in NOMINAL_PHASES):
            raise ValueError(f"nominal phase must be one of {NOMINAL_PHASES}")


def sagnac_phase(p: SagnacParams) -> float:
    """Relative phase ``2 pi n dL f / c`` picked up across the loop."""
    return 2.0 * math.pi * p.refractive_index * p.fiber_length_diff * p.aom_freq / p.light_speed


def ramp_fraction(e: ModulatorEdge) -> float:
    return min(1.0, max(0.0, e.time_shift / e.rise_time))


def plugplay_phase(e: ModulatorEdge) -> float:
    return e.nominal_phase * ramp_fraction(e)


def edge_shift_for_delta(delta: float, rise_time: float) -> float:
    """Ramp position that remaps the pi/2 step onto ``delta``.

    Inverse of :func:`plugplay_phase` for the pi/2 modulation level.
    """
    if not 0.0 <= delta <= math.pi / 2:
        raise ValueError("plug & play remapping only reaches delta in [0, pi/2]")
    return rise_time * delta / (math.pi / 2)
