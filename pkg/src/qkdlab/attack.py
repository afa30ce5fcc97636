"""Optimal intercept-and-resend attacks on phase-remapped BB84 / SARG04 states.

Eve remaps Alice's four phases onto ``{0, d, 2d, 3d}``, measures the captured
qubit with a POVM and, for each conclusive outcome, resends some state
(possibly time-shifted so that Bob's detectors see mismatched efficiencies).
For a resend choice the QBER Bob observes is

    sum_i Tr(M_i L_i) / sum_i Tr(M_i B_i)

with ``L_i`` weighting Alice's states by the probability of a sifted error and
``B_i`` by the probability of a sifted click.  The mediant inequality means the
optimum concentrates on the single best outcome, and for that outcome the
best rank-one element is the bottom eigenvector of ``B^-1/2 L B^-1/2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .qmath import (
    PINV_CUTOFF,
    PlaneState,
    SymOp2,
    eig_sym2,
    pinv_sqrt,
    projector,
    range_basis,
    sandwich,
    trace_prod,
)

Protocol = Literal["bb84", "sarg04"]
Mode = Literal["fixed", "optimized"]

DELTA_MIN = 1e-3
DEFAULT_GRID_POINTS = 200
THETA_GRID_POINTS = 720
THETA_XTOL = 1e-6
TIE_TOL = 1e-9

# Nominal BB84 states phi_0..phi_3: Z basis {phi_0, phi_2}, X basis {phi_1, phi_3}.
NOMINAL = tuple(PlaneState(k * math.pi / 2) for k in range(4))


def detector_of(k: int) -> int:
    """Bob's detector that registers nominal state ``phi_k`` (bit 0 or bit 1)."""
    return (k % 4) // 2


@dataclass(frozen=True)
class EfficiencyProfile:
    """Detector efficiencies seen by a pulse at Eve's chosen arrival time."""

    eta0: float = 1.0
    eta1: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 < self.eta0 <= 1.0 and 0.0 < self.eta1 <= 1.0):
            raise ValueError(f"efficiencies must lie in (0, 1], got ({self.eta0}, {self.eta1})")

    def __getitem__(self, detector: int) -> float:
        return self.eta1 if detector else self.eta0

    def swapped(self) -> EfficiencyProfile:
        return EfficiencyProfile(self.eta1, self.eta0)


NORMAL_ARRIVAL = EfficiencyProfile()


def mismatch_profiles(mismatch: float, scale: float = 1.0) -> tuple[EfficiencyProfile, ...]:
    """Arrival-time choices: normal, favouring detector 0 (t_0), favouring detector 1 (t_1)."""
    if not 0.0 < mismatch <= 1.0:
        raise ValueError("mismatch must lie in (0, 1]")
    return (
        EfficiencyProfile(scale, scale),
        EfficiencyProfile(scale, mismatch * scale),
        EfficiencyProfile(mismatch * scale, scale),
    )


@dataclass(frozen=True)
class RemappedEnsemble:
    delta: float

    def __post_init__(self) -> None:
        if not 0.0 < self.delta <= math.pi / 2 + 1e-12:
            raise ValueError(f"delta must lie in (0, pi/2], got {self.delta}")

    @property
    def states(self) -> tuple[PlaneState, ...]:
        return tuple(PlaneState(k * self.delta) for k in range(4))

    @property
    def projectors(self) -> tuple[SymOp2, ...]:
        return tuple(projector(s) for s in self.states)

    def density_sum(self) -> SymOp2:
        """``sum_k |phi~_k><phi~_k|``, four times Alice's average output state."""
        out = SymOp2.zero()
        for p in self.projectors:
            out = out + p
        return out


Resend = tuple[PlaneState, EfficiencyProfile]


@dataclass(frozen=True)
class ResendSpec:
    """Resend choice per POVM outcome; missing outcomes resend vacuum."""

    outcomes: dict[int, Resend]

    def __post_init__(self) -> None:
        if not self.outcomes:
            raise ValueError("at least one outcome must resend a state")

    def penalties(self, ens: RemappedEnsemble, protocol: Protocol = "bb84") -> dict[int, PenaltyPair]:
        build = PENALTY_BUILDERS[protocol]
        return {i: build(ens, s, prof) for i, (s, prof) in sorted(self.outcomes.items())}


@dataclass(frozen=True)
class PenaltyPair:
    L: SymOp2
    B: SymOp2


# --------------------------------------------------------------------------
# penalty weights

def _overlaps(theta):
    """``|<phi_k|psi(theta)>|^2`` for the four nominal states; last axis is k."""
    theta = np.asarray(theta, dtype=float)[..., None]
    return 0.5 * (1.0 + np.cos(theta - np.arange(4) * (math.pi / 2)))


def bb84_weights(theta, prof: EfficiencyProfile) -> tuple[np.ndarray, np.ndarray]:
    """Per-Alice-state error and click probabilities for a BB84 resend at ``theta``.

    Only Bob's matching-basis measurement is counted.  Alice's state ``j``
    carries bit ``j // 2`` in basis ``j % 2``; the wrong outcome is
    ``phi_{j+2}``.
    """
    o = _overlaps(theta)
    eta = np.array([prof[detector_of(k)] for k in range(4)])
    reg = eta * o
    err = np.stack([reg[..., (j + 2) % 4] for j in range(4)], axis=-1)
    click = np.stack([reg[..., j % 2] + reg[..., j % 2 + 2] for j in range(4)], axis=-1)
    return err, click


def _sarg04_table() -> tuple[np.ndarray, np.ndarray]:
    # Coefficient of Bob outcome k in the error / conclusive probability for
    # Alice state j, summed over announced pair (1/2 each) and basis (1/2 each).
    err = np.zeros((4, 4))
    concl = np.zeros((4, 4))
    for j in range(4):
        for partner in ((j - 1) % 4, (j + 1) % 4):
            pair = {j, partner}
            for k in range(4):
                excluded = (k + 2) % 4  # Bob's outcome rules this state out
                if excluded not in pair:
                    continue
                inferred = (pair - {excluded}).pop()
                concl[j, k] += 0.25
                if inferred != j:
                    err[j, k] += 0.25
    return err, concl


_SARG04_ERR, _SARG04_CONCL = _sarg04_table()


def sarg04_weights(theta, prof: EfficiencyProfile) -> tuple[np.ndarray, np.ndarray]:
    """Per-Alice-state error and conclusive probabilities for a SARG04 resend."""
    o = _overlaps(theta)
    eta = np.array([prof[detector_of(k)] for k in range(4)])
    reg = eta * o
    return reg @ _SARG04_ERR.T, reg @ _SARG04_CONCL.T


WEIGHTS = {"bb84": bb84_weights, "sarg04": sarg04_weights}


def _combine(projs: Sequence[SymOp2], weights) -> SymOp2:
    out = SymOp2.zero()
    for p, w in zip(projs, weights):
        out = out + p.scale(float(w))
    return out


def _build(protocol: Protocol, ens: RemappedEnsemble, resend_state: PlaneState,
           prof: EfficiencyProfile) -> PenaltyPair:
    err, click = WEIGHTS[protocol](resend_state.theta, prof)
    projs = ens.projectors
    return PenaltyPair(_combine(projs, err), _combine(projs, click))


def build_penalty_bb84(ens: RemappedEnsemble, resend_state: PlaneState,
                       prof: EfficiencyProfile = NORMAL_ARRIVAL) -> PenaltyPair:
    return _build("bb84", ens, resend_state, prof)


def build_penalty_sarg04(ens: RemappedEnsemble, resend_state: PlaneState,
                         prof: EfficiencyProfile = NORMAL_ARRIVAL) -> PenaltyPair:
    return _build("sarg04", ens, resend_state, prof)


PENALTY_BUILDERS = {"bb84": build_penalty_bb84, "sarg04": build_penalty_sarg04}


def mirror(resend: Resend) -> Resend:
    """Image of a resend choice under the reflection swapping phi~_k and phi~_{3-k}.

    The reflection maps the Z basis onto the X basis with the bit flipped, so
    the resent angle goes to ``3 pi/2 - theta`` and the two detectors swap.
    """
    state, prof = resend
    return PlaneState(1.5 * math.pi - state.theta), prof.swapped()


# --------------------------------------------------------------------------
# solver

@dataclass(frozen=True)
class OutcomeOptimum:
    qber: float
    direction: np.ndarray  # unit vector of the optimal rank-one POVM element


@dataclass(frozen=True)
class AttackSolution:
    """Optimal POVM for a set of resend outcomes.

    ``conclusive_prob`` is ``sum_i Tr(M_i B_i)/4``: the chance per (sifted)
    signal that Eve's resend produces a click at Bob.  With both detectors at
    full efficiency it is also the probability that Eve resends at all.
    """

    qber: float
    povm: dict[int, SymOp2]
    conclusive_prob: float
    transmittance: float
    scale: float
    active: tuple[int, ...]
    pairs: dict[int, PenaltyPair] = field(repr=False, default_factory=dict)

    def directions(self) -> dict[int, np.ndarray]:
        out = {}
        for i in self.active:
            _, _, _, v = eig_sym2(self.povm[i])
            out[i] = v
        return out


def outcome_optimum(pair: PenaltyPair, cutoff: float = PINV_CUTOFF) -> OutcomeOptimum | None:
    """Minimise ``<v|L|v> / <v|B|v>`` over ``v`` in the range of ``B``.

    Returns ``None`` when ``B`` vanishes (the outcome can never cause a click).
    """
    basis = range_basis(pair.B, cutoff)
    if not basis:
        return None
    s = pinv_sqrt(pair.B, cutoff)
    t = sandwich(s, pair.L)
    if len(basis) == 2:
        lam, c, _, _ = eig_sym2(t)
    else:
        c = basis[0]
        lam = t.quad(c)
    v = s.as_array() @ c
    v = v / np.linalg.norm(v)
    return OutcomeOptimum(max(lam, 0.0), v)


def qber_of(povm: dict[int, SymOp2], pairs: dict[int, PenaltyPair]) -> float:
    """QBER of an explicit POVM: ``sum Tr(M_i L_i) / sum Tr(M_i B_i)``."""
    num = sum(trace_prod(povm[i], pairs[i].L) for i in povm)
    den = sum(trace_prod(povm[i], pairs[i].B) for i in povm)
    if den <= 0.0:
        raise ValueError("POVM never causes a click at Bob")
    return num / den


def max_scale(elements: Iterable[SymOp2]) -> float:
    """Largest common factor ``c`` with ``c * sum(elements) <= I``."""
    total = SymOp2.zero()
    for m in elements:
        total = total + m
    _, _, lam_max, _ = eig_sym2(total)
    return 0.0 if lam_max <= 0.0 else 1.0 / lam_max


def min_qber(pairs: Sequence[PenaltyPair] | dict[int, PenaltyPair],
             support: Iterable[int] | None = None) -> AttackSolution:
    """Exact minimum QBER over Eve's POVM for fixed resend choices.

    ``pairs`` maps outcome index to its penalty pair (a sequence is indexed
    from 0).  ``support`` optionally restricts which outcomes may resend.
    Outcomes whose optimum ties the best (within ``TIE_TOL``) share the POVM
    with a common scale chosen as large as ``sum M_i <= I`` allows.
    """
    if not isinstance(pairs, dict):
        pairs = dict(enumerate(pairs))
    if support is not None:
        keep = set(support)
        pairs = {i: p for i, p in pairs.items() if i in keep}
    if not pairs:
        raise ValueError("no resend outcome supplied")

    optima = {i: outcome_optimum(p) for i, p in pairs.items()}
    optima = {i: o for i, o in optima.items() if o is not None}
    if not optima:
        raise ValueError("every click operator B_i is zero")

    best = min(o.qber for o in optima.values())
    active = tuple(sorted(i for i, o in optima.items() if o.qber <= best + TIE_TOL))
    projs = {i: SymOp2.outer(optima[i].direction) for i in active}
    c = max_scale(projs.values())
    povm = {i: p.scale(c) for i, p in projs.items()}
    conclusive = sum(trace_prod(povm[i], pairs[i].B) for i in active) / 4.0
    return AttackSolution(
        qber=best,
        povm=povm,
        conclusive_prob=conclusive,
        transmittance=conclusive,
        scale=c,
        active=active,
        pairs={i: pairs[i] for i in active},
    )


def transmittance_at(delta: float, solution: AttackSolution) -> float:
    """Probability that Eve resends, ``Tr(M B_uniform)/4`` at maximal scaling."""
    if not solution.povm:
        return 0.0
    projs = []
    for m in solution.povm.values():
        lam_min, _, lam_max, v = eig_sym2(m)
        if lam_max > 0.0:
            projs.append(SymOp2.outer(v))
    if not projs:
        return 0.0
    c = max_scale(projs)
    dens = RemappedEnsemble(delta).density_sum()
    return c * sum(trace_prod(p, dens) for p in projs) / 4.0


def fold_detector_error(e1: float, e_detector: float) -> float:
    """Compose Eve's error with an independent misalignment flip."""
    return e1 + (1.0 - 2.0 * e1) * e_detector


# --------------------------------------------------------------------------
# resend-state search

def _scan(protocol: Protocol, ens: RemappedEnsemble, prof: EfficiencyProfile,
          thetas: np.ndarray) -> np.ndarray:
    """Per-outcome minimum ratio for every resend angle in ``thetas`` (batched)."""
    err, click = WEIGHTS[protocol](thetas, prof)
    kets = np.array([s.ket for s in ens.states])  # (4, 2)
    outer = kets[:, :, None] * kets[:, None, :]  # (4, 2, 2)
    L = np.einsum("nj,jab->nab", err, outer)
    B = np.einsum("nj,jab->nab", click, outer)
    w, V = np.linalg.eigh(B)
    inv = np.where(w > PINV_CUTOFF, 1.0 / np.sqrt(np.clip(w, PINV_CUTOFF, None)), 0.0)
    S = np.einsum("nak,nk,nbk->nab", V, inv, V)
    T = S @ L @ S
    tw, tv = np.linalg.eigh(T)
    # full-rank B: bottom eigenvalue; otherwise the value on the range direction
    full = (w > PINV_CUTOFF).all(axis=1)
    top = V[:, :, 1]
    on_range = np.einsum("na,nab,nb->n", top, T, top)
    return np.where(full, tw[:, 0], on_range)


def best_resend(ens: RemappedEnsemble, protocol: Protocol,
                profiles: Sequence[EfficiencyProfile],
                n_grid: int = THETA_GRID_POINTS) -> tuple[float, Resend]:
    """Best resend state and arrival time for a single outcome.

    A uniform ``n_grid`` scan over the resend angle is followed by one
    golden-section refinement around the best grid point of every profile.
    Ties prefer the earlier profile and the smaller angle.
    """
    thetas = np.arange(n_grid) * (2.0 * math.pi / n_grid)
    h = 2.0 * math.pi / n_grid
    build = PENALTY_BUILDERS[protocol]
    best: tuple[float, Resend] | None = None
    for prof in profiles:
        vals = _scan(protocol, ens, prof, thetas)
        k = int(np.argmin(vals))

        def f(t: float, prof=prof) -> float:
            o = outcome_optimum(build(ens, PlaneState(t), prof))
            return math.inf if o is None else o.qber

        t0 = float(thetas[k])
        cand = [(f(t0), t0)]
        try:
            res = minimize_scalar(f, bracket=(t0 - h, t0, t0 + h), method="golden",
                                  options={"xtol": THETA_XTOL / (2.0 * math.pi)})
            cand.append((float(res.fun), float(res.x)))
        except ValueError:
            pass  # flat neighbourhood: keep the grid point
        val, t = min(cand)
        if best is None or val < best[0] - TIE_TOL:
            best = (val, (PlaneState(t), prof))
    assert best is not None
    return best


def fixed_resend(protocol: Protocol, mismatch: float = 1.0, scale: float = 1.0) -> ResendSpec:
    """Resend assignment used by the fixed-state curves.

    Without mismatch, outcome ``i`` resends ``phi_i`` at the normal time.
    With mismatch, outcome 0 resends a fake state time-shifted so detector 0
    is the efficient one (BB84: ``|->``; SARG04: ``phi_1``) and outcome 3
    resends its mirror image.
    """
    if mismatch == 1.0:
        prof = EfficiencyProfile(scale, scale)
        return ResendSpec({i: (NOMINAL[i], prof) for i in range(4)})
    t0 = EfficiencyProfile(scale, mismatch * scale)
    first = (NOMINAL[3] if protocol == "bb84" else NOMINAL[1], t0)
    return ResendSpec({0: first, 3: mirror(first)})


def optimized_resend(ens: RemappedEnsemble, protocol: Protocol, mismatch: float = 1.0,
                     scale: float = 1.0) -> ResendSpec:
    """Best resend on outcome 0 plus its mirror image on outcome 3."""
    _, first = best_resend(ens, protocol, mismatch_profiles(mismatch, scale))
    return ResendSpec({0: first, 3: mirror(first)})


@dataclass(frozen=True)
class CurvePoint:
    delta: float
    qber: float
    conclusive_prob: float
    transmittance: float


def default_grid(n: int = DEFAULT_GRID_POINTS) -> list[float]:
    return list(np.linspace(DELTA_MIN, math.pi / 2, n))


def solve_point(delta: float, protocol: Protocol = "bb84", mode: Mode = "fixed",
                mismatch: float = 1.0, scale: float = 1.0) -> AttackSolution:
    ens = RemappedEnsemble(delta)
    if mode == "fixed":
        spec = fixed_resend(protocol, mismatch, scale)
    elif mode == "optimized":
        spec = optimized_resend(ens, protocol, mismatch, scale)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return min_qber(spec.penalties(ens, protocol))


def curve_point(delta: float, protocol: Protocol = "bb84", mode: Mode = "fixed",
                mismatch: float = 1.0) -> CurvePoint:
    sol = solve_point(delta, protocol, mode, mismatch)
    return CurvePoint(delta, sol.qber, sol.conclusive_prob, transmittance_at(delta, sol))


def optimal_curve(protocol: Protocol, mode: Mode, mismatch: float,
                  delta_grid: Sequence[float]) -> list[CurvePoint]:
    """Minimum QBER versus phase step for one of the four curve families."""
    if len(delta_grid) == 0:
        raise ValueError("empty delta grid")
    return [curve_point(float(d), protocol, mode, mismatch) for d in delta_grid]


def suboptimal_qber(delta: float) -> float:
    """QBER when Eve only uses ``M_0``, projecting orthogonally to phi~_2."""
    ens = RemappedEnsemble(delta)
    pair = build_penalty_bb84(ens, NOMINAL[0])
    psi = PlaneState(2.0 * delta + math.pi)  # orthogonal to phi~_2
    return qber_of({0: projector(psi)}, {0: pair})
