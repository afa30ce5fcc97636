"""Closed-form helpers for real symmetric 2x2 operators and X-Z plane qubits.

Every state handled by this package has real amplitudes, so a qubit is a
single angle and every operator we need (projectors, penalty operators,
POVM elements) is a real symmetric 2x2 matrix.  Keeping the algebra in
closed form avoids iterative eigensolvers entirely.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# eigenvalues below this are treated as numerical noise of a PSD matrix
PSD_TOL = 1e-9
# pseudo-inverse square root drops eigenvalues at or below this
PINV_CUTOFF = 1e-12


@dataclass(frozen=True)
class PlaneState:
    """Pure qubit ``cos(theta/2)|0_z> + sin(theta/2)|1_z>``.

    ``theta`` is reduced into ``[0, 2*pi)``.  A shift by ``2*pi`` only flips the
    global sign of the ket, so the reduced state is the same physical state.
    """

    theta: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", float(self.theta) % TWO_PI)

    @property
    def ket(self) -> np.ndarray:
        return np.array([math.cos(self.theta / 2.0), math.sin(self.theta / 2.0)])

    def overlap2(self, other: PlaneState) -> float:
        """Return ``|<self|other>|^2``."""
        return math.cos((self.theta - other.theta) / 2.0) ** 2

    def same_state(self, other: PlaneState, tol: float = 1e-12) -> bool:
        return abs(1.0 - self.overlap2(other)) <= tol


@dataclass(frozen=True)
class SymOp2:
    """Real symmetric matrix ``[[a, b], [b, c]]``."""

    a: float
    b: float
    c: float

    @classmethod
    def zero(cls) -> SymOp2:
        return cls(0.0, 0.0, 0.0)

    @classmethod
    def identity(cls) -> SymOp2:
        return cls(1.0, 0.0, 1.0)

    @classmethod
    def from_array(cls, m) -> SymOp2:
        m = np.asarray(m, dtype=float)
        if m.shape != (2, 2):
            raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
        return cls(float(m[0, 0]), 0.5 * float(m[0, 1] + m[1, 0]), float(m[1, 1]))

    @classmethod
    def outer(cls, v) -> SymOp2:
        x, y = float(v[0]), float(v[1])
        return cls(x * x, x * y, y * y)

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.b, self.c]])

    def __add__(self, other: SymOp2) -> SymOp2:
        return SymOp2(self.a + other.a, self.b + other.b, self.c + other.c)

    def __sub__(self, other: SymOp2) -> SymOp2:
        return SymOp2(self.a - other.a, self.b - other.b, self.c - other.c)

    def scale(self, k: float) -> SymOp2:
        return SymOp2(k * self.a, k * self.b, k * self.c)

    @property
    def trace(self) -> float:
        return self.a + self.c

    @property
    def det(self) -> float:
        return self.a * self.c - self.b * self.b

    def quad(self, v) -> float:
        """Quadratic form ``v^T op v``."""
        x, y = float(v[0]), float(v[1])
        return self.a * x * x + 2.0 * self.b * x * y + self.c * y * y

    def is_psd(self, tol: float = 1e-12) -> bool:
        return self.a >= -tol and self.c >= -tol and self.det >= -tol


def projector(s: PlaneState) -> SymOp2:
    """Rank-one projector onto ``s``."""
    t = s.theta
    # cos^2(t/2), sin(t/2)cos(t/2), sin^2(t/2) via double-angle identities
    return SymOp2(0.5 * (1.0 + math.cos(t)), 0.5 * math.sin(t), 0.5 * (1.0 - math.cos(t)))


def eig_sym2(op: SymOp2) -> tuple[float, np.ndarray, float, np.ndarray]:
    """Eigen-decomposition ``(lam_min, v_min, lam_max, v_max)``.

    Degenerate input returns the canonical basis, ``v_min = (1, 0)``.
    """
    half_sum = 0.5 * (op.a + op.c)
    half_diff = 0.5 * (op.a - op.c)
    r = math.hypot(half_diff, op.b)
    lam_min, lam_max = half_sum - r, half_sum + r
    if r == 0.0:
        return lam_min, np.array([1.0, 0.0]), lam_max, np.array([0.0, 1.0])
    # (cos phi, sin phi) with tan(2 phi) = 2b / (a - c) spans the top eigenvector
    phi = 0.5 * math.atan2(op.b, half_diff)
    v_max = np.array([math.cos(phi), math.sin(phi)])
    v_min = np.array([-math.sin(phi), math.cos(phi)])
    return lam_min, v_min, lam_max, v_max


def pinv_sqrt(op: SymOp2, cutoff: float = PINV_CUTOFF) -> SymOp2:
    """Pseudo-inverse square root of a PSD operator.

    Eigenvalues above ``cutoff`` are mapped to ``lam**-0.5``; the rest of the
    spectrum is sent to zero.
    """
    lam_min, v_min, lam_max, v_max = eig_sym2(op)
    if lam_min < -PSD_TOL:
        raise ValueError(f"operator is not positive semidefinite (eigenvalue {lam_min:.3e})")
    out = SymOp2.zero()
    for lam, v in ((lam_min, v_min), (lam_max, v_max)):
        if lam > cutoff:
            out = out + SymOp2.outer(v).scale(1.0 / math.sqrt(lam))
    return out


def range_basis(op: SymOp2, cutoff: float = PINV_CUTOFF) -> list[np.ndarray]:
    """Orthonormal eigenvectors of ``op`` with eigenvalue above ``cutoff``."""
    lam_min, v_min, lam_max, v_max = eig_sym2(op)
    return [v for lam, v in ((lam_min, v_min), (lam_max, v_max)) if lam > cutoff]


def sandwich(s: SymOp2, x: SymOp2) -> SymOp2:
    """Congruence ``s x s`` for symmetric ``s`` (result is symmetric)."""
    return SymOp2.from_array(s.as_array() @ x.as_array() @ s.as_array())


def trace_prod(x: SymOp2, y: SymOp2) -> float:
    """``Tr(x y)`` for two symmetric operators."""
    return x.a * y.a + 2.0 * x.b * y.b + x.c * y.c


def h2(p: float) -> float:
    """Binary entropy in bits, with ``h2(0) = h2(1) = 0``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability out of range: {p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)
