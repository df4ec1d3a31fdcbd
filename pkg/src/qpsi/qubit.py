"""Single-qubit state-vector primitives.

States and gates are small immutable values holding Python complex numbers;
numpy is used only where a matrix view is convenient (spectral projectors,
residual norms).
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from qpsi.rng import SeededRng

NORM_TOL = 1e-9
GATE_TOL = 1e-12
SQRT2 = math.sqrt(2.0)
INV_SQRT2 = 1.0 / SQRT2


@dataclass(frozen=True, slots=True)
class QubitState:
    """Normalized amplitudes ``a0|0> + a1|1>``."""

    a0: complex
    a1: complex

    def __post_init__(self):
        a0, a1 = complex(self.a0), complex(self.a1)
        if not all(math.isfinite(x) for x in (a0.real, a0.imag, a1.real, a1.imag)):
            raise ValueError(f"non-finite amplitude in ({a0}, {a1})")
        norm2 = abs(a0) ** 2 + abs(a1) ** 2
        if abs(norm2 - 1.0) > NORM_TOL:
            raise ValueError(f"state not normalized: |a0|^2+|a1|^2 = {norm2!r}")
        object.__setattr__(self, "a0", a0)
        object.__setattr__(self, "a1", a1)

    def as_array(self) -> np.ndarray:
        return np.array([self.a0, self.a1], dtype=complex)

    def scaled(self, phase: complex) -> QubitState:
        """Multiply by a unit-modulus scalar (global phase)."""
        return QubitState(self.a0 * phase, self.a1 * phase)


class MeasBasis(Enum):
    Z = "Z"
    X = "X"


class PrepLabel(Enum):
    ZERO = "0"
    ONE = "1"
    PLUS = "+"
    MINUS = "-"

    @property
    def basis(self) -> MeasBasis:
        return MeasBasis.Z if self in (PrepLabel.ZERO, PrepLabel.ONE) else MeasBasis.X

    @classmethod
    def from_symbol(cls, symbol: str) -> PrepLabel:
        return cls(symbol)


PREP_LABELS = (PrepLabel.ZERO, PrepLabel.ONE, PrepLabel.PLUS, PrepLabel.MINUS)

_CANONICAL = {
    PrepLabel.ZERO: QubitState(1, 0),
    PrepLabel.ONE: QubitState(0, 1),
    PrepLabel.PLUS: QubitState(INV_SQRT2, INV_SQRT2),
    PrepLabel.MINUS: QubitState(INV_SQRT2, -INV_SQRT2),
}

# basis -> (eigenstate labels in outcome order)
_BASIS_LABELS = {
    MeasBasis.Z: (PrepLabel.ZERO, PrepLabel.ONE),
    MeasBasis.X: (PrepLabel.PLUS, PrepLabel.MINUS),
}


def canonical_state(label: PrepLabel) -> QubitState:
    return _CANONICAL[label]


def parse_labels(text: str) -> list[PrepLabel]:
    """Parse a ket string such as ``"101+00-"`` into preparation labels."""
    return [PrepLabel.from_symbol(ch) for ch in text if not ch.isspace()]


@dataclass(frozen=True, slots=True)
class Gate2:
    """2x2 complex matrix ``[[m00, m01], [m10, m11]]``."""

    m00: complex
    m01: complex
    m10: complex
    m11: complex

    @classmethod
    def from_array(cls, m) -> Gate2:
        m = np.asarray(m, dtype=complex)
        return cls(complex(m[0, 0]), complex(m[0, 1]), complex(m[1, 0]), complex(m[1, 1]))

    def as_array(self) -> np.ndarray:
        return np.array([[self.m00, self.m01], [self.m10, self.m11]], dtype=complex)

    def __matmul__(self, other: Gate2) -> Gate2:
        return Gate2(
            self.m00 * other.m00 + self.m01 * other.m10,
            self.m00 * other.m01 + self.m01 * other.m11,
            self.m10 * other.m00 + self.m11 * other.m10,
            self.m10 * other.m01 + self.m11 * other.m11,
        )

    def dagger(self) -> Gate2:
        c = complex.conjugate
        return Gate2(c(self.m00), c(self.m10), c(self.m01), c(self.m11))

    def distance(self, other: Gate2) -> float:
        """Frobenius norm of ``self - other``."""
        return float(np.linalg.norm(self.as_array() - other.as_array()))

    def is_unitary(self, tol: float = NORM_TOL) -> bool:
        return (self.dagger() @ self).distance(IDENTITY) <= tol


IDENTITY = Gate2(1, 0, 0, 1)
HADAMARD = Gate2(INV_SQRT2, INV_SQRT2, INV_SQRT2, -INV_SQRT2)


@dataclass(frozen=True, slots=True, order=True)
class ThirdExponent:
    """An exponent of H measured in thirds: the gate is ``H ** (numerator / 3)``."""

    numerator: int

    @classmethod
    def whole(cls, r: int) -> ThirdExponent:
        return cls(3 * r)

    def __add__(self, other: ThirdExponent) -> ThirdExponent:
        return ThirdExponent(self.numerator + other.numerator)

    def __str__(self) -> str:
        whole, rest = divmod(self.numerator, 3)
        if rest == 0:
            return f"H^{whole}"
        return f"H^({rest}/3+{whole})" if whole else f"H^({rest}/3)"


def apply(g: Gate2, s: QubitState) -> QubitState:
    return QubitState(g.m00 * s.a0 + g.m01 * s.a1, g.m10 * s.a0 + g.m11 * s.a1)


def inner(a: QubitState, b: QubitState) -> complex:
    """``<a|b>``."""
    return a.a0.conjugate() * b.a0 + a.a1.conjugate() * b.a1


def fidelity(a: QubitState, b: QubitState) -> float:
    return min(1.0, abs(inner(a, b)) ** 2)


def equal_up_to_global_phase(a: QubitState, b: QubitState, tol: float = NORM_TOL) -> bool:
    if tol <= 0:
        raise ValueError("tol must be positive")
    return fidelity(a, b) >= 1.0 - tol


def measure(s: QubitState, basis: MeasBasis, rng: SeededRng) -> tuple[PrepLabel, QubitState]:
    """Projective measurement with Born-rule sampling; returns outcome and post-state."""
    first, second = _BASIS_LABELS[basis]
    p_first = fidelity(_CANONICAL[first], s)
    outcome = first if rng.random() < p_first else second
    return outcome, _CANONICAL[outcome]


# -- Hadamard spectral decomposition -----------------------------------------

def hadamard_eigensystem() -> tuple[QubitState, QubitState]:
    """Normalized eigenvectors of H for eigenvalues +1 and -1.

    Proportional to ``(sqrt2 - 1, 3 - 2 sqrt2)`` and ``(3 - 2 sqrt2, 1 - sqrt2)``.
    Those unnormalized vectors have squared norm ``20 - 14 sqrt2``, so they are
    rescaled before being used as projectors.
    """
    y1 = np.array([SQRT2 - 1.0, 3.0 - 2.0 * SQRT2])
    y2 = np.array([3.0 - 2.0 * SQRT2, 1.0 - SQRT2])
    y1 /= np.linalg.norm(y1)
    y2 /= np.linalg.norm(y2)
    return QubitState(y1[0], y1[1]), QubitState(y2[0], y2[1])


@lru_cache(maxsize=None)
def _projectors() -> tuple[np.ndarray, np.ndarray]:
    v_plus, v_minus = hadamard_eigensystem()
    p = v_plus.as_array()
    m = v_minus.as_array()
    return np.outer(p, p.conj()), np.outer(m, m.conj())


def minus_one_power(numerator: int, branch: str = "real") -> complex:
    """``(-1) ** (numerator / 3)`` on the requested branch.

    ``"real"`` takes the real cube root, ``(-1)^(1/3) = -1``, so the value is the
    sign of ``(-1)^numerator``.  ``"principal"`` uses ``exp(i pi numerator / 3)``.
    """
    if branch == "real":
        return -1.0 if numerator % 2 else 1.0
    if branch == "principal":
        return cmath.exp(1j * math.pi * numerator / 3)
    raise ValueError(f"unknown branch {branch!r}")


def h_power_spectral(e: ThirdExponent | int, branch: str = "real") -> Gate2:
    """``H ** (k/3)`` as ``P+ + (-1)^(k/3) P-`` from the eigenprojectors."""
    k = e.numerator if isinstance(e, ThirdExponent) else int(e)
    p_plus, p_minus = _projectors()
    return Gate2.from_array(p_plus + minus_one_power(k, branch) * p_minus)


def h_power(e: ThirdExponent | int) -> Gate2:
    """``H ** (k/3)`` under the real branch, i.e. ``H ** (k mod 2)``."""
    k = e.numerator if isinstance(e, ThirdExponent) else int(e)
    return HADAMARD if k % 2 else IDENTITY
