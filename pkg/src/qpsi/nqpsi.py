"""Symbolic simulation of the earlier QFT-based PSI protocol and its leak.

Each particle is tracked as (index, accumulated QFT exponent mod 4).  Only
the exponent matters for the outcome: QFT^2 flips the sign of the state and
QFT^4 is the identity.  The verdict a participant sees per position is
therefore just ``+`` or ``-``, and that verdict is enough for Alice (Bob) to
recover Bob's (Alice's) elements outside the intersection.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from qpsi.hqpsi import UniversalSet, encode_set
from qpsi.rng import SeededRng

DEFAULT_H_BOUND = 1024


@dataclass(frozen=True)
class PhaseTrackedState:
    label: int
    exp_mod4: int = 0

    def __post_init__(self):
        object.__setattr__(self, "exp_mod4", self.exp_mod4 % 4)


def qft_accumulate(state: PhaseTrackedState, e: int) -> PhaseTrackedState:
    return PhaseTrackedState(state.label, state.exp_mod4 + e)


@dataclass(frozen=True)
class NqpsiRandomness:
    r: tuple[int, ...]
    h: tuple[int, ...]

    def __post_init__(self):
        if len(self.r) != len(self.h):
            raise ValueError("r and h must have equal length")
        if any(x not in (0, 1) for x in self.r):
            raise ValueError("r entries must be bits")
        if any(x < 1 for x in self.h):
            raise ValueError("h entries must be positive integers")

    @classmethod
    def draw(cls, n: int, rng: SeededRng, h_bound: int = DEFAULT_H_BOUND) -> NqpsiRandomness:
        return cls(tuple(rng.bit() for _ in range(n)), tuple(rng.integer(1, h_bound) for _ in range(n)))


class Sign(Enum):
    PLUS = "+"
    MINUS = "-"


@dataclass(frozen=True)
class NqpsiVerdict:
    signs: tuple[Sign, ...]

    def minus_positions(self) -> list[int]:
        return [i for i, s in enumerate(self.signs) if s is Sign.MINUS]


def calvin_correction(rand_A: NqpsiRandomness, rand_B: NqpsiRandomness) -> tuple[int, ...]:
    """``h_C = 4 - ((r_A h_A + r_B h_B) mod 4)`` per position."""
    return tuple(
        4 - ((ra * ha + rb * hb) % 4)
        for ra, ha, rb, hb in zip(rand_A.r, rand_A.h, rand_B.r, rand_B.h)
    )


def nqpsi_run(
    S_A,
    S_B,
    universe: UniversalSet,
    rng: SeededRng,
    rand_A: NqpsiRandomness | None = None,
    rand_B: NqpsiRandomness | None = None,
) -> tuple[NqpsiVerdict, list[dict]]:
    """Run the seven steps symbolically and return per-position verdicts.

    The transcript is a list of step records with the accumulated exponents,
    which is enough to reproduce the sign table.
    """
    c_A = encode_set(universe, S_A)
    c_B = encode_set(universe, S_B)
    n = len(universe)
    rand_A = rand_A or NqpsiRandomness.draw(n, rng.child("alice"))
    rand_B = rand_B or NqpsiRandomness.draw(n, rng.child("bob"))
    transcript: list[dict] = []

    states = [PhaseTrackedState(i) for i in range(n)]
    transcript.append({"step": 1, "party": "Calvin", "exponents": [s.exp_mod4 for s in states]})

    states = [
        qft_accumulate(s, c * 2 + r * h) for s, c, r, h in zip(states, c_A, rand_A.r, rand_A.h)
    ]
    transcript.append({"step": 3, "party": "Alice", "exponents": [s.exp_mod4 for s in states]})

    states = [
        qft_accumulate(s, c * 2 + r * h) for s, c, r, h in zip(states, c_B, rand_B.r, rand_B.h)
    ]
    transcript.append({"step": 5, "party": "Bob", "exponents": [s.exp_mod4 for s in states]})

    h_C = calvin_correction(rand_A, rand_B)
    states = [qft_accumulate(s, h) for s, h in zip(states, h_C)]
    transcript.append(
        {"step": 7, "party": "Calvin", "h_C": list(h_C), "exponents": [s.exp_mod4 for s in states]}
    )
    for s in states:
        if s.exp_mod4 not in (0, 2):
            raise AssertionError(f"masking did not cancel at position {s.label}: {s.exp_mod4}")
    verdict = NqpsiVerdict(tuple(Sign.PLUS if s.exp_mod4 == 0 else Sign.MINUS for s in states))
    return verdict, transcript


def partition_results(v: NqpsiVerdict, universe: UniversalSet) -> tuple[frozenset[int], frozenset[int]]:
    """Split the universe into the ``+`` (complement-intersection) and ``-`` (difference) parts."""
    if len(v.signs) != len(universe):
        raise ValueError("verdict length differs from universe size")
    plus = frozenset(x for x, s in zip(universe.elements, v.signs) if s is Sign.PLUS)
    minus = frozenset(x for x, s in zip(universe.elements, v.signs) if s is Sign.MINUS)
    return plus, minus


def leakage_attack(v: NqpsiVerdict, own_code: Sequence[int], universe: UniversalSet) -> frozenset[int]:
    """Elements a participant attributes to the other party.

    A ``-`` at a position where the attacker's own bit is 0 means the other
    party holds that element and the attacker does not.
    """
    return frozenset(
        x
        for x, s, c in zip(universe.elements, v.signs, own_code)
        if s is Sign.MINUS and c == 0
    )
