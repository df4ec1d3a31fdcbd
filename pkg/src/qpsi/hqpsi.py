"""The H-gate quantum private set intersection protocol.

Party-level building blocks: set encoding, Calvin's preparation, decoy
insertion and verification, the fractional-H transforms applied by Alice and
Bob, Calvin's finalization with the public exponent sums, the comparison that
yields the announcement, and decoding of the announced positions.

Code, flag and exponent vectors are plain tuples of ints. Announcement
positions are 1-based, matching the usual numbering of universe elements.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

from qpsi.errors import DetectionFailure, ElementNotInUniverse, LengthMismatch, NoCloningViolation
from qpsi.qubit import (
    NORM_TOL,
    PREP_LABELS,
    MeasBasis,
    PrepLabel,
    QubitState,
    ThirdExponent,
    apply,
    canonical_state,
    equal_up_to_global_phase,
    h_power,
    measure,
)
from qpsi.rng import SeededRng

DEFAULT_EXPONENT_BOUND = 1024
DEFAULT_DECOYS = 16


@dataclass(frozen=True)
class UniversalSet:
    elements: tuple[int, ...]

    def __post_init__(self):
        elements = tuple(int(x) for x in self.elements)
        if not elements:
            raise ValueError("universe must contain at least one element")
        if len(set(elements)) != len(elements):
            raise ValueError("universe elements must be distinct")
        if any(x < 0 for x in elements):
            raise ValueError("universe elements must be non-negative integers")
        object.__setattr__(self, "elements", elements)

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def check_subset(self, s: Iterable[int]) -> frozenset[int]:
        s = frozenset(s)
        missing = s - set(self.elements)
        if missing:
            raise ElementNotInUniverse(missing)
        return s


class QuantumSequence:
    """An ordered register of single-qubit states.

    A handle becomes unusable once it has been released to the channel, so a
    sender cannot keep a copy of what it transmitted.
    """

    __slots__ = ("_particles", "_released")

    def __init__(self, particles: Iterable[QubitState]):
        self._particles = tuple(particles)
        self._released = False

    @property
    def particles(self) -> tuple[QubitState, ...]:
        if self._released:
            raise NoCloningViolation("quantum sequence was already sent")
        return self._particles

    @property
    def released(self) -> bool:
        return self._released

    def release(self) -> tuple[QubitState, ...]:
        particles = self.particles
        self._released = True
        return particles

    def __len__(self) -> int:
        return len(self.particles)

    def __iter__(self):
        return iter(self.particles)

    def __getitem__(self, i):
        return self.particles[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, QuantumSequence):
            return NotImplemented
        return self.particles == other.particles

    __hash__ = None

    def __repr__(self) -> str:
        state = "released" if self._released else f"{len(self._particles)} particles"
        return f"QuantumSequence({state})"


@dataclass(frozen=True)
class DecoyRecord:
    position: int
    prep: PrepLabel
    basis: MeasBasis


@dataclass(frozen=True)
class Announcement:
    positions: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "positions", frozenset(self.positions))
        if any(p < 1 for p in self.positions):
            raise ValueError("announcement positions are 1-based")

    def sorted(self) -> list[int]:
        return sorted(self.positions)


@dataclass(frozen=True)
class CompareMode:
    """``exact`` compares state vectors; ``sampled`` measures ``repetitions`` replicas."""

    kind: str = "exact"
    tol: float = NORM_TOL
    repetitions: int = 1

    def __post_init__(self):
        if self.kind not in ("exact", "sampled"):
            raise ValueError(f"unknown compare mode {self.kind!r}")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.kind == "exact" and self.repetitions != 1:
            raise ValueError("exact mode uses a single replica")

    @classmethod
    def exact(cls, tol: float = NORM_TOL) -> CompareMode:
        return cls("exact", tol, 1)

    @classmethod
    def sampled(cls, k: int) -> CompareMode:
        return cls("sampled", NORM_TOL, k)

    @classmethod
    def parse(cls, text: str) -> CompareMode:
        """Parse ``exact``, ``exact:<tol>`` or ``sampled:<k>``."""
        kind, _, arg = text.strip().partition(":")
        if kind == "exact":
            return cls.exact(float(arg)) if arg else cls.exact()
        if kind == "sampled":
            return cls.sampled(int(arg) if arg else 1)
        raise ValueError(f"unknown compare mode {text!r}")

    def __str__(self) -> str:
        return "exact" if self.kind == "exact" else f"sampled:{self.repetitions}"


class Replica(NamedTuple):
    """One protocol run as seen by Calvin at Step 7."""

    prep_labels: tuple[PrepLabel, ...]
    finalized: QuantumSequence


# -- encoding ------------------------------------------------------------------

def encode_set(universe: UniversalSet, s: Iterable[int]) -> tuple[int, ...]:
    s = universe.check_subset(s)
    return tuple(1 if x in s else 0 for x in universe.elements)


def decode_intersection(a: Announcement, universe: UniversalSet) -> frozenset[int]:
    n = len(universe)
    bad = [p for p in a.positions if p > n]
    if bad:
        raise ValueError(f"announcement positions out of range 1..{n}: {sorted(bad)}")
    return frozenset(universe.elements[p - 1] for p in a.positions)


# -- Calvin's preparation and decoys --------------------------------------------

def prepare_initial_sequence(
    n: int, rng: SeededRng, labels: Sequence[PrepLabel] | None = None
) -> tuple[QuantumSequence, tuple[PrepLabel, ...]]:
    """2n particles drawn uniformly from |0>, |1>, |+>, |->.

    ``labels`` forces the preparation (used to replay a fixed transcript).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if labels is None:
        labels = tuple(rng.choice(PREP_LABELS) for _ in range(2 * n))
    else:
        labels = tuple(labels)
        if len(labels) != 2 * n:
            raise LengthMismatch(f"expected {2 * n} preparation labels, got {len(labels)}")
    return QuantumSequence(canonical_state(x) for x in labels), labels


def insert_decoys(
    seq: QuantumSequence, l: int, rng: SeededRng
) -> tuple[QuantumSequence, tuple[DecoyRecord, ...]]:
    if l < 0:
        raise ValueError("decoy count must be >= 0")
    payload = seq.particles
    if l == 0:
        return QuantumSequence(payload), ()
    total = len(payload) + l
    positions = sorted(rng.sample(range(total), l))
    records = []
    for pos in positions:
        prep = rng.choice(PREP_LABELS)
        records.append(DecoyRecord(pos, prep, prep.basis))
    decoy_at = {r.position: canonical_state(r.prep) for r in records}
    it = iter(payload)
    transit = [decoy_at[i] if i in decoy_at else next(it) for i in range(total)]
    return QuantumSequence(transit), tuple(records)


def verify_and_strip_decoys(
    transit: QuantumSequence, records: Sequence[DecoyRecord], rng: SeededRng
) -> QuantumSequence:
    """Measure each decoy in its recorded basis and drop it from the sequence.

    Raises :class:`DetectionFailure` naming the first mismatching decoy.
    """
    particles = transit.particles
    if any(r.position < 0 or r.position >= len(particles) for r in records):
        raise LengthMismatch("decoy record outside the transit sequence")
    if len({r.position for r in records}) != len(records):
        raise ValueError("decoy positions must be distinct")
    first_bad = None
    bad = 0
    for rec in sorted(records, key=lambda r: r.position):
        outcome, _ = measure(particles[rec.position], rec.basis, rng)
        if outcome is not rec.prep:
            bad += 1
            if first_bad is None:
                first_bad = (rec, outcome)
    if first_bad is not None:
        raise DetectionFailure(first_bad[0], first_bad[1], bad)
    drop = {r.position for r in records}
    return QuantumSequence(p for i, p in enumerate(particles) if i not in drop)


# -- Alice and Bob --------------------------------------------------------------

def random_exponents(m: int, rng: SeededRng, bound: int = DEFAULT_EXPONENT_BOUND) -> tuple[int, ...]:
    if bound < 2:
        raise ValueError("exponent bound must be >= 2")
    return tuple(rng.integer(1, bound) for _ in range(m))


def random_flags(n: int, rng: SeededRng) -> tuple[int, ...]:
    return tuple(rng.bit() for _ in range(n))


def derive_flag_B(flags_A: Sequence[int]) -> tuple[int, ...]:
    return tuple(f ^ 1 for f in flags_A)


def party_exponents(
    code: Sequence[int], r: Sequence[int], flags: Sequence[int]
) -> tuple[ThirdExponent, ...]:
    """Per-position exponents a set holder applies to the 2n received particles.

    Position i <= n gets ``(c_i + 2)/3 + r_i``; position n+i gets
    ``(h_i c_i + 2)/3 + r_{n+i}``.
    """
    n = len(code)
    if len(r) != 2 * n or len(flags) != n:
        raise LengthMismatch(
            f"need code length n, exponents 2n and flags n; got {len(code)}, {len(r)}, {len(flags)}"
        )
    if any(x < 1 for x in r):
        raise ValueError("exponents must be positive integers")
    first = [ThirdExponent(c + 2 + 3 * ri) for c, ri in zip(code, r[:n])]
    second = [ThirdExponent(h * c + 2 + 3 * ri) for c, h, ri in zip(code, flags, r[n:])]
    return tuple(first + second)


def _transform(seq: QuantumSequence, code, r, flags) -> QuantumSequence:
    exps = party_exponents(code, r, flags)
    particles = seq.particles
    if len(particles) != len(exps):
        raise LengthMismatch(f"sequence has {len(particles)} particles, expected {len(exps)}")
    return QuantumSequence(apply(h_power(e), p) for e, p in zip(exps, particles))


def alice_transform(seq: QuantumSequence, code, r, flags) -> QuantumSequence:
    return _transform(seq, code, r, flags)


def bob_transform(seq: QuantumSequence, code, r, flags_B) -> QuantumSequence:
    return _transform(seq, code, r, flags_B)


# -- Calvin's finalization and comparison -------------------------------------

def combine_public_exponents(r_A: Sequence[int], r_B: Sequence[int]) -> tuple[int, ...]:
    if len(r_A) != len(r_B):
        raise LengthMismatch("exponent vectors differ in length")
    return tuple(a + b for a, b in zip(r_A, r_B))


def calvin_finalize(seq: QuantumSequence, r_C: Sequence[int]) -> QuantumSequence:
    particles = seq.particles
    if len(particles) != len(r_C):
        raise LengthMismatch(f"sequence has {len(particles)} particles, r_C has {len(r_C)}")
    return QuantumSequence(apply(h_power(ThirdExponent.whole(r)), p) for r, p in zip(r_C, particles))


def compare_positions(
    replicas: Sequence[Replica], mode: CompareMode, rng: SeededRng
) -> tuple[bool, ...]:
    """Per-position equality verdicts ``P''_i == P_i`` over all 2n positions.

    Exact mode compares the finalized state with the prepared state up to a
    global phase.  Sampled mode measures each replica's particle in its
    preparation basis and reports a position unequal if any outcome differs
    from the preparation.
    """
    if not replicas:
        raise ValueError("at least one replica is required")
    if mode.kind == "sampled" and len(replicas) != mode.repetitions:
        raise ValueError(f"sampled mode expects {mode.repetitions} replicas, got {len(replicas)}")
    m = len(replicas[0].prep_labels)
    equal = [True] * m
    for labels, finalized in replicas:
        states = finalized.particles
        if len(labels) != m or len(states) != m:
            raise LengthMismatch("replica lengths differ")
        for i, (label, state) in enumerate(zip(labels, states)):
            if mode.kind == "exact":
                same = equal_up_to_global_phase(canonical_state(label), state, mode.tol)
            else:
                outcome, _ = measure(state, label.basis, rng)
                same = outcome is label
            if not same:
                equal[i] = False
    return tuple(equal)


def announce(verdicts: Sequence[bool]) -> Announcement:
    """Positions i <= n whose first-register particle is unchanged and whose
    second-register partner n+i changed."""
    if len(verdicts) % 2:
        raise LengthMismatch("verdicts must cover 2n positions")
    n = len(verdicts) // 2
    return Announcement(frozenset(i + 1 for i in range(n) if verdicts[i] and not verdicts[i + n]))


def compare_and_announce(
    replicas: Sequence[Replica], mode: CompareMode, rng: SeededRng
) -> Announcement:
    return announce(compare_positions(replicas, mode, rng))
