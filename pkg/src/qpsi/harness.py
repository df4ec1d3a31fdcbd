"""Three-party session orchestration.

The orchestrator steps Calvin, Alice and Bob through the protocol in order,
moving every message over a :class:`Channel` that records it in the
:class:`Transcript` and lets an optional tamper hook act on quantum transits.
"""
from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Callable, Iterable, Mapping, Sequence

from qpsi import hqpsi
from qpsi.errors import DetectionFailure, ElementNotInUniverse
from qpsi.hqpsi import (
    Announcement,
    CompareMode,
    DecoyRecord,
    QuantumSequence,
    Replica,
    UniversalSet,
)
from qpsi.qubit import PrepLabel, QubitState
from qpsi.rng import SeededRng

TRANSCRIPT_SCHEMA = "qpsi-transcript/1"


class Party(Enum):
    ALICE = "Alice"
    BOB = "Bob"
    CALVIN = "Calvin"


class Hop(Enum):
    CALVIN_ALICE = "calvin-alice"
    ALICE_BOB = "alice-bob"
    BOB_CALVIN = "bob-calvin"

    @property
    def sender(self) -> Party:
        return _HOP_ENDS[self][0]

    @property
    def recipient(self) -> Party:
        return _HOP_ENDS[self][1]

    @property
    def send_step(self) -> int:
        return _HOP_ENDS[self][2]

    @property
    def verify_step(self) -> int:
        return self.send_step + 1

    @classmethod
    def parse(cls, text: str) -> Hop:
        aliases = {"1": cls.CALVIN_ALICE, "2": cls.ALICE_BOB, "3": cls.BOB_CALVIN}
        key = text.strip().lower().replace("_", "-").replace("->", "-")
        if key in aliases:
            return aliases[key]
        return cls(key)


_HOP_ENDS = {
    Hop.CALVIN_ALICE: (Party.CALVIN, Party.ALICE, 1),
    Hop.ALICE_BOB: (Party.ALICE, Party.BOB, 3),
    Hop.BOB_CALVIN: (Party.BOB, Party.CALVIN, 5),
}


# -- messages ---------------------------------------------------------------------

def _num(x: float) -> float:
    return round(x, 12) + 0.0


def _state_repr(s: QubitState) -> list[float]:
    return [_num(s.a0.real), _num(s.a0.imag), _num(s.a1.real), _num(s.a1.imag)]


@dataclass(frozen=True)
class QuantumTransit:
    particles: tuple[QubitState, ...]
    kind = "QuantumTransit"

    def describe(self):
        return [_state_repr(p) for p in self.particles]


@dataclass(frozen=True)
class DecoyDisclosure:
    records: tuple[DecoyRecord, ...]
    kind = "DecoyDisclosure"

    def describe(self):
        return [[r.position, r.prep.value, r.basis.value] for r in self.records]


@dataclass(frozen=True)
class ClassicalExponents:
    values: tuple[int, ...]
    kind = "ClassicalExponents"

    def describe(self):
        return list(self.values)


@dataclass(frozen=True)
class FlagDisclosure:
    bits: tuple[int, ...]
    kind = "FlagDisclosure"

    def describe(self):
        return list(self.bits)


@dataclass(frozen=True)
class AnnouncementPayload:
    announcement: Announcement
    kind = "Announcement"

    def describe(self):
        return self.announcement.sorted()


Payload = QuantumTransit | DecoyDisclosure | ClassicalExponents | FlagDisclosure | AnnouncementPayload

# which payload kinds may be sent at each step
_LEGAL = {
    1: {"QuantumTransit"},
    2: {"DecoyDisclosure"},
    3: {"QuantumTransit", "FlagDisclosure"},
    4: {"DecoyDisclosure"},
    5: {"QuantumTransit"},
    6: {"DecoyDisclosure"},
    7: {"ClassicalExponents", "Announcement"},
}


def payload_digest(payload: Payload) -> str:
    """Stable 64-bit hash of a payload, as 16 hex digits."""
    blob = json.dumps([payload.kind, payload.describe()], separators=(",", ":"))
    return hashlib.blake2b(blob.encode(), digest_size=8).hexdigest()


@dataclass(frozen=True)
class Message:
    sender: Party
    recipient: Party
    payload: Payload


@dataclass(frozen=True)
class TranscriptEntry:
    attempt: int
    replica: int
    step: int
    message: Message


@dataclass
class Transcript:
    entries: list[TranscriptEntry] = field(default_factory=list)
    aborts: list[dict] = field(default_factory=list)

    def record(self, attempt: int, replica: int, step: int, message: Message) -> None:
        if message.payload.kind not in _LEGAL.get(step, ()):
            raise ValueError(f"{message.payload.kind} is not legal at step {step}")
        if self.entries:
            last = self.entries[-1]
            if (attempt, replica) == (last.attempt, last.replica) and step < last.step:
                raise ValueError("steps must be non-decreasing within an attempt")
        self.entries.append(TranscriptEntry(attempt, replica, step, message))

    def view(self, party: Party) -> list[TranscriptEntry]:
        """Everything ``party`` received, in order."""
        return [e for e in self.entries if e.message.recipient is party]

    def attempts(self) -> int:
        return 1 + max((e.attempt for e in self.entries), default=0)

    def to_steps(self, verbose: bool = False) -> list[dict]:
        out = []
        for e in self.entries:
            row = {
                "attempt": e.attempt,
                "replica": e.replica,
                "step": e.step,
                "from": e.message.sender.value,
                "to": e.message.recipient.value,
                "payload_kind": e.message.payload.kind,
                "payload_digest": payload_digest(e.message.payload),
            }
            if verbose:
                row["payload"] = e.message.payload.describe()
            out.append(row)
        return out


class Channel:
    """Authenticated classical plus insecure quantum links between the parties."""

    def __init__(self, transcript: Transcript, tamper: Mapping[Hop, Callable] | None = None):
        self.transcript = transcript
        self.tamper = dict(tamper or {})

    def send_quantum(
        self, hop: Hop, seq: QuantumSequence, attempt: int, replica: int, rng: SeededRng
    ) -> QuantumSequence:
        # sender loses its handle; the receiver gets a fresh one
        delivered = QuantumSequence(seq.release())
        hook = self.tamper.get(hop)
        if hook is not None:
            delivered = hook(delivered, rng)
        particles = delivered.particles
        self.transcript.record(
            attempt, replica, hop.send_step,
            Message(hop.sender, hop.recipient, QuantumTransit(particles)),
        )
        return QuantumSequence(particles)

    def send(self, step: int, sender: Party, recipient: Party, payload: Payload,
             attempt: int, replica: int = 0):
        self.transcript.record(attempt, replica, step, Message(sender, recipient, payload))
        return payload


# -- configuration and outcomes -------------------------------------------------

@dataclass(frozen=True)
class SessionConfig:
    universe: tuple[int, ...]
    set_a: frozenset[int]
    set_b: frozenset[int]
    decoys_per_hop: int = hqpsi.DEFAULT_DECOYS
    compare_mode: CompareMode = CompareMode.exact()
    max_retries: int = 3
    exponent_bound: int = hqpsi.DEFAULT_EXPONENT_BOUND
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "universe", tuple(int(x) for x in self.universe))
        object.__setattr__(self, "set_a", frozenset(int(x) for x in self.set_a))
        object.__setattr__(self, "set_b", frozenset(int(x) for x in self.set_b))
        if isinstance(self.compare_mode, str):
            object.__setattr__(self, "compare_mode", CompareMode.parse(self.compare_mode))
        if self.decoys_per_hop < 0:
            raise ValueError("decoys_per_hop must be >= 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.exponent_bound < 2:
            raise ValueError("exponent_bound must be >= 2")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        u = UniversalSet(self.universe)
        u.check_subset(self.set_a)
        u.check_subset(self.set_b)

    @property
    def universal_set(self) -> UniversalSet:
        return UniversalSet(self.universe)

    def to_dict(self) -> dict:
        return {
            "universe": list(self.universe),
            "set_a": sorted(self.set_a),
            "set_b": sorted(self.set_b),
            "decoys_per_hop": self.decoys_per_hop,
            "compare_mode": str(self.compare_mode),
            "max_retries": self.max_retries,
            "exponent_bound": self.exponent_bound,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class ForcedInputs:
    """Fixed preparation and randomness for replaying a known transcript."""

    prep_labels: tuple[PrepLabel, ...]
    r_a: tuple[int, ...]
    r_b: tuple[int, ...]
    flags_a: tuple[int, ...]


@dataclass
class Completed:
    intersection: frozenset[int]
    announcement: Announcement
    transcript: Transcript
    attempts: int
    calvin_verdicts: tuple[bool, ...]
    status = "completed"


@dataclass
class Aborted:
    step: int
    reason: str
    retries_used: int
    transcript: Transcript
    status = "aborted"

    @property
    def attempts(self) -> int:
        return self.retries_used + 1


SessionOutcome = Completed | Aborted


def classical_oracle(S_A: Iterable[int], S_B: Iterable[int]) -> frozenset[int]:
    b = set(S_B)
    return frozenset(x for x in S_A if x in b)


# -- session ----------------------------------------------------------------------

def _run_attempt(cfg: SessionConfig, channel: Channel, attempt: int, root: SeededRng,
                 forced: ForcedInputs | None, stage: list[int]):
    u = cfg.universal_set
    n = len(u)
    l = cfg.decoys_per_hop
    code_a = hqpsi.encode_set(u, cfg.set_a)
    code_b = hqpsi.encode_set(u, cfg.set_b)
    rng = root.child("attempt", attempt)
    k = cfg.compare_mode.repetitions
    if forced is not None and k != 1:
        raise ValueError("forced replay supports a single replica only")

    flags_a = forced.flags_a if forced else hqpsi.random_flags(n, rng.child("alice", "flags"))
    flags_b = hqpsi.derive_flag_B(flags_a)
    replicas: list[Replica] = []
    exponents: list[tuple[tuple[int, ...], tuple[int, ...]]] = []

    for rep in range(k):
        calvin = rng.child("calvin", rep)
        alice = rng.child("alice", rep)
        bob = rng.child("bob", rep)

        # Step 1: Calvin prepares 2n particles, hides decoys, sends to Alice.
        stage[0] = 1
        p_c, labels = hqpsi.prepare_initial_sequence(
            n, calvin.child("prepare"), forced.prep_labels if forced else None)
        transit, recs = hqpsi.insert_decoys(p_c, l, calvin.child("decoys"))
        received = channel.send_quantum(Hop.CALVIN_ALICE, transit, attempt, rep,
                                        rng.child("eve", Hop.CALVIN_ALICE.value, rep))
        # Step 2: Calvin discloses decoy positions/bases; Alice verifies.
        stage[0] = 2
        channel.send(2, Party.CALVIN, Party.ALICE, DecoyDisclosure(recs), attempt, rep)
        p_c_at_alice = hqpsi.verify_and_strip_decoys(received, recs, alice.child("verify"))

        # Step 3: Alice applies her transform, hides decoys, sends to Bob with her flags.
        stage[0] = 3
        r_a = forced.r_a if forced else hqpsi.random_exponents(2 * n, alice.child("r"), cfg.exponent_bound)
        p_a = hqpsi.alice_transform(p_c_at_alice, code_a, r_a, flags_a)
        transit, recs = hqpsi.insert_decoys(p_a, l, alice.child("decoys"))
        received = channel.send_quantum(Hop.ALICE_BOB, transit, attempt, rep,
                                        rng.child("eve", Hop.ALICE_BOB.value, rep))
        if rep == 0:
            channel.send(3, Party.ALICE, Party.BOB, FlagDisclosure(tuple(flags_a)), attempt, rep)
        # Step 4
        stage[0] = 4
        channel.send(4, Party.ALICE, Party.BOB, DecoyDisclosure(recs), attempt, rep)
        p_a_at_bob = hqpsi.verify_and_strip_decoys(received, recs, bob.child("verify"))

        # Step 5
        stage[0] = 5
        r_b = forced.r_b if forced else hqpsi.random_exponents(2 * n, bob.child("r"), cfg.exponent_bound)
        p_b = hqpsi.bob_transform(p_a_at_bob, code_b, r_b, flags_b)
        transit, recs = hqpsi.insert_decoys(p_b, l, bob.child("decoys"))
        received = channel.send_quantum(Hop.BOB_CALVIN, transit, attempt, rep,
                                        rng.child("eve", Hop.BOB_CALVIN.value, rep))
        # Step 6
        stage[0] = 6
        channel.send(6, Party.BOB, Party.CALVIN, DecoyDisclosure(recs), attempt, rep)
        p_b_at_calvin = hqpsi.verify_and_strip_decoys(received, recs, calvin.child("verify"))

        replicas.append(Replica(labels, p_b_at_calvin))
        exponents.append((tuple(r_a), tuple(r_b)))

    # Step 7: exponent vectors go to Calvin, who sums, finalizes, compares, announces.
    stage[0] = 7
    finalized = []
    for rep, ((r_a, r_b), replica) in enumerate(zip(exponents, replicas)):
        channel.send(7, Party.ALICE, Party.CALVIN, ClassicalExponents(r_a), attempt, rep)
        channel.send(7, Party.BOB, Party.CALVIN, ClassicalExponents(r_b), attempt, rep)
        r_c = hqpsi.combine_public_exponents(r_a, r_b)
        finalized.append(Replica(replica.prep_labels, hqpsi.calvin_finalize(replica.finalized, r_c)))
    verdicts = hqpsi.compare_positions(finalized, cfg.compare_mode, rng.child("calvin", "compare"))
    announcement = hqpsi.announce(verdicts)
    for who in (Party.ALICE, Party.BOB):
        channel.send(7, Party.CALVIN, who, AnnouncementPayload(announcement), attempt, k - 1)

    # Step 8
    stage[0] = 8
    return hqpsi.decode_intersection(announcement, u), announcement, verdicts


def run_session(
    cfg: SessionConfig,
    eve: Mapping[Hop, Callable] | None = None,
    forced: ForcedInputs | None = None,
) -> SessionOutcome:
    """Run the protocol, restarting from Step 1 on a failed decoy check.

    ``eve`` maps hops to tamper hooks ``hook(sequence, rng) -> sequence``.
    """
    transcript = Transcript()
    channel = Channel(transcript, eve)
    root = SeededRng(cfg.seed)
    failure = None
    stage = [0]
    for attempt in range(cfg.max_retries + 1):
        try:
            intersection, announcement, verdicts = _run_attempt(cfg, channel, attempt, root, forced, stage)
        except DetectionFailure as exc:
            failure = (stage[0], str(exc))
            transcript.aborts.append({"attempt": attempt, "step": stage[0], "reason": str(exc)})
            continue
        return Completed(intersection, announcement, transcript, attempt + 1, verdicts)
    return Aborted(failure[0], failure[1], cfg.max_retries, transcript)


def session_id(cfg: SessionConfig) -> str:
    blob = json.dumps(cfg.to_dict(), sort_keys=True)
    return hashlib.blake2b(blob.encode(), digest_size=8).hexdigest()


def outcome_dict(outcome: SessionOutcome) -> dict:
    if isinstance(outcome, Completed):
        return {
            "status": "completed",
            "intersection": sorted(outcome.intersection),
            "announcement": outcome.announcement.sorted(),
            "attempts": outcome.attempts,
        }
    return {
        "status": "aborted",
        "step": outcome.step,
        "reason": outcome.reason,
        "retries_used": outcome.retries_used,
    }


def export_transcript(cfg: SessionConfig, outcome: SessionOutcome, verbose: bool = False) -> dict:
    return {
        "schema": TRANSCRIPT_SCHEMA,
        "session_id": session_id(cfg),
        "seed": cfg.seed,
        "steps": outcome.transcript.to_steps(verbose),
        "aborts": list(outcome.transcript.aborts),
        "outcome": outcome_dict(outcome),
    }


# -- Monte Carlo --------------------------------------------------------------------

@dataclass(frozen=True)
class SetPolicy:
    """How random instances are drawn: n uniform in ``[min_n, max_n]``,
    universe elements distinct from ``[0, element_bound)``, each element in
    each private set independently with probability ``p_include``."""

    max_n: int = 16
    min_n: int = 1
    element_bound: int = 1000
    p_include: float = 0.5

    def __post_init__(self):
        if self.min_n < 1:
            raise ValueError("policy must not produce empty universes")
        if self.max_n < self.min_n:
            raise ValueError("max_n must be >= min_n")
        if self.element_bound < self.max_n:
            raise ValueError("element_bound too small for max_n distinct elements")

    def sample(self, rng: SeededRng) -> tuple[tuple[int, ...], frozenset[int], frozenset[int]]:
        n = rng.integer(self.min_n, self.max_n)
        universe = tuple(sorted(rng.sample(range(self.element_bound), n)))
        a = frozenset(x for x in universe if rng.random() < self.p_include)
        b = frozenset(x for x in universe if rng.random() < self.p_include)
        return universe, a, b


@dataclass
class MonteCarloSummary:
    trials: int = 0
    matches: int = 0
    aborted: int = 0
    mismatches: list[dict] = field(default_factory=list)
    # per-element error counts, meaningful in sampled mode
    intersection_elements: int = 0
    false_negatives: int = 0
    agree_positions: int = 0
    agree_false_positives: int = 0
    disagree_positions: int = 0
    disagree_false_positives: int = 0
    elapsed_s: float = 0.0

    def merge(self, other: MonteCarloSummary) -> MonteCarloSummary:
        return MonteCarloSummary(
            trials=self.trials + other.trials,
            matches=self.matches + other.matches,
            aborted=self.aborted + other.aborted,
            mismatches=sorted(self.mismatches + other.mismatches, key=lambda m: m["trial"]),
            intersection_elements=self.intersection_elements + other.intersection_elements,
            false_negatives=self.false_negatives + other.false_negatives,
            agree_positions=self.agree_positions + other.agree_positions,
            agree_false_positives=self.agree_false_positives + other.agree_false_positives,
            disagree_positions=self.disagree_positions + other.disagree_positions,
            disagree_false_positives=self.disagree_false_positives + other.disagree_false_positives,
            elapsed_s=self.elapsed_s + other.elapsed_s,
        )

    def to_dict(self, timing: bool = False) -> dict:
        d = asdict(self)
        if not timing:
            d.pop("elapsed_s")
        return d


def monte_carlo_trial(base: SessionConfig, policy: SetPolicy, index: int, seed: int) -> MonteCarloSummary:
    rng = SeededRng(seed)
    universe, a, b = policy.sample(rng.child("sets"))
    cfg = replace(base, universe=universe, set_a=a, set_b=b, seed=seed)
    expected = classical_oracle(a, b)
    out = MonteCarloSummary(trials=1)
    outcome = run_session(cfg)
    if isinstance(outcome, Aborted):
        out.aborted = 1
        got = None
    else:
        got = outcome.intersection
    if got == expected:
        out.matches = 1
    else:
        out.mismatches.append({
            "trial": index,
            "seed": seed,
            "config": cfg.to_dict(),
            "expected": sorted(expected),
            "got": None if got is None else sorted(got),
        })
    if got is not None:
        out.intersection_elements = len(expected)
        out.false_negatives = len(expected - got)
        for x in universe:
            if (x in a) == (x in b):
                out.agree_positions += 1
                out.agree_false_positives += int(x in got and x not in expected)
            else:
                out.disagree_positions += 1
                out.disagree_false_positives += int(x in got)
    return out


def _trial_chunk(args) -> MonteCarloSummary:
    base, policy, jobs = args
    acc = MonteCarloSummary()
    for index, seed in jobs:
        acc = acc.merge(monte_carlo_trial(base, policy, index, seed))
    return acc


def _chunks(items: Sequence, parts: int) -> list[Sequence]:
    size = max(1, -(-len(items) // parts))
    return [items[i:i + size] for i in range(0, len(items), size)]


def run_monte_carlo(
    base: SessionConfig,
    trials: int,
    policy: SetPolicy,
    rng: SeededRng,
    workers: int = 1,
) -> MonteCarloSummary:
    """Compare ``run_session`` with :func:`classical_oracle` on random instances.

    Each trial runs from its own derived seed, recorded with any mismatch so
    the instance can be replayed alone.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    jobs = [(i, rng.child_seed("trial", i)) for i in range(trials)]
    start = time.perf_counter()
    if workers <= 1:
        summary = _trial_chunk((base, policy, jobs))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_trial_chunk, [(base, policy, c) for c in _chunks(jobs, workers * 4)])
            summary = MonteCarloSummary()
            for part in parts:
                summary = summary.merge(part)
    summary.elapsed_s = time.perf_counter() - start
    return summary
