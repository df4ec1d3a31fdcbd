"""Attack models: an outside intercept-measure-resend eavesdropper and the
inferences available to curious protocol participants."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum

from scipy.stats import binomtest

from qpsi.errors import PreconditionViolated
from qpsi.harness import Aborted, Hop, Party, SessionConfig, _chunks, run_session
from qpsi.hqpsi import Announcement, CompareMode, QuantumSequence, UniversalSet, encode_set
from qpsi.qubit import MeasBasis, measure
from qpsi.rng import SeededRng


class BasisPolicy(Enum):
    RANDOM_ZX = "random"
    ALWAYS_Z = "z"
    ALWAYS_X = "x"


@dataclass(frozen=True)
class EveStrategy:
    """Eve's behaviour on one channel hop.

    ``intercept_fraction`` below 1 makes Eve attack each particle independently
    with that probability.
    """

    kind: str = "passthrough"
    basis_policy: BasisPolicy = BasisPolicy.RANDOM_ZX
    intercept_fraction: float = 1.0

    def __post_init__(self):
        if self.kind not in ("passthrough", "intercept"):
            raise ValueError(f"unknown Eve strategy {self.kind!r}")
        if not 0.0 <= self.intercept_fraction <= 1.0:
            raise ValueError("intercept_fraction must lie in [0, 1]")

    @classmethod
    def passthrough(cls) -> EveStrategy:
        return cls("passthrough")

    @classmethod
    def intercept(cls, policy: BasisPolicy = BasisPolicy.RANDOM_ZX, fraction: float = 1.0) -> EveStrategy:
        return cls("intercept", policy, fraction)

    @classmethod
    def parse(cls, text: str) -> EveStrategy:
        """``passthrough``, ``intercept`` (random basis), ``intercept-z`` or ``intercept-x``."""
        table = {
            "passthrough": cls.passthrough(),
            "intercept": cls.intercept(),
            "intercept-random": cls.intercept(),
            "intercept-z": cls.intercept(BasisPolicy.ALWAYS_Z),
            "intercept-x": cls.intercept(BasisPolicy.ALWAYS_X),
        }
        try:
            return table[text.strip().lower()]
        except KeyError:
            raise ValueError(f"unknown strategy {text!r}; choose from {sorted(table)}") from None

    @property
    def name(self) -> str:
        if self.kind == "passthrough":
            return "passthrough"
        return f"intercept-{self.basis_policy.value}"

    def __call__(self, transit: QuantumSequence, rng: SeededRng) -> QuantumSequence:
        return eve_intercept(transit, self, rng)


def eve_intercept(transit: QuantumSequence, strategy: EveStrategy, rng: SeededRng) -> QuantumSequence:
    """Measure every particle (Eve cannot tell decoys from payload) and resend
    the collapsed state."""
    if strategy.kind == "passthrough":
        return transit
    out = []
    for particle in transit.release():
        if strategy.intercept_fraction < 1.0 and rng.random() >= strategy.intercept_fraction:
            out.append(particle)
            continue
        if strategy.basis_policy is BasisPolicy.RANDOM_ZX:
            basis = MeasBasis.Z if rng.bit() == 0 else MeasBasis.X
        elif strategy.basis_policy is BasisPolicy.ALWAYS_Z:
            basis = MeasBasis.Z
        else:
            basis = MeasBasis.X
        _, post = measure(particle, basis, rng)
        out.append(post)
    return QuantumSequence(out)


def detection_rate_theory(l: int, intercept_fraction: float = 1.0) -> float:
    """Probability that at least one of ``l`` decoys exposes Eve.

    Each decoy is disturbed with probability 1/2 (wrong basis) and then
    mismatches with probability 1/2, so a fully intercepted decoy is caught
    with probability 1/4 regardless of Eve's basis policy.
    """
    if l < 0:
        raise ValueError("decoy count must be >= 0")
    return 1.0 - (1.0 - intercept_fraction / 4.0) ** l


@dataclass
class AttackReport:
    trials: int
    detections: int
    empirical_rate: float
    theoretical_rate: float
    decoys_per_hop: int
    hop: str = ""
    strategy: str = ""
    ci_low: float = 0.0
    ci_high: float = 0.0

    def __post_init__(self):
        if self.detections > self.trials:
            raise ValueError("detections cannot exceed trials")

    def sigma(self) -> float:
        p = self.theoretical_rate
        return (p * (1 - p) / self.trials) ** 0.5

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "detections": self.detections,
            "empirical_rate": self.empirical_rate,
            "theoretical_rate": self.theoretical_rate,
            "decoys_per_hop": self.decoys_per_hop,
            "hop": self.hop,
            "strategy": self.strategy,
            "ci95": [self.ci_low, self.ci_high],
        }


def _attack_chunk(args) -> int:
    cfg, strategy, hop, seeds = args
    detections = 0
    for seed in seeds:
        outcome = run_session(replace(cfg, seed=seed, max_retries=0), eve={hop: strategy})
        if isinstance(outcome, Aborted) and outcome.step == hop.verify_step:
            detections += 1
    return detections


def run_attack_trials(
    cfg: SessionConfig,
    strategy: EveStrategy,
    hop: Hop,
    trials: int,
    rng: SeededRng,
    workers: int = 1,
) -> AttackReport:
    """Run ``trials`` single-attempt sessions with Eve on ``hop`` and count how
    many are stopped by the decoy check at that hop."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    seeds = [rng.child_seed("attack", i) for i in range(trials)]
    if workers <= 1:
        detections = _attack_chunk((cfg, strategy, hop, seeds))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = [(cfg, strategy, hop, c) for c in _chunks(seeds, workers * 4)]
            detections = sum(pool.map(_attack_chunk, chunks))
    theory = 0.0 if strategy.kind == "passthrough" else detection_rate_theory(
        cfg.decoys_per_hop, strategy.intercept_fraction)
    ci = binomtest(detections, trials).proportion_ci(confidence_level=0.95, method="wilson")
    return AttackReport(
        trials=trials,
        detections=detections,
        empirical_rate=detections / trials,
        theoretical_rate=theory,
        decoys_per_hop=cfg.decoys_per_hop,
        hop=hop.value,
        strategy=strategy.name,
        ci_low=float(ci.low),
        ci_high=float(ci.high),
    )


# -- curious participants ------------------------------------------------------------

class Knowledge(Enum):
    IN_BOTH = "InBoth"
    IN_EXACTLY_ONE = "InExactlyOne"
    IN_NEITHER_OR_BOTH = "InNeitherOrBoth"
    UNKNOWN = "Unknown"


@dataclass
class InferenceReport:
    """What Calvin learns per 1-based position.

    ``attribution`` names the holders of an element only where Calvin can
    actually tell; ``IN_EXACTLY_ONE`` positions never appear in it.
    """

    knowledge: dict[int, Knowledge]
    attribution: dict[int, frozenset[Party]] = field(default_factory=dict)

    def positions(self, kind: Knowledge) -> set[int]:
        return {i for i, k in self.knowledge.items() if k is kind}


def curious_calvin_inference(first_register_verdicts, announcement: Announcement) -> InferenceReport:
    """Classify each position from Calvin's first-register comparisons.

    An unequal position means exactly one party holds the element, but not
    which one.  An equal position is either held by both or by neither;
    Calvin resolves it to "both" only where he himself announced it.
    """
    knowledge = {}
    attribution = {}
    for i, equal in enumerate(first_register_verdicts, start=1):
        if not equal:
            knowledge[i] = Knowledge.IN_EXACTLY_ONE
        elif i in announcement.positions:
            knowledge[i] = Knowledge.IN_BOTH
            attribution[i] = frozenset({Party.ALICE, Party.BOB})
        else:
            knowledge[i] = Knowledge.IN_NEITHER_OR_BOTH
    return InferenceReport(knowledge, attribution)


def party_view(cfg: SessionConfig, party: Party) -> list:
    outcome = run_session(cfg)
    return outcome.transcript.view(party)


def alice_view_equivalence(S_A, S_B, S_B_alt, universe, seed: int, decoys_per_hop: int = 16) -> bool:
    """True iff Alice receives exactly the same messages whichever of ``S_B``
    or ``S_B_alt`` Bob holds, given the same intersection positions."""
    u = universe if isinstance(universe, UniversalSet) else UniversalSet(tuple(universe))
    c_a = encode_set(u, S_A)
    both = {i for i, (a, b) in enumerate(zip(c_a, encode_set(u, S_B))) if a and b}
    both_alt = {i for i, (a, b) in enumerate(zip(c_a, encode_set(u, S_B_alt))) if a and b}
    if both != both_alt:
        raise PreconditionViolated("S_B and S_B_alt give different intersection positions with S_A")
    views = []
    for s_b in (S_B, S_B_alt):
        cfg = SessionConfig(u.elements, S_A, s_b, decoys_per_hop=decoys_per_hop,
                            compare_mode=CompareMode.exact(), seed=seed)
        views.append(party_view(cfg, Party.ALICE))
    return views[0] == views[1]
