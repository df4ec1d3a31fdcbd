"""Exit criteria. Each test prints one PASS/FAIL line."""
import itertools
import json
import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import H_LITERAL, S_A_EX, S_B_EX, U_EX, three_sigma
from qpsi import hqpsi
from qpsi.adversary import (
    EveStrategy,
    Knowledge,
    alice_view_equivalence,
    curious_calvin_inference,
    detection_rate_theory,
    run_attack_trials,
)
from qpsi.cli import main, run_worked_example
from qpsi.harness import (
    Completed,
    Hop,
    SessionConfig,
    SetPolicy,
    classical_oracle,
    run_monte_carlo,
    run_session,
)
from qpsi.hqpsi import CompareMode, UniversalSet
from qpsi.nqpsi import NqpsiRandomness, Sign, leakage_attack, nqpsi_run
from qpsi.qubit import HADAMARD, IDENTITY, ThirdExponent, h_power_spectral
from qpsi.rng import SeededRng


@pytest.fixture
def verdict(capsys, request):
    lines = []

    def emit(ok: bool, detail: str):
        lines.append((ok, detail))
        return ok

    yield emit
    with capsys.disabled():
        for ok, detail in lines:
            print(f"\n[{'PASS' if ok else 'FAIL'}] {request.node.name}: {detail}")


def test_ac01_gate_identities(verdict):
    t0 = time.perf_counter()
    r43 = h_power_spectral(ThirdExponent(4)).distance(IDENTITY)
    r53 = h_power_spectral(ThirdExponent(5)).distance(HADAMARD)
    r2 = h_power_spectral(ThirdExponent(6)).distance(IDENTITY)
    r2_literal = float(np.linalg.norm(H_LITERAL @ H_LITERAL - np.eye(2)))
    elapsed = time.perf_counter() - t0
    ok = max(r43, r53, r2, r2_literal) <= 1e-12 and elapsed < 1.0
    verdict(ok, f"|H^4/3-I|={r43:.1e} |H^5/3-H|={r53:.1e} |H^2-I|={r2:.1e} ({elapsed:.3f}s)")
    assert ok


def test_ac02_worked_example(verdict):
    t0 = time.perf_counter()
    _, outcome = run_worked_example()
    elapsed = time.perf_counter() - t0
    v = outcome.calvin_verdicts
    equal_first = [i + 1 for i in range(8) if v[i]]
    unequal_second = [i + 1 for i in range(8, 16) if not v[i]]
    code = main(["demo-example", "--format", "table", "--out", "/dev/null"])
    ok = (
        isinstance(outcome, Completed)
        and equal_first == [1, 3, 4, 6]
        and unequal_second == [10, 11, 14]
        and outcome.announcement.sorted() == [3, 6]
        and outcome.intersection == {7, 17}
        and code == 0
        and elapsed < 1.0
    )
    verdict(ok, f"equal={equal_first} unequal={unequal_second} "
                f"announced={outcome.announcement.sorted()} S_in={sorted(outcome.intersection)} "
                f"exit={code} ({elapsed:.3f}s)")
    assert ok


def test_ac03_gate_composition_by_code_pair(verdict):
    """First register I,H,H,I; second register per flag choice."""
    expected_first = {(0, 0): IDENTITY, (0, 1): HADAMARD, (1, 0): HADAMARD, (1, 1): IDENTITY}
    expected_second = {(0, 0): {"I"}, (0, 1): {"I", "H"}, (1, 0): {"I", "H"}, (1, 1): {"H"}}
    worst = 0.0
    second_ok = True
    rng = np.random.default_rng(3)
    for (ca, cb), want in expected_first.items():
        realized = set()
        for ha in (0, 1):
            r_a = tuple(int(x) for x in rng.integers(1, 1025, 2))
            r_b = tuple(int(x) for x in rng.integers(1, 1025, 2))
            ea = hqpsi.party_exponents((ca,), r_a, (ha,))
            eb = hqpsi.party_exponents((cb,), r_b, (ha ^ 1,))
            r_c = hqpsi.combine_public_exponents(r_a, r_b)
            composed = [
                h_power_spectral(ThirdExponent.whole(r_c[p])) @ h_power_spectral(eb[p]) @ h_power_spectral(ea[p])
                for p in (0, 1)
            ]
            worst = max(worst, composed[0].distance(want))
            if composed[1].distance(IDENTITY) <= 1e-12:
                realized.add("I")
            elif composed[1].distance(HADAMARD) <= 1e-12:
                realized.add("H")
            else:
                second_ok = False
        second_ok &= realized == expected_second[(ca, cb)]
    ok = worst <= 1e-12 and second_ok
    verdict(ok, f"first-register residual max {worst:.1e}; second-register rows match: {second_ok}")
    assert ok


def test_ac04_oracle_equivalence(verdict):
    t0 = time.perf_counter()
    base = SessionConfig((0,), (), (), decoys_per_hop=0, compare_mode=CompareMode.exact())
    summary = run_monte_carlo(base, 1000, SetPolicy(max_n=16), SeededRng(4))
    exhaustive = 0
    exhaustive_ok = 0
    for n in range(1, 5):
        universe = tuple(range(n))
        for ca, cb in itertools.product(itertools.product((0, 1), repeat=n), repeat=2):
            a = {x for x, bit in zip(universe, ca) if bit}
            b = {x for x, bit in zip(universe, cb) if bit}
            outcome = run_session(SessionConfig(universe, a, b, decoys_per_hop=0, seed=exhaustive))
            exhaustive += 1
            exhaustive_ok += isinstance(outcome, Completed) and outcome.intersection == classical_oracle(a, b)
    elapsed = time.perf_counter() - t0
    ok = summary.matches == 1000 and exhaustive_ok == exhaustive and elapsed < 10.0
    verdict(ok, f"random {summary.matches}/1000, exhaustive n<=4 {exhaustive_ok}/{exhaustive} "
                f"(n=4 alone: 256 pairs) ({elapsed:.2f}s)")
    assert ok


def test_ac05_nqpsi_signs(verdict):
    expected = {(0, 0): Sign.PLUS, (0, 1): Sign.MINUS, (1, 0): Sign.MINUS, (1, 1): Sign.PLUS}
    u = UniversalSet((1,))
    bad = 0
    for draw in range(1000):
        rng = SeededRng(draw)
        for (ca, cb), sign in expected.items():
            v, transcript = nqpsi_run({1} if ca else set(), {1} if cb else set(), u, rng.child(ca, cb))
            final = transcript[-1]["exponents"][0]
            if v.signs != (sign,) or final not in (0, 2):
                bad += 1
    ok = bad == 0
    verdict(ok, f"4 cases x 1000 draws, signs (+,-,-,+) and exponent in {{0,2}}; violations={bad}")
    assert ok


def test_ac06_nqpsi_leak(verdict):
    u = UniversalSet(U_EX)
    v, _ = nqpsi_run(S_A_EX, S_B_EX, u, SeededRng(0))
    alice_ex = leakage_attack(v, hqpsi.encode_set(u, S_A_EX), u)
    bob_ex = leakage_attack(v, hqpsi.encode_set(u, S_B_EX), u)
    policy = SetPolicy(max_n=16)
    exact = 0
    for t in range(100):
        rng = SeededRng(t)
        universe, a, b = policy.sample(rng.child("sets"))
        uu = UniversalSet(universe)
        vv, _ = nqpsi_run(a, b, uu, rng.child("run"))
        exact += (leakage_attack(vv, hqpsi.encode_set(uu, a), uu) == b - a
                  and leakage_attack(vv, hqpsi.encode_set(uu, b), uu) == a - b)
    ok = alice_ex == {13, 35} and bob_ex == {5, 20} and exact == 100
    verdict(ok, f"example Alice->{sorted(alice_ex)} Bob->{sorted(bob_ex)}; random {exact}/100")
    assert ok


def test_ac07_eavesdropping_detection(verdict):
    t0 = time.perf_counter()
    trials = 10_000
    rows = []
    ok = True
    for l in (1, 4, 8, 16):
        cfg = SessionConfig((1, 2), {1}, {1, 2}, decoys_per_hop=l)
        rep = run_attack_trials(cfg, EveStrategy.intercept(), Hop.CALVIN_ALICE, trials, SeededRng(700 + l))
        p = detection_rate_theory(l)
        band = three_sigma(p, trials)
        within = abs(rep.empirical_rate - p) <= band
        ok &= within
        rows.append(f"l={l}: {rep.empirical_rate:.4f} vs {p:.4f}+/-{band:.4f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 60.0
    verdict(ok, "; ".join(rows) + f" ({elapsed:.1f}s)")
    assert ok


def test_ac08_sampled_error_model(verdict):
    rows = []
    ok = True
    universe = tuple(range(16))
    shared = set(range(8))  # positions 1..8 intersect, 9..16 held by neither
    for k in (1, 5, 10):
        cfg = SessionConfig(universe, shared, shared, decoys_per_hop=0, compare_mode=CompareMode.sampled(k))
        misses = positions = false_pos = 0
        seed = 0
        while positions < 10_000:
            outcome = run_session(replace(cfg, seed=SeededRng(k).child_seed(seed)))
            seed += 1
            misses += len(shared - outcome.intersection)
            false_pos += len(outcome.intersection - shared)
            positions += len(shared)
        p = 2.0 ** -k
        band = three_sigma(p, positions)
        within = abs(misses / positions - p) <= band and false_pos == 0
        ok &= within
        rows.append(f"k={k}: FN {misses / positions:.5f} vs {p:.5f}+/-{band:.5f}, FP {false_pos}")
    verdict(ok, "; ".join(rows))
    assert ok


def test_ac09_privacy_views(verdict):
    policy = SetPolicy(max_n=12, min_n=2)
    identical = 0
    attribution_leaks = 0
    for t in range(100):
        rng = SeededRng(900 + t)
        universe, a, b = policy.sample(rng.child("sets"))
        outside_a = [x for x in universe if x not in a]
        r = rng.child("alt")
        b_alt = (a & b) | {x for x in outside_a if r.random() < 0.5}
        identical += alice_view_equivalence(a, b, b_alt, universe, seed=t, decoys_per_hop=4)
        outcome = run_session(SessionConfig(universe, a, b, decoys_per_hop=4, seed=t))
        n = len(universe)
        report = curious_calvin_inference(outcome.calvin_verdicts[:n], outcome.announcement)
        attribution_leaks += len(set(report.attribution) & report.positions(Knowledge.IN_EXACTLY_ONE))
    ok = identical == 100 and attribution_leaks == 0
    verdict(ok, f"Alice views identical {identical}/100; InExactlyOne attributions {attribution_leaks}")
    assert ok


SPOT_CHECKS = [
    ["run", "--universe", "2,5,7,9,13,17,20,35", "--set-a", "5,7,17,20", "--set-b", "7,13,17,35", "--seed", "1"],
    ["run", "--universe", "1,2,3,4", "--set-a", "1,2", "--set-b", "2,3", "--mode", "sampled",
     "--reps", "4", "--seed", "2", "--verbose-transcript"],
    ["run", "--universe", "1,2", "--set-a", "1", "--decoys", "30", "--retries", "2", "--eve", "intercept",
     "--seed", "3"],
    ["demo-example"],
    ["verify-gates"],
    ["vuln-nqpsi", "--seed", "4", "--trials", "20"],
    ["attack", "--seed", "5", "--trials", "200", "--decoys", "4"],
    ["attack", "--seed", "6", "--trials", "100", "--strategy", "intercept-z", "--hop", "bob-calvin"],
    ["monte-carlo", "--seed", "7", "--trials", "50"],
    ["monte-carlo", "--seed", "8", "--trials", "30", "--mode", "sampled", "--reps", "3"],
]


def test_ac10_determinism(verdict, capsys, tmp_path):
    same = 0
    for i, argv in enumerate(SPOT_CHECKS):
        outputs = []
        for rerun in range(2):
            path = tmp_path / f"r{i}_{rerun}.json"
            main(argv + ["--out", str(path)])
            outputs.append(path.read_bytes())
        json.loads(outputs[0])
        same += outputs[0] == outputs[1]
    capsys.readouterr()
    ok = same == len(SPOT_CHECKS)
    verdict(ok, f"{same}/{len(SPOT_CHECKS)} subcommand reruns byte-identical")
    assert ok
