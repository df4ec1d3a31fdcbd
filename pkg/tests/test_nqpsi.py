import itertools

import pytest

from conftest import S_A_EX, S_B_EX, U_EX
from qpsi.harness import SetPolicy
from qpsi.hqpsi import UniversalSet, encode_set
from qpsi.nqpsi import (
    NqpsiRandomness,
    PhaseTrackedState,
    Sign,
    calvin_correction,
    leakage_attack,
    nqpsi_run,
    partition_results,
    qft_accumulate,
)
from qpsi.rng import SeededRng

U = UniversalSet(U_EX)


@pytest.mark.parametrize("start, e, end", [(0, 4, 0), (0, 2, 2), (3, 1, 0)])
def test_qft_accumulate(start, e, end):
    assert qft_accumulate(PhaseTrackedState(0, start), e).exp_mod4 == end


@pytest.mark.parametrize(
    "ca, cb, sign",
    [(0, 0, Sign.PLUS), (0, 1, Sign.MINUS), (1, 0, Sign.MINUS), (1, 1, Sign.PLUS)],
)
def test_sign_table(ca, cb, sign):
    u = UniversalSet((1,))
    for seed in range(200):
        verdict, _ = nqpsi_run({1} if ca else set(), {1} if cb else set(), u, SeededRng(seed))
        assert verdict.signs == (sign,)


def test_masking_cancels_exhaustively():
    for ca, cb, ra, rb in itertools.product((0, 1), repeat=4):
        for ha, hb in itertools.product(range(1, 9), repeat=2):
            rand_a = NqpsiRandomness((ra,), (ha,))
            rand_b = NqpsiRandomness((rb,), (hb,))
            total = 2 * ca + ra * ha + 2 * cb + rb * hb + calvin_correction(rand_a, rand_b)[0]
            assert total % 4 in (0, 2)
            assert (total % 4 == 0) == (ca == cb)


def test_transcript_records_exponents():
    _, transcript = nqpsi_run(S_A_EX, S_B_EX, U, SeededRng(1))
    assert [t["step"] for t in transcript] == [1, 3, 5, 7]
    assert all(e in (0, 2) for e in transcript[-1]["exponents"])


def test_partition_worked_example():
    verdict, _ = nqpsi_run(S_A_EX, S_B_EX, U, SeededRng(0))
    plus, minus = partition_results(verdict, U)
    assert minus == {5, 13, 20, 35}
    assert plus == {2, 9, 7, 17}


def test_partition_edge_cases():
    v, _ = nqpsi_run(S_A_EX, S_A_EX, U, SeededRng(0))
    assert partition_results(v, U)[1] == set()
    v, _ = nqpsi_run(set(U_EX), set(), U, SeededRng(0))
    assert partition_results(v, U)[1] == set(U_EX)


def test_leakage_worked_example():
    verdict, _ = nqpsi_run(S_A_EX, S_B_EX, U, SeededRng(0))
    assert leakage_attack(verdict, encode_set(U, S_A_EX), U) == {13, 35}
    assert leakage_attack(verdict, encode_set(U, S_B_EX), U) == {5, 20}
    same, _ = nqpsi_run(S_A_EX, S_A_EX, U, SeededRng(0))
    assert leakage_attack(same, encode_set(U, S_A_EX), U) == set()


def test_leakage_recovers_difference_sets():
    policy = SetPolicy(max_n=16)
    for t in range(100):
        rng = SeededRng(t)
        universe, a, b = policy.sample(rng.child("sets"))
        u = UniversalSet(universe)
        verdict, _ = nqpsi_run(a, b, u, rng.child("run"))
        alice = leakage_attack(verdict, encode_set(u, a), u)
        bob = leakage_attack(verdict, encode_set(u, b), u)
        assert alice == b - a
        assert bob == a - b
        assert alice | bob == partition_results(verdict, u)[1]
        assert not alice & bob


def test_randomness_validation():
    with pytest.raises(ValueError):
        NqpsiRandomness((2,), (1,))
    with pytest.raises(ValueError):
        NqpsiRandomness((1,), (0,))
