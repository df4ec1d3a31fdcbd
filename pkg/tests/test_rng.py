from qpsi.rng import SeededRng


def test_same_seed_same_stream():
    a, b = SeededRng(42), SeededRng(42)
    assert [a.random() for _ in range(10)] == [b.random() for _ in range(10)]


def test_children_are_labelled_and_order_independent():
    root = SeededRng(42)
    x = root.child("calvin", 0)
    root.random()
    y = root.child("calvin", 0)
    assert [x.integer(0, 100) for _ in range(20)] == [y.integer(0, 100) for _ in range(20)]
    assert root.child("alice").random() != root.child("bob").random()


def test_position_counts_draws():
    r = SeededRng(1)
    r.random()
    r.bit()
    r.sample(range(10), 3)
    assert r.position == 3


def test_child_seed_is_64_bit_and_distinct():
    r = SeededRng(3)
    seeds = {r.child_seed("trial", i) for i in range(1000)}
    assert len(seeds) == 1000
    assert all(0 <= s < 2**64 for s in seeds)


def test_seed_range_checked():
    import pytest

    with pytest.raises(ValueError):
        SeededRng(-1)
    with pytest.raises(ValueError):
        SeededRng(2**64)
