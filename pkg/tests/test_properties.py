"""Property-based spot checks over randomized structures."""

import numpy as np
from hypothesis import given, settings, strategies as st

from condlaw import hashing as h
from condlaw.cli import config_hash, parse_config_text
from condlaw.seeds import derive_seed

settings.register_profile("ci", derandomize=True, max_examples=60, deadline=None)
settings.load_profile("ci")


@given(st.integers(1, 9), st.data())
def test_profile_total_equals_simulation(n, data):
    m = n + 1
    seq = tuple(data.draw(st.integers(1, m)) for _ in range(n))
    hs = h.HashSequence(table_size=m, addresses=seq)
    assert h.displacement_via_profile(hs) == h.insert_all(hs).total


@given(st.integers(2, 14), st.data())
def test_shuffle_keeps_total(m, data):
    n = data.draw(st.integers(1, m - 1))
    seq = [data.draw(st.integers(1, m)) for _ in range(n)]
    perm = data.draw(st.permutations(seq))
    a = h.insert_all(h.HashSequence(table_size=m, addresses=tuple(seq))).total
    b = h.insert_all(h.HashSequence(table_size=m, addresses=tuple(perm))).total
    assert a == b


@given(st.integers(2, 14), st.data())
def test_block_decomposition_consistency(m, data):
    n = data.draw(st.integers(1, m - 1))
    seq = h.HashSequence(
        table_size=m, addresses=tuple(data.draw(st.integers(1, m)) for _ in range(n))
    )
    deco = h.block_decompose(seq)
    res = h.insert_all(seq)
    assert deco.total == res.total
    assert sum(deco.lengths) == m
    assert sum(b.ball_count for b in deco.blocks) == n
    occupied = {int(c) for c in res.final_cells}
    for blk in deco.blocks:
        # circularly consecutive cells, all occupied except the last
        for a, b in zip(blk.cells, blk.cells[1:]):
            assert b == a % m + 1
        assert blk.cells[-1] not in occupied
        assert all(cell in occupied for cell in blk.cells[:-1])


@given(st.integers(0, 7), st.data())
def test_adversarial_identity(k, data):
    m = data.draw(st.integers(max(2 * k, 1), 16))
    seq = h.adversarial_sequence(m, k)
    assert h.insert_all(seq).total == k * (m - k)


@given(st.integers(0, 5000))
def test_threshold_is_tight(y):
    n = h.n_y_threshold(y)
    assert n * (n - 1) // 2 >= y
    if n > 1:
        assert (n - 1) * (n - 2) // 2 < y


@given(st.integers(0, 2**63 - 1), st.integers(0, 1000), st.integers(0, 1000))
def test_derive_seed_in_range(master, worker, grid):
    s = derive_seed(master, worker, grid)
    assert 0 <= s < 1 << 64


@given(
    st.dictionaries(
        st.sampled_from(["a", "b", "c", "lam", "n"]),
        st.one_of(st.integers(-100, 100), st.floats(-10, 10, allow_nan=False)),
        max_size=4,
    )
)
def test_config_hash_deterministic(cfg):
    assert config_hash(cfg) == config_hash(dict(reversed(list(cfg.items()))))


@given(st.lists(st.integers(0, 50), min_size=1, max_size=6), st.integers(0, 10**6))
def test_key_value_round_trip(values, seed):
    text = "vals = " + ", ".join(str(v) for v in values) + f"\nseed = {seed}\n"
    parsed = parse_config_text(text)
    expect = values if len(values) > 1 else values[0]
    assert parsed["vals"] == expect
    assert parsed["seed"] == seed
