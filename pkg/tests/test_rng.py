"""Seeded stream construction."""

import numpy as np

from lwpll import make_rng


def test_same_seed_same_stream_replays():
    a = make_rng(42, stream=3).random(100)
    b = make_rng(42, stream=3).random(100)
    assert np.array_equal(a, b)


def test_streams_are_distinct():
    base = make_rng(42).random(100)
    other_stream = make_rng(42, stream=1).random(100)
    other_seed = make_rng(43).random(100)
    assert not np.array_equal(base, other_stream)
    assert not np.array_equal(base, other_seed)


def test_default_stream_is_zero():
    assert np.array_equal(make_rng(7).random(10), make_rng(7, stream=0).random(10))


def test_counter_based_generator():
    assert type(make_rng(0).bit_generator).__name__ == "Philox"
