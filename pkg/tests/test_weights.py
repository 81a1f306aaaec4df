"""Per-instance weight initialization and restricted-softmax updates."""

import numpy as np
import pytest

from lwpll import WeightState, init_weights, make_rng, partition_sums, update_weights


def random_masks(rng, n, k, allow_full=True):
    masks = rng.random((n, k)) < 0.5
    empty = ~masks.any(axis=1)
    masks[empty, rng.integers(0, k, size=int(empty.sum()))] = True
    if not allow_full:
        full = masks.all(axis=1)
        masks[full, 0] = False
    return masks


def test_init_values():
    masks = np.zeros((1, 10), dtype=bool)
    masks[0, [2, 5, 7]] = True
    state = init_weights(masks)
    assert np.allclose(state.w[0, masks[0]], 1.0 / 3.0, rtol=0.0, atol=0.0)
    assert np.allclose(state.w[0, ~masks[0]], 1.0 / 7.0, rtol=0.0, atol=1e-16)


def test_init_singleton_two_classes():
    state = init_weights(np.array([[True, False]]))
    assert np.array_equal(state.w, [[1.0, 1.0]])


def test_init_full_set_zeroes_complement():
    state = init_weights(np.ones((1, 4), dtype=bool))
    assert np.array_equal(state.w, [[0.25, 0.25, 0.25, 0.25]])


def test_init_rejects_empty_sets():
    with pytest.raises(ValueError):
        init_weights(np.zeros((2, 3), dtype=bool))


def test_update_equal_scores():
    masks = np.array([[True, True, False]])
    state = init_weights(masks)
    new = update_weights(state, np.zeros((1, 3)))
    assert np.allclose(new.w, [[0.5, 0.5, 1.0]], rtol=0.0, atol=1e-16)


def test_update_restricted_softmax_values():
    masks = np.array([[True, True, False]])
    state = init_weights(masks)
    new = update_weights(state, np.array([[1.0, 0.0, -1.0]]))
    assert abs(new.w[0, 0] - 0.7310585786300049) < 1e-15
    assert abs(new.w[0, 1] - 0.2689414213699951) < 1e-15
    assert new.w[0, 2] == 1.0


def test_update_shift_invariance():
    rng = make_rng(61)
    masks = random_masks(rng, 50, 6)
    state = init_weights(masks)
    g = rng.normal(0.0, 3.0, size=(50, 6))
    base = update_weights(state, g)
    for c in (0.5, -7.3, 40.0):
        shifted = update_weights(state, g + c)
        assert np.abs(shifted.w - base.w).max() <= 1e-12


def test_update_survives_huge_scores():
    masks = np.array([[True, False, True], [True, True, True]])
    state = init_weights(masks)
    g = np.array([[1e4, -1e4, 9.9e3], [1e4, 1e4, -1e4]])
    new = update_weights(state, g)
    assert np.isfinite(new.w).all()
    inside, outside = partition_sums(new)
    assert np.allclose(inside, 1.0, rtol=0.0, atol=1e-12)


def test_partition_sums_after_update():
    rng = make_rng(67)
    masks = random_masks(rng, 200, 5)
    state = init_weights(masks)
    new = update_weights(state, rng.normal(size=(200, 5)))
    assert (new.w >= 0).all()
    inside, outside = partition_sums(new)
    assert np.abs(inside - 1.0).max() <= 1e-12
    full = masks.all(axis=1)
    assert np.abs(outside[~full] - 1.0).max() <= 1e-12
    assert np.array_equal(outside[full], np.zeros(full.sum()))


def test_update_preserves_score_order():
    rng = make_rng(71)
    masks = random_masks(rng, 100, 6)
    state = init_weights(masks)
    g = rng.normal(size=(100, 6))
    new = update_weights(state, g)
    for i in range(100):
        for side in (masks[i], ~masks[i]):
            idx = np.where(side)[0]
            order = idx[np.argsort(g[i, idx])]
            assert (np.diff(new.w[i, order]) >= 0).all()
            strict = np.diff(g[i, order]) > 0
            assert (np.diff(new.w[i, order])[strict] > 0).all()


def test_update_keeps_masks_and_shape():
    rng = make_rng(73)
    masks = random_masks(rng, 20, 4)
    state = init_weights(masks)
    new = update_weights(state, rng.normal(size=(20, 4)))
    assert new.w.shape == state.w.shape
    assert new.masks is state.masks or np.array_equal(new.masks, state.masks)


def test_state_validation():
    with pytest.raises(ValueError):
        WeightState(w=np.ones((2, 3)), masks=np.ones((3, 3), dtype=bool))
    with pytest.raises(ValueError):
        WeightState(w=-np.ones((1, 3)), masks=np.ones((1, 3), dtype=bool))
    with pytest.raises(ValueError):
        update_weights(
            init_weights(np.array([[True, False]])),
            np.array([[np.nan, 0.0]]),
        )
