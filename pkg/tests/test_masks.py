import numpy as np
import pytest

from v6diffusion.errors import InvalidWindow
from v6diffusion.masks import default_window_schedule, global_mask, local_mask


def brute_global(seq_len):
    return np.array([[j <= i for j in range(seq_len)] for i in range(seq_len)])


def brute_local(seq_len, window):
    return np.array([[i // window == j // window for j in range(seq_len)]
                     for i in range(seq_len)])


@pytest.mark.parametrize("seq_len", [1, 3, 4, 8, 32])
def test_global_mask_matches_brute_force(seq_len):
    assert np.array_equal(global_mask(seq_len), brute_global(seq_len))


def test_global_mask_counts():
    m = global_mask(3)
    assert list(m.sum(axis=1)) == [1, 2, 3]
    assert global_mask(32).sum() == 32 * 33 // 2 == 528
    assert list(np.nonzero(global_mask(4)[0])[0]) == [0]


@pytest.mark.parametrize("seq_len,window", [
    (4, 1), (4, 2), (4, 4), (8, 2), (8, 4), (8, 8),
    (32, 2), (32, 4), (32, 8), (32, 16), (32, 32),
])
def test_local_mask_matches_brute_force(seq_len, window):
    assert np.array_equal(local_mask(seq_len, window), brute_local(seq_len, window))


def test_local_mask_special_cases():
    assert local_mask(32, 32).all()
    m = local_mask(32, 2)
    assert m.sum() == 64  # 16 blocks of 2x2
    with pytest.raises(InvalidWindow):
        local_mask(32, 3)
    with pytest.raises(InvalidWindow):
        local_mask(8, 0)


def test_every_row_has_a_permitted_column():
    for seq_len in (1, 4, 8, 32):
        assert global_mask(seq_len).any(axis=1).all()
        for w in (1, 2, 4):
            if seq_len % w == 0:
                assert local_mask(seq_len, w).any(axis=1).all()


def test_default_window_schedule():
    assert default_window_schedule(10, 32) == (2, 2, 4, 4, 8, 8, 16, 16, 32, 32)
    assert default_window_schedule(4, 32) == (2, 2, 4, 4)
    assert default_window_schedule(2, 8) == (2, 2)
    assert default_window_schedule(10, 8) == (2, 2, 4, 4, 8, 8, 8, 8, 8, 8)
