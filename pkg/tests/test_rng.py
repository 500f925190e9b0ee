import math

import numpy as np
from scipy import stats

from ferulam.rng import haar_sample, stream_key, uniform_stream


def test_same_address_same_numbers():
    k = stream_key(1, 2, 3)
    assert uniform_stream(k, 0, 50).tobytes() == uniform_stream(stream_key(1, 2, 3), 0, 50).tobytes()


def test_different_addresses_differ():
    assert not np.array_equal(uniform_stream(stream_key(1, 2), 0, 8), uniform_stream(stream_key(1, 3), 0, 8))


def test_partition_invariance_at_unaligned_offsets():
    k = stream_key(42)
    whole = uniform_stream(k, 0, 1001)
    cuts = [0, 1, 5, 6, 333, 334, 1001]
    pieces = np.concatenate([uniform_stream(k, a, b - a) for a, b in zip(cuts, cuts[1:])])
    assert whole.tobytes() == pieces.tobytes()


def test_empty_request():
    assert uniform_stream(stream_key(0), 10, 0).size == 0


def test_range_and_moments():
    n = 200_000
    u = uniform_stream(stream_key(7), 0, n)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 3 * math.sqrt(1 / 12 / n)
    assert stats.kstest(u, "uniform").pvalue > 1e-3


def test_haar_rows_are_stream_slices():
    a = haar_sample(3, 10, 4, start=7)
    b = haar_sample(3, 17, 4)[7:]
    assert a.tobytes() == b.tobytes()
