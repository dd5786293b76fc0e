import numpy as np
from hypothesis import given, strategies as st

from snapbm._rng import philox_block, stream_generator, uniforms4

U64 = st.integers(0, 2**64 - 1)


@given(U64, U64, st.integers(1, 2**40))
def test_block_matches_numpy_philox(seed, stream, counter):
    # numpy increments the counter (with carry) before producing a block.
    bg = np.random.Philox(counter=np.array([(counter - 1) % 2**64, 0, 0, 0], dtype=np.uint64),
                          key=np.array([seed, stream], dtype=np.uint64))
    expected = bg.random_raw(4)
    got = philox_block(np.uint64(counter), np.uint64(0), np.uint64(0), np.uint64(0),
                       np.uint64(seed), np.uint64(stream))
    assert [int(x) for x in got] == [int(x) for x in expected]


def test_uniforms_open_interval_and_mean():
    u = np.array([uniforms4(7, 3, k) for k in range(20000)]).ravel()
    assert u.min() > 0 and u.max() < 1
    assert abs(u.mean() - 0.5) < 4 * np.sqrt(1 / 12 / len(u))


def test_streams_differ():
    a = [uniforms4(1, 0, k) for k in range(4)]
    b = [uniforms4(1, 1, k) for k in range(4)]
    assert a != b


def test_host_generator_is_reproducible():
    x = stream_generator(5, 9).normal(size=5)
    y = stream_generator(5, 9).normal(size=5)
    assert np.array_equal(x, y)
