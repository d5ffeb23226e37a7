import numpy as np
import pytest

from online_sparse_recovery.sensing.random_streams import (
    MAX_SEED,
    StreamTag,
    bernoulli_bits,
    box_muller,
    gaussian_draws,
    raw_words,
    uniforms_from_raw,
    validate_seed,
)


class TestRawStreams:
    """Test the keyed Philox streams."""

    def test_key_and_counter_layout(self):
        """Test that the stream is Philox keyed by (seed, tag) at counter (0, index, patch, channel)."""
        expected = np.random.Philox(counter=[0, 2, 3, 1], key=[5, int(StreamTag.MEASUREMENT_NOISE)]).random_raw(4)
        assert np.array_equal(raw_words(5, StreamTag.MEASUREMENT_NOISE, 4, index=2, patch=3, channel=1), expected)

    def test_streams_are_reproducible(self):
        """Test that identical keys give identical draws."""
        assert np.array_equal(gaussian_draws(9, StreamTag.SCENE_NOISE, 16), gaussian_draws(9, StreamTag.SCENE_NOISE, 16))

    def test_keys_separate_streams(self):
        """Test that tag, index, patch and channel each change the stream."""
        base = raw_words(1, StreamTag.MASK, 8)
        assert not np.array_equal(base, raw_words(1, StreamTag.MEASUREMENT_NOISE, 8))
        assert not np.array_equal(base, raw_words(1, StreamTag.MASK, 8, index=1))
        assert not np.array_equal(base, raw_words(1, StreamTag.MASK, 8, patch=1))
        assert not np.array_equal(base, raw_words(1, StreamTag.MASK, 8, channel=1))

    def test_seed_range(self):
        """Test that seeds must be 64-bit unsigned integers."""
        assert validate_seed(MAX_SEED) == MAX_SEED
        with pytest.raises(ValueError):
            validate_seed(-1)
        with pytest.raises(ValueError):
            validate_seed(MAX_SEED + 1)


class TestDerivedDraws:
    """Test uniforms, bits and Gaussians derived from raw words."""

    def test_uniform_conversion_bounds(self):
        """Test that the 53-bit conversion maps into [0, 1)."""
        raw = np.array([0, 2**64 - 1], dtype=np.uint64)
        uniforms = uniforms_from_raw(raw)
        assert uniforms[0] == 0.0
        assert uniforms[1] == 1.0 - 2.0**-53

    def test_box_muller_known_values(self):
        """Test z = √(−2 ln(1 − u₁))·cos(2πu₂) at hand-picked points."""
        u1 = np.array([0.0, 1.0 - np.exp(-0.5)])
        u2 = np.array([0.3, 0.0])
        assert np.allclose(box_muller(u1, u2), [0.0, 1.0])

    def test_bits_are_balanced(self):
        """Test that mask bits are 0/1 with frequency near one half."""
        bits = bernoulli_bits(7, 20000)
        assert set(np.unique(bits)) <= {0, 1}
        assert abs(bits.mean() - 0.5) < 0.02

    def test_gaussian_moments(self):
        """Test that Gaussian draws have roughly zero mean and unit variance."""
        draws = gaussian_draws(3, StreamTag.MEASUREMENT_NOISE, 20000)
        assert abs(draws.mean()) < 0.05
        assert abs(draws.std() - 1.0) < 0.05
