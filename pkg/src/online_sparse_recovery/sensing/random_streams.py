"""
Pinned counter-based random streams (contract version 2).

Every random quantity in a simulated acquisition is a pure function of
(seed, stream tag, index, patch, channel):

- bit generator: numpy ``Philox`` (4×64, 10 rounds) with
  key = (seed, stream tag) and counter = (0, index, patch, channel).
  Philox advances counter word 0 for every block it emits, so word 0
  must stay free or neighbouring indices would share blocks;
- uniforms: (raw >> 11)·2⁻⁵³ for successive 64-bit ``random_raw`` outputs;
- mask bits: the top bit of successive raw outputs (Bernoulli(1/2));
- Gaussians: Box–Muller on consecutive uniform pairs,
  z = √(−2·ln(1 − u₁))·cos(2π·u₂).

Changing any of the above changes recorded streams and must bump
RNG_CONTRACT_VERSION.
"""
from enum import IntEnum

import numpy as np


RNG_CONTRACT_VERSION = 2
MAX_SEED = 2**64 - 1


class StreamTag(IntEnum):
    MASK = 1
    MEASUREMENT_NOISE = 2
    SCENE_NOISE = 3


def validate_seed(seed: int) -> int:
    seed = int(seed)
    if seed < 0 or seed > MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def philox_stream(seed: int, tag: StreamTag, index: int = 0, patch: int = 0, channel: int = 0) -> np.random.Philox:
    """Bit generator positioned at the start of the keyed stream."""
    key = np.array([validate_seed(seed), int(tag)], dtype=np.uint64)
    counter = np.array([0, index, patch, channel], dtype=np.uint64)
    return np.random.Philox(counter=counter, key=key)


def raw_words(seed: int, tag: StreamTag, count: int, index: int = 0, patch: int = 0, channel: int = 0) -> np.ndarray:
    return np.asarray(philox_stream(seed, tag, index, patch, channel).random_raw(count), dtype=np.uint64)


def uniforms_from_raw(raw: np.ndarray) -> np.ndarray:
    return (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53


def box_muller(u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)


def bernoulli_bits(seed: int, count: int, index: int = 0) -> np.ndarray:
    raw = raw_words(seed, StreamTag.MASK, count, index=index)
    return (raw >> np.uint64(63)).astype(np.uint8)


def gaussian_draws(seed: int, tag: StreamTag, count: int, index: int = 0, patch: int = 0, channel: int = 0) -> np.ndarray:
    """``count`` standard normal draws from the keyed stream."""
    u = uniforms_from_raw(raw_words(seed, tag, 2 * count, index, patch, channel))
    return box_muller(u[0::2], u[1::2])
