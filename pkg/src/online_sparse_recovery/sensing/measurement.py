"""
Simulated acquisition: scalar coded measurements y = cᵀz + ξ and the
per-patch focal-plane-array stream, where every patch sees the same mask at
time t and receives independent noise keyed by (t, patch, channel).
"""
import logging
from enum import Enum
from typing import Iterator, NamedTuple, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from online_sparse_recovery.errors import DimensionMismatchError
from online_sparse_recovery.linalg.kernels import as_dense_vector
from online_sparse_recovery.sensing.masks import BinaryMask
from online_sparse_recovery.sensing.random_streams import MAX_SEED, StreamTag, gaussian_draws


logger = logging.getLogger(__name__)


class NoiseTarget(str, Enum):
    SCENE = "scene"
    MEASUREMENT = "measurement"


class NoiseModel(BaseModel):
    """
    Additive Gaussian noise, σ in pixel-intensity units; σ = 0 is exactly noiseless.

    ``target`` selects where the noise enters: the scene pixels before
    acquisition (default) or each scalar measurement.
    """
    model_config = ConfigDict(frozen=True)

    sigma: float = Field(default=0.0, ge=0, allow_inf_nan=False)
    seed: int = Field(default=0, ge=0, le=MAX_SEED)
    target: NoiseTarget = NoiseTarget.SCENE

    @property
    def is_noiseless(self) -> bool:
        return self.sigma == 0.0


class StreamRecord(NamedTuple):
    patch: int
    t: int
    y: float


def sigma_for_target_psnr(psnr_db: float, peak: float = 255.0) -> float:
    """Noise level whose expected scene PSNR is ``psnr_db``: σ = peak/10^(PSNR/20)."""
    return peak / 10.0 ** (psnr_db / 20.0)


def add_scene_noise(pixels: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    """Scene corrupted by i.i.d. N(0, σ²) per sample, drawn row-major from the scene-noise stream."""
    pixels = np.asarray(pixels, dtype=np.float64)
    if sigma == 0.0:
        return pixels.copy()
    draws = gaussian_draws(seed, StreamTag.SCENE_NOISE, pixels.size)
    return pixels + sigma * draws.reshape(pixels.shape)


def measurement_noise(noise: NoiseModel, t: int, patch: int = 0, channel: int = 0) -> float:
    if noise.is_noiseless:
        return 0.0
    return float(noise.sigma * gaussian_draws(noise.seed, StreamTag.MEASUREMENT_NOISE, 1,
                                              index=t, patch=patch, channel=channel)[0])


def measure(z, mask: BinaryMask, noise: NoiseModel, t: int, patch: int = 0, channel: int = 0) -> float:
    """
    One coded measurement cᵀz + ξ, with ξ drawn from (noise.seed, t, patch, channel).

    Raises:
        DimensionMismatchError: If z does not have side² entries
    """
    z = as_dense_vector(z, "z")
    c = mask.flat
    if z.shape[0] != c.shape[0]:
        raise DimensionMismatchError(f"patch has dimension {z.shape[0]}, mask has {c.shape[0]}")
    return float(c @ z) + measurement_noise(noise, t, patch, channel)


def measure_patches(patches: np.ndarray, mask: BinaryMask, noise: NoiseModel, t: int, channel: int = 0) -> np.ndarray:
    """Measurements of every patch (one per row) under the shared mask at time t."""
    c = mask.flat
    if patches.ndim != 2 or patches.shape[1] != c.shape[0]:
        raise DimensionMismatchError(f"patches have shape {patches.shape}, masks have dimension {c.shape[0]}")
    values = np.array([float(c @ z) for z in patches])
    if not noise.is_noiseless:
        values += np.array([measurement_noise(noise, t, patch, channel) for patch in range(patches.shape[0])])
    return values


def fpa_stream(image_patches: Sequence, masks: Sequence[BinaryMask], noise: NoiseModel,
               channel: int = 0) -> Iterator[StreamRecord]:
    """
    Yield (patch, t, y) records, time outer and patch inner.

    Record (P, t) always uses mask t; noise keys differ per (P, t).
    """
    patches = np.array([as_dense_vector(z, "patch") for z in image_patches])
    for t, mask in enumerate(masks, start=1):
        values = measure_patches(patches, mask, noise, t, channel)
        for patch, y in enumerate(values):
            yield StreamRecord(patch=patch, t=t, y=float(y))
