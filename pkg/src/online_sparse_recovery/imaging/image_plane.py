"""
Image planes and their partition into non-overlapping square patches.

Patches are flattened row-major and numbered row-major by block; pixel
(row, col) belongs to patch (row // p)·cols + (col // p).
"""
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from online_sparse_recovery.errors import DataFormatError, DimensionMismatchError


@dataclass(frozen=True, eq=False)
class ImagePlane:
    """
    Image samples as a (height, width, channels) float64 array.

    Samples may leave [0, peak] in intermediate results; `clamped` restores
    the range for output.
    """
    pixels: np.ndarray
    peak: float = 255.0

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.float64)
        if pixels.ndim == 2:
            pixels = pixels[:, :, np.newaxis]
        if pixels.ndim != 3 or pixels.shape[2] not in (1, 3):
            raise DataFormatError(f"image must be (height, width, 1 or 3), got shape {pixels.shape}")
        if pixels.shape[0] < 1 or pixels.shape[1] < 1:
            raise DataFormatError("image must have positive width and height")
        if not self.peak > 0:
            raise ValueError(f"peak must be positive, got {self.peak}")
        object.__setattr__(self, "pixels", pixels)
        object.__setattr__(self, "peak", float(self.peak))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    def channel(self, index: int) -> np.ndarray:
        return self.pixels[:, :, index]

    def clamped(self) -> "ImagePlane":
        return ImagePlane(np.clip(self.pixels, 0.0, self.peak), self.peak)

    @classmethod
    def from_channels(cls, channels: List[np.ndarray], peak: float = 255.0) -> "ImagePlane":
        return cls(np.stack(channels, axis=2), peak)


@dataclass(frozen=True)
class PatchGrid:
    """Non-overlapping tiling of a (rows·p)×(cols·p) plane into p×p patches."""
    patch_side: int
    cols: int
    rows: int

    def __post_init__(self):
        if self.patch_side < 1 or self.cols < 1 or self.rows < 1:
            raise ValueError("patch_side, cols and rows must be positive")

    @classmethod
    def for_image(cls, image: ImagePlane, patch_side: int) -> "PatchGrid":
        """
        Grid covering the whole image.

        Raises:
            DataFormatError: If patch_side does not divide both dimensions
        """
        if patch_side < 1:
            raise ValueError(f"patch_side must be positive, got {patch_side}")
        if image.width % patch_side or image.height % patch_side:
            raise DataFormatError(
                f"image of {image.width}x{image.height} is not divisible into {patch_side}x{patch_side} patches; "
                "crop it to a multiple of the patch side"
            )
        return cls(patch_side=patch_side, cols=image.width // patch_side, rows=image.height // patch_side)

    @property
    def width(self) -> int:
        return self.cols * self.patch_side

    @property
    def height(self) -> int:
        return self.rows * self.patch_side

    @property
    def num_patches(self) -> int:
        return self.rows * self.cols

    @property
    def patch_dim(self) -> int:
        return self.patch_side * self.patch_side

    def rectangle(self, index: int) -> Tuple[int, int, int, int]:
        """Pixel rectangle (top, left, bottom, right) of a patch, bottom/right exclusive."""
        if not 0 <= index < self.num_patches:
            raise IndexError(f"patch index {index} outside grid of {self.num_patches} patches")
        top = (index // self.cols) * self.patch_side
        left = (index % self.cols) * self.patch_side
        return top, left, top + self.patch_side, left + self.patch_side

    def patch_index(self, row: int, col: int) -> int:
        if not (0 <= row < self.height and 0 <= col < self.width):
            raise IndexError(f"pixel ({row}, {col}) outside {self.width}x{self.height} grid")
        return (row // self.patch_side) * self.cols + col // self.patch_side

    def check_image(self, image: ImagePlane) -> None:
        if image.width != self.width or image.height != self.height:
            raise DataFormatError(
                f"grid covers {self.width}x{self.height} but image is {image.width}x{image.height}"
            )


def crop_to_multiple(image: ImagePlane, patch_side: int) -> ImagePlane:
    """Drop the bottom rows and right columns that do not fill a whole patch."""
    height = image.height - image.height % patch_side
    width = image.width - image.width % patch_side
    if height == 0 or width == 0:
        raise DataFormatError(f"image of {image.width}x{image.height} is smaller than one {patch_side}x{patch_side} patch")
    return ImagePlane(image.pixels[:height, :width, :], image.peak)


def extract_patches(image: ImagePlane, grid: PatchGrid, channel: int = 0) -> np.ndarray:
    """
    Flattened patches of one channel.

    Returns:
        np.ndarray: (num_patches, p²) array, one row-major patch per row,
        rows ordered row-major by block
    """
    grid.check_image(image)
    p = grid.patch_side
    plane = image.channel(channel)
    blocks = plane.reshape(grid.rows, p, grid.cols, p).transpose(0, 2, 1, 3)
    return blocks.reshape(grid.num_patches, p * p).copy()


def assemble_patches(patches, grid: PatchGrid, peak: float = 255.0) -> np.ndarray:
    """
    Inverse of `extract_patches`, clamped to [0, peak].

    Raises:
        DimensionMismatchError: If the patch count or dimension does not match the grid
    """
    patches = np.asarray(patches, dtype=np.float64)
    if patches.shape != (grid.num_patches, grid.patch_dim):
        raise DimensionMismatchError(
            f"expected {grid.num_patches} patches of dimension {grid.patch_dim}, got shape {patches.shape}"
        )
    p = grid.patch_side
    plane = patches.reshape(grid.rows, grid.cols, p, p).transpose(0, 2, 1, 3).reshape(grid.height, grid.width)
    return np.clip(plane, 0.0, peak)
