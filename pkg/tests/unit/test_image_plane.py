import numpy as np
import pytest

from online_sparse_recovery.errors import DataFormatError, DimensionMismatchError
from online_sparse_recovery.imaging.image_plane import (
    ImagePlane,
    PatchGrid,
    assemble_patches,
    crop_to_multiple,
    extract_patches,
)


class TestImagePlane:
    """Test image plane construction."""

    def test_grayscale_array_gets_channel_axis(self):
        """Test that a 2-D array becomes a single-channel plane."""
        image = ImagePlane(np.zeros((3, 5)))
        assert (image.height, image.width, image.channels) == (3, 5, 1)

    def test_rejects_two_channels(self):
        """Test that only 1 or 3 channels are accepted."""
        with pytest.raises(DataFormatError):
            ImagePlane(np.zeros((2, 2, 2)))

    def test_clamped(self):
        """Test clamping to [0, peak]."""
        image = ImagePlane(np.array([[-5.0, 260.0]]), peak=255.0)
        assert np.array_equal(image.clamped().channel(0), np.array([[0.0, 255.0]]))


class TestPatchGrid:
    """Test the non-overlapping patch tiling."""

    def test_for_image(self):
        """Test grid geometry for a divisible image."""
        grid = PatchGrid.for_image(ImagePlane(np.zeros((16, 24))), 8)
        assert (grid.rows, grid.cols, grid.num_patches, grid.patch_dim) == (2, 3, 6, 64)

    def test_rejects_non_divisible_image(self):
        """Test that the remainder is rejected rather than padded."""
        with pytest.raises(DataFormatError, match="crop"):
            PatchGrid.for_image(ImagePlane(np.zeros((10, 16))), 8)

    def test_index_maps_agree(self):
        """Test that every pixel maps to the patch whose rectangle contains it."""
        grid = PatchGrid(patch_side=2, cols=3, rows=2)
        for row in range(grid.height):
            for col in range(grid.width):
                top, left, bottom, right = grid.rectangle(grid.patch_index(row, col))
                assert top <= row < bottom and left <= col < right

    def test_crop_to_multiple(self):
        """Test that cropping drops the partial bottom rows and right columns."""
        cropped = crop_to_multiple(ImagePlane(np.zeros((10, 19))), 8)
        assert (cropped.height, cropped.width) == (8, 16)


class TestPatchExtraction:
    """Test patch extraction and assembly."""

    def test_single_patch_is_whole_image(self):
        """Test that a 2×2 image with p = 2 is one row-major patch."""
        image = ImagePlane(np.array([[1.0, 2.0], [3.0, 4.0]]))
        patches = extract_patches(image, PatchGrid.for_image(image, 2))
        assert np.array_equal(patches, np.array([[1.0, 2.0, 3.0, 4.0]]))

    def test_constant_image(self):
        """Test four all-7 patches from a constant 4×4 image."""
        image = ImagePlane(np.full((4, 4), 7.0))
        patches = extract_patches(image, PatchGrid.for_image(image, 2))
        assert patches.shape == (4, 4)
        assert np.all(patches == 7.0)

    def test_block_order_is_row_major(self):
        """Test that patch 1 is the top-right block."""
        pixels = np.arange(16, dtype=float).reshape(4, 4)
        image = ImagePlane(pixels)
        patches = extract_patches(image, PatchGrid.for_image(image, 2))
        assert np.array_equal(patches[1], np.array([2.0, 3.0, 6.0, 7.0]))

    def test_round_trip_is_identity(self, rng):
        """Test assemble(extract(img)) == img on a random 16×16 image."""
        pixels = rng.uniform(0.0, 255.0, (16, 16))
        image = ImagePlane(pixels)
        grid = PatchGrid.for_image(image, 8)
        assert np.array_equal(assemble_patches(extract_patches(image, grid), grid), pixels)

    def test_assembly_clamps(self):
        """Test that out-of-range samples are clamped on output."""
        grid = PatchGrid(patch_side=1, cols=2, rows=1)
        assert np.array_equal(assemble_patches([[-5.0], [260.0]], grid, peak=255.0), np.array([[0.0, 255.0]]))

    def test_zero_patch(self):
        """Test that an all-zero patch gives an all-zero channel."""
        grid = PatchGrid(patch_side=2, cols=1, rows=1)
        assert np.array_equal(assemble_patches(np.zeros((1, 4)), grid), np.zeros((2, 2)))

    def test_assembly_count_mismatch(self):
        """Test that the patch count must match the grid."""
        with pytest.raises(DimensionMismatchError):
            assemble_patches(np.zeros((3, 4)), PatchGrid(patch_side=2, cols=1, rows=1))

    def test_extraction_grid_mismatch(self):
        """Test that a grid for another image size is rejected."""
        with pytest.raises(DataFormatError):
            extract_patches(ImagePlane(np.zeros((4, 4))), PatchGrid(patch_side=2, cols=1, rows=1))
