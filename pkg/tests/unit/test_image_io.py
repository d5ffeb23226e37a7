import numpy as np
import pytest

from online_sparse_recovery.errors import DataFormatError
from online_sparse_recovery.imaging.image_io import decode_pnm, encode_pnm, image_suffix, read_image, write_image
from online_sparse_recovery.imaging.image_plane import ImagePlane


class TestPnmCodec:
    """Test binary PGM/PPM encoding and decoding."""

    def test_decode_pgm_with_comment(self):
        """Test a P5 header with a comment line."""
        data = b"P5\n# made by hand\n2 1\n255\n" + bytes([0, 200])
        image = decode_pnm(data)
        assert (image.width, image.height, image.channels, image.peak) == (2, 1, 1, 255.0)
        assert np.array_equal(image.channel(0), np.array([[0.0, 200.0]]))

    def test_decode_ppm_channels(self):
        """Test that P6 samples are interleaved RGB."""
        image = decode_pnm(b"P6\n1 1\n255\n" + bytes([10, 20, 30]))
        assert image.channels == 3
        assert np.array_equal(image.pixels[0, 0], np.array([10.0, 20.0, 30.0]))

    def test_encode_rounds_and_clamps(self):
        """Test that written samples are rounded and clamped to 8 bits."""
        image = ImagePlane(np.array([[-3.0, 12.6, 300.0]]))
        assert encode_pnm(image) == b"P5\n3 1\n255\n" + bytes([0, 13, 255])

    def test_files_round_trip(self, tmp_path, rng):
        """Test that an 8-bit color image survives write and read."""
        pixels = rng.integers(0, 256, (4, 6, 3)).astype(float)
        image = ImagePlane(pixels)
        path = write_image(tmp_path / f"scene{image_suffix(image)}", image)
        assert path.suffix == ".ppm"
        assert np.array_equal(read_image(path).pixels, pixels)

    @pytest.mark.parametrize("data", [
        b"P3\n1 1\n255\n0 0 0\n",
        b"P5\n2 2\n255\n" + bytes([1, 2, 3]),
        b"P5\n1 1\n65535\n" + bytes([0, 0]),
        b"P5\n1\n",
    ])
    def test_rejects_unsupported_input(self, data):
        """Test ASCII formats, truncated rasters, 16-bit depth and truncated headers."""
        with pytest.raises(DataFormatError):
            decode_pnm(data)
