"""
Binary PGM (P5) and PPM (P6) reading and writing, 8-bit samples only.
"""
import logging
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from online_sparse_recovery.errors import DataFormatError
from online_sparse_recovery.imaging.image_plane import ImagePlane


logger = logging.getLogger(__name__)

MAGIC_CHANNELS = {b"P5": 1, b"P6": 3}


def _header_tokens(data: bytes, count: int) -> Tuple[list, int]:
    """Read ``count`` whitespace-separated header tokens, skipping '#' comments."""
    tokens = []
    position = 0
    while len(tokens) < count:
        while position < len(data) and data[position:position + 1].isspace():
            position += 1
        if position >= len(data):
            raise DataFormatError("truncated PNM header")
        if data[position:position + 1] == b"#":
            while position < len(data) and data[position:position + 1] not in (b"\n", b"\r"):
                position += 1
            continue
        start = position
        while position < len(data) and not data[position:position + 1].isspace():
            position += 1
        tokens.append(data[start:position])
    # exactly one whitespace byte separates the header from the raster
    return tokens, position + 1


def decode_pnm(data: bytes) -> ImagePlane:
    """
    Decode P5/P6 bytes into an ImagePlane whose peak is the file's maxval.

    Raises:
        DataFormatError: For unsupported magic numbers, bit depths or truncated rasters
    """
    tokens, offset = _header_tokens(data, 4)
    magic = tokens[0]
    if magic not in MAGIC_CHANNELS:
        raise DataFormatError(f"unsupported image format {magic!r}; expected binary PGM (P5) or PPM (P6)")
    try:
        width, height, maxval = (int(token) for token in tokens[1:])
    except ValueError as e:
        raise DataFormatError(f"malformed PNM header: {tokens}") from e
    if width < 1 or height < 1 or not 0 < maxval < 256:
        raise DataFormatError(f"unsupported PNM geometry or depth: {width}x{height}, maxval {maxval}")

    channels = MAGIC_CHANNELS[magic]
    expected = width * height * channels
    raster = data[offset:offset + expected]
    if len(raster) != expected:
        raise DataFormatError(f"PNM raster truncated: expected {expected} bytes, got {len(raster)}")
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, channels).astype(np.float64)
    return ImagePlane(pixels, float(maxval))


def encode_pnm(image: ImagePlane) -> bytes:
    """Encode as P5 (1 channel) or P6 (3 channels), rounding samples clamped to [0, peak]."""
    magic = b"P5" if image.channels == 1 else b"P6"
    maxval = int(round(image.peak))
    if not 0 < maxval < 256:
        raise DataFormatError(f"cannot write peak {image.peak} as 8-bit PNM")
    samples = np.rint(np.clip(image.pixels, 0.0, maxval)).astype(np.uint8)
    header = magic + f"\n{image.width} {image.height}\n{maxval}\n".encode("ascii")
    return header + samples.tobytes()


def read_image(path: Union[str, Path]) -> ImagePlane:
    path = Path(path)
    image = decode_pnm(path.read_bytes())
    logger.info("Read %dx%d image with %d channel(s) from %s", image.width, image.height, image.channels, path)
    return image


def write_image(path: Union[str, Path], image: ImagePlane) -> Path:
    path = Path(path)
    path.write_bytes(encode_pnm(image))
    logger.info("Wrote %s", path)
    return path


def image_suffix(image: ImagePlane) -> str:
    return ".pgm" if image.channels == 1 else ".ppm"
