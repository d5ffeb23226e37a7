"""
Random binary masks and the plain-text mask file format.

A mask file holds a header line ``side=<p> count=<m> seed=<s>`` followed by
one mask per line as p² characters '0'/'1' in row-major order. Mask i of a
file is regenerated from (seed, i) by `random_binary_mask`.
"""
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import List, Union

import numpy as np

from online_sparse_recovery.errors import DataFormatError
from online_sparse_recovery.sensing.random_streams import bernoulli_bits, validate_seed


logger = logging.getLogger(__name__)

HEADER_PATTERN = re.compile(r"^side=(\d+) count=(\d+) seed=(\d+)$")


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """A side×side 0/1 pattern, drawn from the mask stream at (seed, index)."""
    side: int
    bits: np.ndarray
    seed: int
    index: int = 0

    @property
    def flat(self) -> np.ndarray:
        """Row-major float vector c used in y = cᵀz."""
        return self.bits.astype(np.float64)

    def as_text(self) -> str:
        return "".join("1" if bit else "0" for bit in self.bits)


@dataclass(frozen=True)
class MaskSet:
    side: int
    seed: int
    masks: List[BinaryMask]

    @property
    def count(self) -> int:
        return len(self.masks)


def random_binary_mask(side: int, seed: int, index: int = 0) -> BinaryMask:
    """
    Draw one mask with independent Bernoulli(1/2) bits.

    Args:
        side (int): Patch side length
        seed (int): 64-bit unsigned stream seed
        index (int): Position of the mask in its sequence

    Returns:
        BinaryMask: Reproducible from (side, seed, index) on any platform
    """
    if side < 1:
        raise ValueError(f"side must be at least 1, got {side}")
    bits = bernoulli_bits(seed, side * side, index=index)
    bits.flags.writeable = False
    return BinaryMask(side=side, bits=bits, seed=validate_seed(seed), index=index)


def generate_masks(side: int, count: int, seed: int) -> MaskSet:
    """One fresh mask per time step, shared by every patch."""
    if count < 1:
        raise ValueError(f"count must be at least 1, got {count}")
    masks = [random_binary_mask(side, seed, index) for index in range(count)]
    return MaskSet(side=side, seed=validate_seed(seed), masks=masks)


def format_mask_file(mask_set: MaskSet) -> str:
    lines = [f"side={mask_set.side} count={mask_set.count} seed={mask_set.seed}"]
    lines.extend(mask.as_text() for mask in mask_set.masks)
    return "\n".join(lines) + "\n"


def write_mask_file(path: Union[str, Path], mask_set: MaskSet) -> Path:
    path = Path(path)
    path.write_text(format_mask_file(mask_set), encoding="ascii")
    logger.info("Wrote %d masks of side %d to %s", mask_set.count, mask_set.side, path)
    return path


def parse_mask_file(text: str) -> MaskSet:
    """
    Parse mask file contents.

    Raises:
        DataFormatError: If the header, the mask count or any mask line is malformed
    """
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines:
        raise DataFormatError("mask file is empty")
    match = HEADER_PATTERN.match(lines[0])
    if match is None:
        raise DataFormatError(f"malformed mask file header: {lines[0]!r}")
    side, count, seed = (int(group) for group in match.groups())
    if side < 1 or count < 1:
        raise DataFormatError(f"mask file must declare side >= 1 and count >= 1, got side={side} count={count}")
    body = lines[1:]
    if len(body) != count:
        raise DataFormatError(f"mask file declares {count} masks but contains {len(body)}")

    masks = []
    for index, line in enumerate(body):
        if len(line) != side * side or set(line) - {"0", "1"}:
            raise DataFormatError(f"mask line {index + 1} is not {side * side} characters of '0'/'1'")
        bits = np.frombuffer(line.encode("ascii"), dtype=np.uint8) - ord("0")
        bits.flags.writeable = False
        masks.append(BinaryMask(side=side, bits=bits, seed=seed, index=index))
    return MaskSet(side=side, seed=seed, masks=masks)


def read_mask_file(path: Union[str, Path]) -> MaskSet:
    path = Path(path)
    try:
        text = path.read_text(encoding="ascii")
    except UnicodeDecodeError as e:
        raise DataFormatError(f"mask file {path} is not ASCII text") from e
    mask_set = parse_mask_file(text)
    logger.info("Read %d masks of side %d from %s", mask_set.count, mask_set.side, path)
    return mask_set
