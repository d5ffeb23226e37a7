"""
Reconstruction quality metrics and the per-measurement trajectory record.
"""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import polars as pl

from online_sparse_recovery.errors import DimensionMismatchError
from online_sparse_recovery.imaging.image_plane import ImagePlane


logger = logging.getLogger(__name__)

SSIM_WINDOW = 8
SSIM_K1 = 0.01
SSIM_K2 = 0.03

TRAJECTORY_COLUMNS = ["t", "pct_measurements", "psnr_db", "ssim", "cg_iters_total"]
CG_PROFILE_COLUMNS = ["t", "pct_measurements", "cg_iters_total", "cg_iters_per_patch", "cg_iters_per_patch_over_n"]


def _check_comparable(reference: ImagePlane, test: ImagePlane) -> None:
    if reference.pixels.shape != test.pixels.shape:
        raise DimensionMismatchError(f"images differ in shape: {reference.pixels.shape} vs {test.pixels.shape}")
    if reference.peak != test.peak:
        raise DimensionMismatchError(f"images differ in peak: {reference.peak} vs {test.peak}")


def psnr(reference: ImagePlane, test: ImagePlane) -> float:
    """
    Peak signal-to-noise ratio 10·log10(peak²/MSE) in dB.

    MSE is pooled over all samples and channels. Identical images return
    ``math.inf``.
    """
    _check_comparable(reference, test)
    difference = reference.pixels - test.pixels
    mse = float(np.mean(difference * difference))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(reference.peak ** 2 / mse)


def _ssim_channel(x: np.ndarray, y: np.ndarray, peak: float) -> float:
    window = SSIM_WINDOW
    rows, cols = x.shape[0] // window, x.shape[1] // window
    shape = (rows, window, cols, window)
    x_blocks = x[:rows * window, :cols * window].reshape(shape)
    y_blocks = y[:rows * window, :cols * window].reshape(shape)

    mu_x = x_blocks.mean(axis=(1, 3), keepdims=True)
    mu_y = y_blocks.mean(axis=(1, 3), keepdims=True)
    dx = x_blocks - mu_x
    dy = y_blocks - mu_y
    var_x = (dx * dx).mean(axis=(1, 3))
    var_y = (dy * dy).mean(axis=(1, 3))
    cov_xy = (dx * dy).mean(axis=(1, 3))
    mu_x = mu_x[:, 0, :, 0]
    mu_y = mu_y[:, 0, :, 0]

    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    numerator = (2.0 * mu_x * mu_y + c1) * (2.0 * cov_xy + c2)
    denominator = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(numerator / denominator))


def ssim(reference: ImagePlane, test: ImagePlane) -> float:
    """
    Structural similarity over 8×8 non-overlapping uniform windows.

    Windows tile the image from the top-left corner; a remainder narrower
    than a window is ignored. Window moments use 1/N normalization and the
    constants C1 = (0.01·peak)², C2 = (0.03·peak)². Color images are scored
    per channel and averaged.

    Raises:
        DimensionMismatchError: If the images differ in shape or peak, or are
            smaller than one window
    """
    _check_comparable(reference, test)
    if reference.height < SSIM_WINDOW or reference.width < SSIM_WINDOW:
        raise DimensionMismatchError(
            f"SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {reference.width}x{reference.height}"
        )
    scores = [_ssim_channel(reference.channel(c), test.channel(c), reference.peak) for c in range(reference.channels)]
    return float(sum(scores) / len(scores))


def format_metric(value: float) -> str:
    """Render a metric for CSV/stdout; infinite PSNR is written as ``inf``."""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(float(value))


@dataclass(frozen=True)
class MetricsRecord:
    t: int
    pct_measurements: float
    psnr_db: float
    ssim: float
    cg_iters_total: int
    cg_iters_per_patch: float = 0.0


@dataclass
class MetricsTrajectory:
    """
    Quality and CG cost at each evaluation point of an online run.

    ``patch_dim`` is n, the denominator of the measurement percentage.
    """
    patch_dim: int
    records: List[MetricsRecord] = field(default_factory=list)
    nonconverged_steps: int = 0

    def append(self, record: MetricsRecord) -> None:
        if self.records and record.t <= self.records[-1].t:
            raise ValueError(f"trajectory times must increase: {record.t} after {self.records[-1].t}")
        self.records.append(record)

    @property
    def last(self) -> Optional[MetricsRecord]:
        return self.records[-1] if self.records else None

    def __len__(self) -> int:
        return len(self.records)

    def record_at(self, t: int) -> Optional[MetricsRecord]:
        for record in self.records:
            if record.t == t:
                return record
        return None

    def to_frame(self) -> pl.DataFrame:
        return pl.DataFrame(
            {
                "t": [r.t for r in self.records],
                "pct_measurements": [r.pct_measurements for r in self.records],
                "psnr_db": [r.psnr_db for r in self.records],
                "ssim": [r.ssim for r in self.records],
                "cg_iters_total": [r.cg_iters_total for r in self.records],
                "cg_iters_per_patch": [r.cg_iters_per_patch for r in self.records],
                "cg_iters_per_patch_over_n": [r.cg_iters_per_patch / self.patch_dim for r in self.records],
            },
            schema={
                "t": pl.Int64,
                "pct_measurements": pl.Float64,
                "psnr_db": pl.Float64,
                "ssim": pl.Float64,
                "cg_iters_total": pl.Int64,
                "cg_iters_per_patch": pl.Float64,
                "cg_iters_per_patch_over_n": pl.Float64,
            },
        )


def write_trajectory_csv(trajectory: MetricsTrajectory, path: Union[str, Path]) -> Path:
    """Write ``t,pct_measurements,psnr_db,ssim,cg_iters_total``, one row per evaluation point."""
    path = Path(path)
    trajectory.to_frame().select(TRAJECTORY_COLUMNS).write_csv(path)
    logger.info("Wrote trajectory with %d rows to %s", len(trajectory), path)
    return path


def write_cg_profile_csv(trajectory: MetricsTrajectory, path: Union[str, Path]) -> Path:
    """CG cost profile: totals, per-patch means and per-patch means normalized by n."""
    path = Path(path)
    trajectory.to_frame().select(CG_PROFILE_COLUMNS).write_csv(path)
    logger.info("Wrote CG profile to %s", path)
    return path


def read_trajectory_csv(path: Union[str, Path]) -> pl.DataFrame:
    return pl.read_csv(path, schema_overrides={"psnr_db": pl.Float64, "ssim": pl.Float64})
