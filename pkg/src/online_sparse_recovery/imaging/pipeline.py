"""
Patch-based reconstruction over the simulated focal-plane-array stream.

Every (channel, patch) pair is an independent work unit holding its own ORLS
state. Units advance in arrival order between evaluation points on a thread
pool; evaluation (assembly, metrics, stop rule) runs on the calling thread
after all units reach the same measurement count, so the outcome does not
depend on the number of workers.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from online_sparse_recovery.errors import DataFormatError
from online_sparse_recovery.imaging.image_plane import ImagePlane, PatchGrid, assemble_patches, extract_patches
from online_sparse_recovery.imaging.metrics import MetricsRecord, MetricsTrajectory, psnr, ssim
from online_sparse_recovery.imaging.stopping import StopMode, StopRule, should_stop
from online_sparse_recovery.linalg.kernels import RESIDUAL_FLOOR
from online_sparse_recovery.sensing.dictionary import Dictionary, sensing_vector
from online_sparse_recovery.sensing.masks import BinaryMask
from online_sparse_recovery.sensing.measurement import NoiseModel, NoiseTarget, add_scene_noise, measure_patches
from online_sparse_recovery.solvers.sparse_solvers import (
    IRLS_DEFAULT_OUTER,
    MeasurementEvent,
    OrlsParams,
    OrlsState,
    irls_batch,
    least_squares_solve,
    orls_init,
    orls_step,
)


logger = logging.getLogger(__name__)

DEFAULT_SNAPSHOT_PERCENTAGES = (25.0, 75.0, 100.0)
BATCH_SOLVERS = ("irls", "least_squares")

SnapshotCallback = Callable[[int, ImagePlane], None]


@dataclass
class PatchUnit:
    channel: int
    patch: int
    state: OrlsState


@dataclass(frozen=True, eq=False)
class AcquiredData:
    """Sensing vectors shared by all patches and per-channel measurements."""
    sensing_vectors: np.ndarray
    measurements: List[np.ndarray]
    observed_scene: ImagePlane

    @property
    def count(self) -> int:
        return self.sensing_vectors.shape[0]


def _check_inputs(scene: ImagePlane, grid: PatchGrid, dictionary: Dictionary, masks: Sequence[BinaryMask]) -> None:
    if not masks:
        raise DataFormatError("at least one mask is required")
    grid.check_image(scene)
    if dictionary.side != grid.patch_side:
        raise DataFormatError(f"dictionary is for {dictionary.side}x{dictionary.side} patches, grid uses {grid.patch_side}")
    for mask in masks:
        if mask.side != grid.patch_side:
            raise DataFormatError(f"mask {mask.index} has side {mask.side}, patches have side {grid.patch_side}")


def acquire(scene: ImagePlane, grid: PatchGrid, dictionary: Dictionary,
            masks: Sequence[BinaryMask], noise: NoiseModel) -> AcquiredData:
    """
    Simulate the whole acquisition up front.

    Scene-targeted noise corrupts the pixels once and the corrupted scene is
    measured exactly; measurement-targeted noise is added per (t, patch, channel).

    Returns:
        AcquiredData: m×n sensing vectors and, per channel, an m×P array of
        measurements (row t-1 holds time t)
    """
    _check_inputs(scene, grid, dictionary, masks)
    if noise.target == NoiseTarget.SCENE and not noise.is_noiseless:
        observed = ImagePlane(add_scene_noise(scene.pixels, noise.sigma, noise.seed), scene.peak)
        measurement_model = NoiseModel(sigma=0.0, seed=noise.seed, target=NoiseTarget.MEASUREMENT)
    else:
        observed = scene
        measurement_model = noise

    vectors = np.array([sensing_vector(mask.flat, dictionary) for mask in masks])
    measurements = []
    for channel in range(scene.channels):
        patches = extract_patches(observed, grid, channel)
        measurements.append(np.array([
            measure_patches(patches, mask, measurement_model, t, channel)
            for t, mask in enumerate(masks, start=1)
        ]))
    return AcquiredData(sensing_vectors=vectors, measurements=measurements, observed_scene=observed)


def snapshot_steps_for(percentages: Iterable[float], patch_dim: int, m: int) -> List[int]:
    """
    Measurement counts t = ⌈pct·n/100⌉ for each percentage, clipped to [1, m].

    Percentages are relative to the patch dimension n, so 100% is n measurements.
    """
    steps = set()
    for pct in percentages:
        if not math.isfinite(pct) or pct <= 0:
            raise ValueError(f"snapshot percentage must be positive, got {pct}")
        steps.add(min(max(int(math.ceil(pct * patch_dim / 100.0 - 1e-9)), 1), m))
    return sorted(steps)


def evaluation_points(m: int, eval_stride: int, snapshot_steps: Iterable[int], stop: StopRule) -> List[int]:
    if eval_stride < 1:
        raise ValueError(f"eval_stride must be at least 1, got {eval_stride}")
    points = set(range(eval_stride, m + 1, eval_stride))
    points.update(t for t in snapshot_steps if 1 <= t <= m)
    if stop.mode == StopMode.FIXED_COUNT:
        points.add(min(max(int(math.ceil(stop.threshold)), 1), m))
    points.add(m)
    return sorted(points)


def _advance(unit: PatchUnit, data: AcquiredData, start: int, end: int, params: OrlsParams) -> Tuple[int, int]:
    """Apply measurements start..end to one unit; returns (CG iterations, non-converged steps)."""
    values = data.measurements[unit.channel][:, unit.patch]
    state = unit.state
    for t in range(start, end + 1):
        state = orls_step(state, MeasurementEvent(a=data.sensing_vectors[t - 1], y=values[t - 1], t=t), params)
    unit.state = state
    steps = end - start + 1
    iterations = sum(state.cg_iterations_history[-steps:])
    failures = sum(1 for converged in state.converged_history[-steps:] if not converged)
    return iterations, failures


def _assemble(coefficients: np.ndarray, grid: PatchGrid, dictionary: Dictionary, peak: float) -> ImagePlane:
    """Image from a (channels, P, n) coefficient stack."""
    planes = [assemble_patches(dictionary.synthesize(channel), grid, peak) for channel in coefficients]
    return ImagePlane.from_channels(planes, peak)


def _relative_change(current: np.ndarray, previous: np.ndarray) -> float:
    return float(np.linalg.norm(current - previous) / max(float(np.linalg.norm(previous)), RESIDUAL_FLOOR))


def _run_units(executor: Optional[ThreadPoolExecutor], fn, units: Sequence) -> list:
    if executor is None:
        return [fn(unit) for unit in units]
    return list(executor.map(fn, units))


def reconstruct_online(scene: ImagePlane,
                       grid: PatchGrid,
                       dictionary: Dictionary,
                       masks: Sequence[BinaryMask],
                       noise: NoiseModel,
                       params: OrlsParams,
                       stop: StopRule,
                       eval_stride: int = 1,
                       threads: int = 1,
                       snapshot_steps: Iterable[int] = (),
                       on_snapshot: Optional[SnapshotCallback] = None) -> Tuple[ImagePlane, MetricsTrajectory]:
    """
    Progressive per-patch ORLS reconstruction of a scene.

    Args:
        scene (ImagePlane): Clean reference scene, also the metric reference
        grid (PatchGrid): Patch tiling consistent with the scene
        dictionary (Dictionary): Sparsifying basis for one patch
        masks: Mask sequence, mask t-1 is shown at time t
        noise (NoiseModel): Noise level, seed and injection point
        params (OrlsParams): Solver parameters
        stop (StopRule): Acquisition stop rule
        eval_stride (int): Evaluate every ``eval_stride`` measurements
        threads (int): Worker threads for patch updates
        snapshot_steps: Measurement counts at which ``on_snapshot`` receives the image
        on_snapshot (Callable, optional): Called with (t, image)

    Returns:
        Tuple[ImagePlane, MetricsTrajectory]: Reconstruction at the stop point
        and the trajectory of every evaluation point
    """
    if threads < 1:
        raise ValueError(f"threads must be at least 1, got {threads}")
    data = acquire(scene, grid, dictionary, masks, noise)
    m = data.count
    n = dictionary.n
    snapshots = {t for t in snapshot_steps if 1 <= t <= m}
    points = evaluation_points(m, eval_stride, snapshots, stop)

    units = [PatchUnit(channel, patch, orls_init(n, params))
             for channel in range(scene.channels) for patch in range(grid.num_patches)]
    trajectory = MetricsTrajectory(patch_dim=n)
    changes: List[float] = []
    previous = np.zeros((scene.channels, grid.num_patches, n))
    image = _assemble(previous, grid, dictionary, scene.peak)
    logger.info("Reconstructing %dx%d scene: %d units, %d masks, %d evaluation points, %d thread(s)",
                scene.width, scene.height, len(units), m, len(points), threads)

    executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        done = 0
        for point in points:
            start = done + 1
            counts = _run_units(executor, lambda unit: _advance(unit, data, start, point, params), units)
            done = point
            cg_total = sum(iterations for iterations, _ in counts)
            trajectory.nonconverged_steps += sum(failures for _, failures in counts)

            current = np.array([unit.state.x for unit in units]).reshape(scene.channels, grid.num_patches, n)
            image = _assemble(current, grid, dictionary, scene.peak)
            changes.append(_relative_change(current, previous))
            previous = current
            trajectory.append(MetricsRecord(
                t=point,
                pct_measurements=100.0 * point / n,
                psnr_db=psnr(scene, image),
                ssim=ssim(scene, image),
                cg_iters_total=cg_total,
                cg_iters_per_patch=cg_total / len(units),
            ))
            logger.debug("t=%d psnr=%.3f ssim=%.4f cg=%d", point, trajectory.last.psnr_db,
                         trajectory.last.ssim, cg_total)
            if on_snapshot is not None and point in snapshots:
                on_snapshot(point, image)
            if should_stop(stop, trajectory, changes):
                logger.info("Stop rule %s met at t=%d", stop.mode.value, point)
                break
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    if trajectory.nonconverged_steps:
        logger.warning("%d patch steps ended without CG convergence", trajectory.nonconverged_steps)
    return image, trajectory


def reconstruct_batch(scene: ImagePlane,
                      grid: PatchGrid,
                      dictionary: Dictionary,
                      masks: Sequence[BinaryMask],
                      noise: NoiseModel,
                      params: OrlsParams,
                      n_outer: int = IRLS_DEFAULT_OUTER,
                      threads: int = 1,
                      solver: str = "irls") -> ImagePlane:
    """
    Reconstruct every patch from the full measurement set in one batch solve.

    ``solver`` is ``irls`` (the batch counterpart of ORLS) or
    ``least_squares`` (unregularized baseline). The acquired data is the same
    as `reconstruct_online` sees for identical arguments.
    """
    if solver not in BATCH_SOLVERS:
        raise ValueError(f"Unknown batch solver {solver!r}, expected one of {BATCH_SOLVERS}")
    if threads < 1:
        raise ValueError(f"threads must be at least 1, got {threads}")
    data = acquire(scene, grid, dictionary, masks, noise)
    n = dictionary.n
    units = [(channel, patch) for channel in range(scene.channels) for patch in range(grid.num_patches)]

    def solve(unit):
        channel, patch = unit
        values = data.measurements[channel][:, patch]
        if solver == "irls":
            return irls_batch(data.sensing_vectors, values, n, params, n_outer=n_outer)
        return least_squares_solve(data.sensing_vectors, values, n)

    logger.info("Batch %s over %d units with %d measurements each", solver, len(units), data.count)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            solutions = list(executor.map(solve, units))
    else:
        solutions = [solve(unit) for unit in units]
    coefficients = np.array(solutions).reshape(scene.channels, grid.num_patches, n)
    return _assemble(coefficients, grid, dictionary, scene.peak)
