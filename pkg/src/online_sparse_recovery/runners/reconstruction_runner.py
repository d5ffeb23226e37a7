import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from online_sparse_recovery.errors import DataFormatError
from online_sparse_recovery.imaging.image_io import image_suffix, read_image, write_image
from online_sparse_recovery.imaging.image_plane import ImagePlane, PatchGrid, crop_to_multiple
from online_sparse_recovery.imaging.metrics import psnr, ssim, write_cg_profile_csv, write_trajectory_csv
from online_sparse_recovery.imaging.pipeline import reconstruct_batch, reconstruct_online, snapshot_steps_for
from online_sparse_recovery.runners.manifest import RunManifest
from online_sparse_recovery.sensing.dictionary import dct2d_dictionary
from online_sparse_recovery.sensing.masks import MaskSet, generate_masks, read_mask_file
from online_sparse_recovery.sensing.measurement import NoiseModel, NoiseTarget, add_scene_noise, sigma_for_target_psnr


logger = logging.getLogger(__name__)


class ReconstructionRunner:
    """
    Executes a `RunManifest` and writes its outputs.

    Outputs in ``out_dir``: ``reconstruction.pgm|ppm``, ``manifest.txt`` and,
    for online runs, ``trajectory.csv``, ``cg_profile.csv`` and
    ``snapshot_<pct>.pgm|ppm`` files.
    """

    def __init__(self, threads: int = 1):
        if threads < 1:
            raise ValueError(f"threads must be at least 1, got {threads}")
        self.threads = threads

    def load_inputs(self, manifest: RunManifest):
        """
        Read the scene and masks named by the manifest.

        Returns:
            Tuple[ImagePlane, MaskSet]: Scene (cropped when requested) and masks

        Raises:
            DataFormatError: If the mask file is not the one recorded in the
                manifest, the mask side differs from the patch side or the
                scene is not divisible into patches
        """
        scene = read_image(manifest.scene)
        mask_set = read_mask_file(manifest.masks)
        self.check_mask_provenance(manifest, mask_set)
        if mask_set.side != manifest.patch_side:
            raise DataFormatError(f"masks have side {mask_set.side} but patch side is {manifest.patch_side}")
        if manifest.crop:
            scene = crop_to_multiple(scene, manifest.patch_side)
        return scene, mask_set

    def check_mask_provenance(self, manifest: RunManifest, mask_set: MaskSet) -> None:
        """
        Require the mask file to be the draw recorded by ``mask_seed``,
        ``mask_side`` and ``mask_count``, header and bits alike.

        Raises:
            DataFormatError: On any disagreement
        """
        recorded = (manifest.mask_seed, manifest.mask_side, manifest.mask_count)
        found = (mask_set.seed, mask_set.side, mask_set.count)
        if found != recorded:
            raise DataFormatError(f"{manifest.masks} holds masks (seed, side, count) = {found}, "
                                  f"manifest records {recorded}")
        expected = generate_masks(manifest.mask_side, manifest.mask_count, manifest.mask_seed)
        for index, (mask, reference) in enumerate(zip(mask_set.masks, expected.masks)):
            if not np.array_equal(mask.bits, reference.bits):
                raise DataFormatError(f"mask {index} in {manifest.masks} is not the draw of seed {manifest.mask_seed}")

    def noise_model(self, manifest: RunManifest, scene: ImagePlane) -> NoiseModel:
        sigma = manifest.sigma
        if manifest.scene_psnr is not None:
            sigma = sigma_for_target_psnr(manifest.scene_psnr, scene.peak)
        return NoiseModel(sigma=sigma, seed=manifest.noise_seed, target=manifest.noise_target)

    def observed_scene_psnr(self, scene: ImagePlane, noise: NoiseModel) -> Optional[float]:
        """PSNR of the noise-corrupted scene, when noise enters the scene."""
        if noise.is_noiseless or noise.target != NoiseTarget.SCENE:
            return None
        noisy = ImagePlane(add_scene_noise(scene.pixels, noise.sigma, noise.seed), scene.peak)
        return psnr(scene, noisy)

    def run(self, manifest: RunManifest) -> Dict[str, Any]:
        """
        Run the manifest's command.

        Args:
            manifest (RunManifest): Complete run settings

        Returns:
            Dict[str, Any]: Final metrics, noise summary and written paths
        """
        scene, mask_set = self.load_inputs(manifest)
        grid = PatchGrid.for_image(scene, manifest.patch_side)
        dictionary = dct2d_dictionary(manifest.patch_side)
        noise = self.noise_model(manifest, scene)
        out_dir = Path(manifest.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

        if manifest.command == "batch":
            result = self._run_batch(manifest, scene, grid, dictionary, mask_set, noise, out_dir)
        else:
            result = self._run_online(manifest, scene, grid, dictionary, mask_set, noise, out_dir)

        result["noisy_scene_psnr_db"] = self.observed_scene_psnr(scene, noise)
        result["sigma"] = noise.sigma
        result["manifest"] = manifest.write(out_dir)
        logger.info("Run finished: psnr=%.3f dB ssim=%.4f", result["psnr_db"], result["ssim"])
        return result

    def _run_online(self, manifest, scene, grid, dictionary, mask_set: MaskSet, noise, out_dir: Path) -> Dict[str, Any]:
        suffix = image_suffix(scene)
        labels: Dict[int, List[float]] = {}
        for pct in manifest.snapshots:
            step = snapshot_steps_for([pct], dictionary.n, mask_set.count)[0]
            labels.setdefault(step, []).append(pct)
        snapshot_paths = []

        def save_snapshot(t: int, image: ImagePlane) -> None:
            for pct in labels.get(t, []):
                snapshot_paths.append(write_image(out_dir / f"snapshot_{int(round(pct)):03d}{suffix}", image))

        image, trajectory = reconstruct_online(
            scene, grid, dictionary, mask_set.masks, noise, manifest.solver_params(),
            manifest.stop_rule(mask_set.count),
            eval_stride=manifest.eval_stride,
            threads=self.threads,
            snapshot_steps=sorted(labels),
            on_snapshot=save_snapshot,
        )
        last = trajectory.last
        return {
            "command": "reconstruct",
            "t": last.t,
            "psnr_db": last.psnr_db,
            "ssim": last.ssim,
            "nonconverged_steps": trajectory.nonconverged_steps,
            "reconstruction": write_image(out_dir / f"reconstruction{suffix}", image),
            "trajectory": write_trajectory_csv(trajectory, out_dir / "trajectory.csv"),
            "cg_profile": write_cg_profile_csv(trajectory, out_dir / "cg_profile.csv"),
            "snapshots": snapshot_paths,
        }

    def _run_batch(self, manifest, scene, grid, dictionary, mask_set: MaskSet, noise, out_dir: Path) -> Dict[str, Any]:
        image = reconstruct_batch(scene, grid, dictionary, mask_set.masks, noise, manifest.solver_params(),
                                  n_outer=manifest.n_outer, threads=self.threads, solver=manifest.solver)
        return {
            "command": "batch",
            "t": mask_set.count,
            "psnr_db": psnr(scene, image),
            "ssim": ssim(scene, image),
            "nonconverged_steps": 0,
            "reconstruction": write_image(out_dir / f"reconstruction{image_suffix(image)}", image),
        }
