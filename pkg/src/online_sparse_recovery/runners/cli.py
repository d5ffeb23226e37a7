"""
Command-line interface: ``orls masks | reconstruct | batch | metrics | replay``.

Exit codes: 0 success, 1 usage error, 2 data or format error, 3 numerical failure.
"""
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import click
from pydantic import ValidationError

from online_sparse_recovery import __version__
from online_sparse_recovery.config import (
    default_cg_eps,
    default_delta,
    default_lambda,
    default_log_level,
    default_patch_side,
    default_threads,
)
from online_sparse_recovery.errors import OrlsError
from online_sparse_recovery.imaging.image_io import read_image
from online_sparse_recovery.imaging.metrics import format_metric, psnr, ssim
from online_sparse_recovery.imaging.stopping import StopRule
from online_sparse_recovery.runners.manifest import FULL_RUN, RunManifest
from online_sparse_recovery.runners.reconstruction_runner import ReconstructionRunner
from online_sparse_recovery.sensing.masks import generate_masks, read_mask_file, write_mask_file
from online_sparse_recovery.sensing.measurement import NoiseTarget


logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


def parse_snapshots(ctx, param, value: str):
    if value is None or value.strip().lower() in ("", "none"):
        return ()
    try:
        return tuple(float(part) for part in value.split(",") if part.strip())
    except ValueError:
        raise click.BadParameter(f"expected comma-separated percentages, got {value!r}")


def validate_stop(ctx, param, value: str) -> str:
    if value.strip() == FULL_RUN:
        return FULL_RUN
    try:
        StopRule.parse(value)
    except ValueError as e:
        raise click.BadParameter(str(e))
    return value.strip()


def report_run(result: dict) -> None:
    if result.get("noisy_scene_psnr_db") is not None:
        click.echo(f"noisy scene psnr_db: {format_metric(result['noisy_scene_psnr_db'])}")
    click.echo(f"t: {result['t']}")
    click.echo(f"psnr_db: {format_metric(result['psnr_db'])}")
    click.echo(f"ssim: {format_metric(result['ssim'])}")
    click.echo(f"output: {result['reconstruction']}")
    if result.get("nonconverged_steps"):
        click.echo(f"Warning: {result['nonconverged_steps']} patch steps ended without CG convergence", err=True)


def execute(manifest: RunManifest, threads: int) -> dict:
    result = ReconstructionRunner(threads=threads).run(manifest)
    report_run(result)
    return result


def manifest_settings(scene, masks, lam, delta, sigma, scene_psnr, noise_seed, noise_target,
                      patch_side, cg_eps, crop, out_dir) -> dict:
    if sigma is not None and scene_psnr is not None:
        raise click.UsageError("--sigma and --scene-psnr are mutually exclusive")
    mask_set = read_mask_file(masks)
    settings = {
        "scene": str(scene),
        "masks": str(masks),
        "mask_seed": mask_set.seed,
        "mask_side": mask_set.side,
        "mask_count": mask_set.count,
        "sigma": sigma or 0.0,
        "scene_psnr": scene_psnr,
        "noise_seed": noise_seed,
        "noise_target": NoiseTarget(noise_target),
        "patch_side": patch_side if patch_side is not None else mask_set.side,
        "crop": crop,
        "out_dir": str(out_dir),
    }
    settings["lambda"] = lam if lam is not None else default_lambda()
    settings["delta"] = delta if delta is not None else default_delta()
    settings["cg_eps"] = cg_eps if cg_eps is not None else default_cg_eps()
    return settings


def shared_run_options(command):
    options = [
        click.option("--scene", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path),
                     help="Binary PGM/PPM scene"),
        click.option("--masks", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path),
                     help="Mask file written by `orls masks`"),
        click.option("--lambda", "lam", type=float, default=None, help="Regularization weight (ORLS_LAMBDA, 1.0)"),
        click.option("--delta", type=float, default=None, help="Reweighting floor (ORLS_DELTA, 1e-6)"),
        click.option("--sigma", type=float, default=None, help="Noise standard deviation in intensity units"),
        click.option("--scene-psnr", type=float, default=None, help="Derive sigma from a target noisy-scene PSNR"),
        click.option("--noise-seed", type=click.IntRange(min=0), default=0, show_default=True),
        click.option("--noise-target", type=click.Choice([t.value for t in NoiseTarget]), default="scene",
                     show_default=True),
        click.option("--patch-side", type=click.IntRange(min=1), default=None,
                     help="Patch side; defaults to the mask side"),
        click.option("--cg-eps", type=float, default=None, help="CG relative tolerance (ORLS_CG_EPS, 1e-5)"),
        click.option("--crop", is_flag=True, help="Crop the scene to a multiple of the patch side"),
        click.option("--out-dir", required=True, type=click.Path(file_okay=False, path_type=Path)),
        click.option("--threads", type=click.IntRange(min=1), default=None, help="Patch workers (ORLS_THREADS, 1)"),
    ]
    for option in reversed(options):
        command = option(command)
    return command


@click.group()
@click.version_option(__version__, prog_name="orls")
@click.option("--log-level", type=click.Choice(LOG_LEVELS, case_sensitive=False), default=None,
              help="Logging level (ORLS_LOG_LEVEL, WARNING)")
def cli(log_level: Optional[str]):
    """Online reweighted least squares for simulated compressive imaging."""
    level = (log_level or default_log_level()).upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format=LOG_FORMAT, stream=sys.stderr)


@cli.command()
@click.option("--side", type=click.IntRange(min=1), default=None, help="Mask side (ORLS_PATCH_SIDE, 8)")
@click.option("--count", type=click.IntRange(min=1), required=True, help="Number of masks")
@click.option("--seed", type=click.IntRange(min=0, max=2 ** 64 - 1), required=True, help="Mask stream seed")
@click.option("--out", required=True, type=click.Path(dir_okay=False, path_type=Path))
def masks(side, count, seed, out):
    """Generate a reproducible random binary mask file."""
    mask_set = generate_masks(side if side is not None else default_patch_side(), count, seed)
    write_mask_file(out, mask_set)
    click.echo(f"Wrote {mask_set.count} masks of side {mask_set.side} to {out}")


@cli.command()
@shared_run_options
@click.option("--stop", default=FULL_RUN, show_default=True, callback=validate_stop,
              help="full, fixed:<count>, plateau:<threshold>[:<patience>] or psnr:<dB>")
@click.option("--eval-stride", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--snapshots", default="25,75,100", show_default=True, callback=parse_snapshots,
              help="Snapshot percentages of the patch dimension, or 'none'")
@click.option("--cg-max-iter", type=click.IntRange(min=1), default=None, help="CG iteration cap (default 4n)")
@click.option("--cold-start", is_flag=True, help="Start CG from zero instead of the previous estimate")
def reconstruct(scene, masks, lam, delta, sigma, scene_psnr, noise_seed, noise_target, patch_side, cg_eps,
                crop, out_dir, threads, stop, eval_stride, snapshots, cg_max_iter, cold_start):
    """Progressive ORLS reconstruction with a PSNR/SSIM trajectory."""
    settings = manifest_settings(scene, masks, lam, delta, sigma, scene_psnr, noise_seed, noise_target,
                                 patch_side, cg_eps, crop, out_dir)
    manifest = RunManifest(command="reconstruct", stop=stop, eval_stride=eval_stride, snapshots=snapshots,
                           cg_max_iter=cg_max_iter, warm_start=not cold_start, **settings)
    execute(manifest, threads if threads is not None else default_threads())


@cli.command()
@shared_run_options
@click.option("--outer", type=click.IntRange(min=1), default=30, show_default=True, help="IRLS outer iterations")
@click.option("--solver", type=click.Choice(["irls", "least_squares"]), default="irls", show_default=True)
def batch(scene, masks, lam, delta, sigma, scene_psnr, noise_seed, noise_target, patch_side, cg_eps,
          crop, out_dir, threads, outer, solver):
    """Batch IRLS (or least-squares) reconstruction from all masks."""
    settings = manifest_settings(scene, masks, lam, delta, sigma, scene_psnr, noise_seed, noise_target,
                                 patch_side, cg_eps, crop, out_dir)
    manifest = RunManifest(command="batch", n_outer=outer, solver=solver, snapshots=(), **settings)
    execute(manifest, threads if threads is not None else default_threads())


@cli.command()
@click.option("--reference", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--test", "test_image", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
def metrics(reference, test_image):
    """Print ``psnr_db,ssim`` of a test image against a reference."""
    reference_image = read_image(reference)
    candidate = read_image(test_image)
    click.echo(f"{format_metric(psnr(reference_image, candidate))},{format_metric(ssim(reference_image, candidate))}")


@cli.command()
@click.argument("manifest_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out-dir", required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option("--threads", type=click.IntRange(min=1), default=None)
def replay(manifest_path, out_dir, threads):
    """Re-run a reconstruction from its manifest into a new output directory."""
    manifest = RunManifest.read(manifest_path).model_copy(update={"out_dir": str(out_dir)})
    execute(manifest, threads if threads is not None else default_threads())


def exit_code_for(error: BaseException) -> int:
    if isinstance(error, click.UsageError):
        return EXIT_USAGE
    if isinstance(error, click.ClickException):
        return error.exit_code if error.exit_code not in (EXIT_OK, EXIT_USAGE) else EXIT_DATA
    if isinstance(error, OrlsError):
        return error.exit_code
    if isinstance(error, (ValidationError, ValueError)):
        return EXIT_USAGE
    if isinstance(error, OSError):
        return EXIT_DATA
    return EXIT_USAGE


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Console entry point; exits with a nonzero status on failure."""
    try:
        code = cli.main(args=list(argv) if argv is not None else None, prog_name="orls", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("Aborted.", err=True)
        sys.exit(EXIT_USAGE)
    except click.ClickException as e:
        e.show()
        sys.exit(exit_code_for(e))
    except (OrlsError, ValueError, OSError) as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(exit_code_for(e))
    if isinstance(code, int) and code != EXIT_OK:
        sys.exit(code)
    return EXIT_OK


if __name__ == "__main__":
    main()
