import csv

import numpy as np
import pytest

from online_sparse_recovery import __version__
from online_sparse_recovery.errors import DataFormatError, DimensionMismatchError, NotPositiveDefiniteError
from online_sparse_recovery.imaging.image_io import write_image
from online_sparse_recovery.imaging.image_plane import ImagePlane
from online_sparse_recovery.runners.cli import exit_code_for, main


def write_scene(path, height=16, width=16, offset=0.0):
    rows, cols = np.mgrid[0:height, 0:width].astype(float)
    pixels = np.rint(np.clip(100.0 + offset + 60.0 * np.sin(rows / 5.0) * np.cos(cols / 4.0), 0.0, 255.0))
    return write_image(path, ImagePlane(pixels))


def trajectory_rows(path):
    with open(path, newline="") as handle:
        return list(csv.DictReader(handle))


@pytest.fixture
def masks_file(tmp_path):
    path = tmp_path / "masks.txt"
    assert main(["masks", "--side", "8", "--count", "16", "--seed", "7", "--out", str(path)]) == 0
    return path


@pytest.fixture
def scene_file(tmp_path):
    return write_scene(tmp_path / "scene.pgm")


class TestMasksCommand:
    """Test `orls masks`."""

    def test_writes_mask_file(self, tmp_path):
        """Test 64 masks of 64 bits plus the header."""
        path = tmp_path / "masks.txt"
        assert main(["masks", "--side", "8", "--count", "64", "--seed", "7", "--out", str(path)]) == 0
        lines = path.read_text().splitlines()
        assert lines[0] == "side=8 count=64 seed=7"
        assert len(lines) == 65

    def test_deterministic(self, tmp_path):
        """Test that the same flags give byte-identical files."""
        for name in ("a.txt", "b.txt"):
            main(["masks", "--count", "8", "--seed", "1", "--out", str(tmp_path / name)])
        assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()

    def test_zero_count_is_usage_error(self, tmp_path):
        """Test that --count 0 exits with status 1."""
        with pytest.raises(SystemExit) as exc_info:
            main(["masks", "--count", "0", "--seed", "1", "--out", str(tmp_path / "m.txt")])
        assert exc_info.value.code == 1

    def test_unwritable_path(self, tmp_path):
        """Test that a missing output directory exits nonzero."""
        with pytest.raises(SystemExit) as exc_info:
            main(["masks", "--count", "2", "--seed", "1", "--out", str(tmp_path / "missing" / "m.txt")])
        assert exc_info.value.code == 2


class TestReconstructCommand:
    """Test `orls reconstruct` and `orls replay`."""

    def test_full_run(self, scene_file, masks_file, tmp_path, capsys):
        """Test one CSV row per measurement at stride 1 and the printed metrics."""
        out_dir = tmp_path / "run"
        assert main(["reconstruct", "--scene", str(scene_file), "--masks", str(masks_file),
                     "--lambda", "1", "--out-dir", str(out_dir)]) == 0
        rows = trajectory_rows(out_dir / "trajectory.csv")
        assert [int(row["t"]) for row in rows] == list(range(1, 17))
        assert all(np.isfinite(float(row["psnr_db"])) for row in rows)
        assert "psnr_db:" in capsys.readouterr().out

    def test_fixed_stop(self, scene_file, masks_file, tmp_path):
        """Test that --stop fixed:8 ends the CSV at t = 8."""
        out_dir = tmp_path / "run"
        main(["reconstruct", "--scene", str(scene_file), "--masks", str(masks_file), "--stop", "fixed:8",
              "--out-dir", str(out_dir)])
        assert trajectory_rows(out_dir / "trajectory.csv")[-1]["t"] == "8"

    def test_missing_masks_file(self, scene_file, tmp_path):
        """Test that a missing mask file exits nonzero."""
        with pytest.raises(SystemExit) as exc_info:
            main(["reconstruct", "--scene", str(scene_file), "--masks", str(tmp_path / "none.txt"),
                  "--out-dir", str(tmp_path / "run")])
        assert exc_info.value.code != 0

    def test_non_divisible_scene_is_data_error(self, masks_file, tmp_path, capsys):
        """Test exit status 2 and a crop hint for a 12×16 scene with 8×8 patches."""
        scene = write_scene(tmp_path / "odd.pgm", height=12)
        with pytest.raises(SystemExit) as exc_info:
            main(["reconstruct", "--scene", str(scene), "--masks", str(masks_file), "--out-dir", str(tmp_path / "r")])
        assert exc_info.value.code == 2
        assert "crop" in capsys.readouterr().err

    def test_sigma_and_scene_psnr_conflict(self, scene_file, masks_file, tmp_path):
        """Test that both noise flags together are a usage error."""
        with pytest.raises(SystemExit) as exc_info:
            main(["reconstruct", "--scene", str(scene_file), "--masks", str(masks_file), "--sigma", "1",
                  "--scene-psnr", "22", "--out-dir", str(tmp_path / "r")])
        assert exc_info.value.code == 1

    def test_bad_stop_rule(self, scene_file, masks_file, tmp_path):
        """Test that an unknown stop rule is a usage error."""
        with pytest.raises(SystemExit) as exc_info:
            main(["reconstruct", "--scene", str(scene_file), "--masks", str(masks_file), "--stop", "soon",
                  "--out-dir", str(tmp_path / "r")])
        assert exc_info.value.code == 1

    def test_negative_lambda_is_usage_error(self, scene_file, masks_file, tmp_path):
        """Test that parameter validation failures exit with status 1."""
        with pytest.raises(SystemExit) as exc_info:
            main(["reconstruct", "--scene", str(scene_file), "--masks", str(masks_file), "--lambda", "-1",
                  "--out-dir", str(tmp_path / "r")])
        assert exc_info.value.code == 1

    def test_replay_with_more_threads_is_byte_identical(self, scene_file, masks_file, tmp_path):
        """Test that a manifest replayed on 4 workers reproduces the outputs."""
        first = tmp_path / "first"
        second = tmp_path / "second"
        main(["reconstruct", "--scene", str(scene_file), "--masks", str(masks_file), "--sigma", "8",
              "--noise-seed", "5", "--threads", "1", "--out-dir", str(first)])
        assert main(["replay", str(first / "manifest.txt"), "--out-dir", str(second), "--threads", "4"]) == 0
        for name in ["reconstruction.pgm", "trajectory.csv", "cg_profile.csv", "snapshot_100.pgm"]:
            assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_replay_rejects_redrawn_masks(self, scene_file, masks_file, tmp_path):
        """Test that replay refuses a mask file rewritten with another seed."""
        first = tmp_path / "first"
        main(["reconstruct", "--scene", str(scene_file), "--masks", str(masks_file), "--stop", "fixed:4",
              "--out-dir", str(first)])
        main(["masks", "--side", "8", "--count", "16", "--seed", "8", "--out", str(masks_file)])
        with pytest.raises(SystemExit) as exc_info:
            main(["replay", str(first / "manifest.txt"), "--out-dir", str(tmp_path / "second")])
        assert exc_info.value.code == 2


class TestBatchCommand:
    """Test `orls batch`."""

    def test_deterministic_rerun(self, scene_file, masks_file, tmp_path):
        """Test identical image bytes for two runs."""
        for name in ("a", "b"):
            assert main(["batch", "--scene", str(scene_file), "--masks", str(masks_file), "--outer", "5",
                         "--out-dir", str(tmp_path / name)]) == 0
        assert (tmp_path / "a" / "reconstruction.pgm").read_bytes() == (tmp_path / "b" / "reconstruction.pgm").read_bytes()

    def test_zero_outer_is_usage_error(self, scene_file, masks_file, tmp_path):
        """Test that --outer 0 is rejected."""
        with pytest.raises(SystemExit) as exc_info:
            main(["batch", "--scene", str(scene_file), "--masks", str(masks_file), "--outer", "0",
                  "--out-dir", str(tmp_path / "r")])
        assert exc_info.value.code == 1


class TestMetricsCommand:
    """Test `orls metrics`."""

    def test_identical_files(self, scene_file, capsys):
        """Test `inf,1.0` for identical images."""
        assert main(["metrics", "--reference", str(scene_file), "--test", str(scene_file)]) == 0
        assert capsys.readouterr().out.strip() == "inf,1.0"

    def test_constant_offset(self, tmp_path, capsys):
        """Test the hand-computed PSNR of a constant offset of 5."""
        reference = write_image(tmp_path / "r.pgm", ImagePlane(np.full((8, 8), 100.0)))
        test = write_image(tmp_path / "t.pgm", ImagePlane(np.full((8, 8), 105.0)))
        main(["metrics", "--reference", str(reference), "--test", str(test)])
        psnr_text, _ = capsys.readouterr().out.strip().split(",")
        assert float(psnr_text) == pytest.approx(10 * np.log10(255.0 ** 2 / 25.0))

    def test_mismatched_sizes(self, scene_file, tmp_path):
        """Test that different sizes exit with status 2."""
        other = write_scene(tmp_path / "small.pgm", height=8, width=8)
        with pytest.raises(SystemExit) as exc_info:
            main(["metrics", "--reference", str(scene_file), "--test", str(other)])
        assert exc_info.value.code == 2


class TestExitCodes:
    """Test the exception to exit status mapping."""

    def test_mapping(self):
        """Test data, numerical and usage categories."""
        assert exit_code_for(DataFormatError("bad")) == 2
        assert exit_code_for(DimensionMismatchError("bad")) == 2
        assert exit_code_for(NotPositiveDefiniteError("bad")) == 3
        assert exit_code_for(ValueError("bad")) == 1
        assert exit_code_for(FileNotFoundError("missing")) == 2

    def test_version(self, capsys):
        """Test that --version prints the package version and succeeds."""
        assert main(["--version"]) == 0
        assert __version__ in capsys.readouterr().out
