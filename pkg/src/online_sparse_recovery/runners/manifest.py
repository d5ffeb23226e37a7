"""
Run manifests: every setting a reconstruction needs, stored as flat
``key=value`` lines next to the run's outputs.
"""
from pathlib import Path
from typing import Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, PositiveInt, ValidationError, field_validator

from online_sparse_recovery import __version__
from online_sparse_recovery.config import DEFAULT_CG_EPS, DEFAULT_DELTA, DEFAULT_LAMBDA, DEFAULT_PATCH_SIDE
from online_sparse_recovery.errors import DataFormatError
from online_sparse_recovery.imaging.pipeline import DEFAULT_SNAPSHOT_PERCENTAGES
from online_sparse_recovery.imaging.stopping import StopMode, StopRule
from online_sparse_recovery.sensing.measurement import NoiseTarget
from online_sparse_recovery.sensing.random_streams import MAX_SEED
from online_sparse_recovery.solvers.sparse_solvers import IRLS_DEFAULT_OUTER, OrlsParams


MANIFEST_FILENAME = "manifest.txt"
FULL_RUN = "full"


class RunManifest(BaseModel):
    """
    Settings of one `reconstruct` or `batch` run.

    Field order is the line order of the serialized file. ``lambda`` is
    written under its own name; in Python it is ``lam``.
    """
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    command: Literal["reconstruct", "batch"] = "reconstruct"
    scene: str
    masks: str
    mask_seed: int = Field(default=0, ge=0, le=MAX_SEED)
    mask_side: PositiveInt = DEFAULT_PATCH_SIDE
    mask_count: PositiveInt = 64
    sigma: float = Field(default=0.0, ge=0, allow_inf_nan=False)
    scene_psnr: Optional[float] = Field(default=None, allow_inf_nan=False)
    noise_seed: int = Field(default=0, ge=0, le=MAX_SEED)
    noise_target: NoiseTarget = NoiseTarget.SCENE
    lam: float = Field(default=DEFAULT_LAMBDA, gt=0, allow_inf_nan=False, alias="lambda")
    delta: float = Field(default=DEFAULT_DELTA, gt=0, allow_inf_nan=False)
    cg_eps: float = Field(default=DEFAULT_CG_EPS, gt=0, allow_inf_nan=False)
    cg_max_iter: Optional[PositiveInt] = None
    warm_start: bool = True
    patch_side: PositiveInt = DEFAULT_PATCH_SIDE
    stop: str = FULL_RUN
    eval_stride: PositiveInt = 1
    snapshots: Tuple[float, ...] = DEFAULT_SNAPSHOT_PERCENTAGES
    n_outer: PositiveInt = IRLS_DEFAULT_OUTER
    solver: Literal["irls", "least_squares"] = "irls"
    crop: bool = False
    out_dir: str = "."
    tool_version: str = __version__

    @field_validator("snapshots", mode="before")
    @classmethod
    def split_snapshots(cls, value):
        if value is None:
            return ()
        if isinstance(value, str):
            return tuple(float(part) for part in value.split(",") if part.strip())
        return value

    @field_validator("stop")
    @classmethod
    def check_stop(cls, value: str) -> str:
        value = value.strip()
        if value != FULL_RUN:
            StopRule.parse(value)
        return value

    def stop_rule(self, mask_count: int) -> StopRule:
        """The parsed stop rule; ``full`` absorbs every mask."""
        if self.stop == FULL_RUN:
            return StopRule(mode=StopMode.FIXED_COUNT, threshold=mask_count)
        return StopRule.parse(self.stop)

    def solver_params(self) -> OrlsParams:
        return OrlsParams(lam=self.lam, delta=self.delta, cg_eps=self.cg_eps,
                          cg_max_iter=self.cg_max_iter, warm_start=self.warm_start)

    def to_text(self) -> str:
        lines = []
        for key, value in self.model_dump(by_alias=True, mode="json").items():
            lines.append(f"{key}={_format_value(value)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunManifest":
        """
        Parse manifest text; empty values mean "unset".

        Raises:
            DataFormatError: For malformed lines, unknown or duplicate keys, or invalid values
        """
        known = {field.alias or name for name, field in cls.model_fields.items()}
        values = {}
        for number, line in enumerate(text.splitlines(), start=1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            key, separator, value = line.partition("=")
            key = key.strip()
            if not separator:
                raise DataFormatError(f"manifest line {number} is not key=value: {line!r}")
            if key not in known:
                raise DataFormatError(f"unknown manifest key {key!r} on line {number}")
            if key in values:
                raise DataFormatError(f"duplicate manifest key {key!r} on line {number}")
            value = value.strip()
            values[key] = value if value else None
        values = {key: value for key, value in values.items() if value is not None or key in NULLABLE_KEYS}
        try:
            return cls.model_validate(values)
        except ValidationError as e:
            raise DataFormatError(f"invalid manifest: {e}") from e

    def write(self, out_dir: Union[str, Path]) -> Path:
        path = Path(out_dir) / MANIFEST_FILENAME
        path.write_text(self.to_text(), encoding="utf-8")
        return path

    @classmethod
    def read(cls, path: Union[str, Path]) -> "RunManifest":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


NULLABLE_KEYS = {"scene_psnr", "cg_max_iter", "snapshots"}


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return ",".join(_format_value(item) for item in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)
