"""Figure descriptions: which diagnostic to read and how to lay it out."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

KINDS = ("timeseries", "histogram", "concentration")
SCALES = ("linear", "log")
GROUP_KEYS = ("L", "q", "theta")
TIME_RESCALES = ("none", "L^2")
FORMATS = ("svg",)


class SpecError(ValueError):
    """A figure description is malformed."""


@dataclass
class PanelSpec:
    xscale: str = "linear"
    yscale: str = "linear"
    time_rescale: str = "none"

    def validate(self, where: str) -> None:
        if self.xscale not in SCALES:
            raise SpecError(f"'{where}.xscale' must be one of {SCALES}")
        if self.yscale not in SCALES:
            raise SpecError(f"'{where}.yscale' must be one of {SCALES}")
        if self.time_rescale not in TIME_RESCALES:
            raise SpecError(f"'{where}.time_rescale' must be one of {TIME_RESCALES}")


@dataclass
class FigureSpec:
    """Declarative description of one figure built from one CSV file."""

    figure_id: str
    kind: str
    diagnostic: str  # CSV stem: <diagnostic>.csv inside the data directory
    group_by: tuple = ("L",)
    main: PanelSpec = field(default_factory=PanelSpec)
    inset: bool = False  # log-log late-time scatter vs dimension with a fit
    format: str = "svg"

    def __post_init__(self):
        if not self.figure_id or not str(self.figure_id).strip():
            raise SpecError("'figure_id' must be a non-empty string")
        if self.kind not in KINDS:
            raise SpecError(f"'kind' must be one of {KINDS}, got {self.kind!r}")
        if not self.diagnostic or "/" in str(self.diagnostic):
            raise SpecError("'diagnostic' must be a bare CSV stem")
        self.group_by = tuple(self.group_by)
        for key in self.group_by:
            if key not in GROUP_KEYS:
                raise SpecError(f"'group_by' entries must be among {GROUP_KEYS}")
        if isinstance(self.main, dict):
            self.main = PanelSpec(**self.main)
        self.main.validate("main")
        if self.format not in FORMATS:
            raise SpecError(f"'format' must be one of {FORMATS}")

    @classmethod
    def from_dict(cls, raw: dict) -> "FigureSpec":
        if not isinstance(raw, dict):
            raise SpecError("figure description must be a mapping")
        known = {"figure_id", "kind", "diagnostic", "group_by", "main", "inset", "format"}
        unknown = set(raw) - known
        if unknown:
            raise SpecError(f"unknown keys: {sorted(unknown)}")
        missing = {"figure_id", "kind", "diagnostic"} - set(raw)
        if missing:
            raise SpecError(f"missing keys: {sorted(missing)}")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise SpecError(str(exc)) from exc

    @classmethod
    def from_yaml(cls, path) -> list["FigureSpec"]:
        """A spec file holds one figure mapping or a list of them."""
        path = Path(path)
        if not path.exists():
            raise SpecError(f"spec file not found: {path}")
        try:
            raw = yaml.safe_load(path.read_text())
        except yaml.YAMLError as exc:
            raise SpecError(f"cannot parse spec file: {exc}") from exc
        items = raw if isinstance(raw, list) else [raw]
        return [cls.from_dict(item) for item in items]
