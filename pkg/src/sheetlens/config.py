"""Analysis configuration: factor weights/limits plus every tunable threshold.

The JSON file is flat; omitted keys keep their defaults::

    {"factors": [{"id": "total_formulas", "weight": 5, "threshold": 1000}],
     "exempt_literals": [0, 1], "blank_ratio_threshold": 0.5}
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .model import Thresholds


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FactorOverride:
    id: str
    weight: int | None = None
    threshold: float | None = None


@dataclass(frozen=True)
class Config:
    factors: tuple[FactorOverride, ...] = ()
    exempt_literals: tuple[float, ...] = (0.0, 1.0)
    exempt_digit_functions: tuple[str, ...] = ("ROUND",)
    blank_ratio_threshold: float = 0.5
    nested_if_depth: int = 2
    range_cap: int = 4096
    description_cell: str = "A1"
    interruption_run: int = 3
    jumble_neighbors: int = 2
    workbook_wide_unique: bool = False
    scale: Thresholds = field(default_factory=Thresholds)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["factors"] = [{k: v for k, v in f.items() if v is not None} for f in d["factors"]]
        d["exempt_literals"] = list(self.exempt_literals)
        d["exempt_digit_functions"] = list(self.exempt_digit_functions)
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> Config:
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        kwargs = dict(doc)
        try:
            if "factors" in kwargs:
                kwargs["factors"] = tuple(FactorOverride(**f) for f in kwargs["factors"])
            if "exempt_literals" in kwargs:
                kwargs["exempt_literals"] = tuple(float(x) for x in kwargs["exempt_literals"])
            if "exempt_digit_functions" in kwargs:
                kwargs["exempt_digit_functions"] = tuple(
                    str(x).upper() for x in kwargs["exempt_digit_functions"])
            if "scale" in kwargs:
                kwargs["scale"] = replace(Thresholds(), **kwargs["scale"])
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(f"bad config: {exc}") from exc


def load_config(path: str | Path) -> Config:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON at line {exc.lineno}: {exc.msg}") from exc
    return Config.from_dict(doc)
