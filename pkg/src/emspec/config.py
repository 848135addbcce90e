"""Pipeline configuration and its flat ``key = value`` file format.

Values are layered: defaults, then the config file, then command-line
flags. Blank lines and lines starting with ``#`` are ignored.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from emspec.errors import InputError
from emspec.ingest import FORMATS, parse_policy


@dataclass
class PipelineConfig:
    prices_path: str | None = None
    prices_format: str = "wide_csv"
    index_path: str | None = None
    alignment: str = "intersect_dates"
    epoch_len: int = 20
    shift: int = 1
    epsilon: float = 0.01
    degenerate: str = "error"
    lags: int = 3
    regression_window: int = 126
    regression_step: int = 1
    bootstrap: int = 500
    level: float = 0.001
    seed: int | None = None
    garch_diff: bool = False
    garch_max_iter: int = 2000
    garch_tol: float = 1e-8
    output_dir: str = "emspec_out"

    def validate(self) -> "PipelineConfig":
        if self.prices_format not in FORMATS:
            raise InputError(f"prices_format must be one of {FORMATS}")
        parse_policy(self.alignment)
        if self.epoch_len < 2 or self.shift < 1:
            raise InputError("epoch_len must be >= 2 and shift >= 1")
        if self.epsilon < 0:
            raise InputError("epsilon must be >= 0")
        if self.degenerate not in ("error", "drop"):
            raise InputError("degenerate must be 'error' or 'drop'")
        if self.lags < 1 or self.regression_window < self.lags + 10 or self.regression_step < 1:
            raise InputError("need lags >= 1, regression_window >= lags + 10, regression_step >= 1")
        if self.bootstrap < 100:
            raise InputError("bootstrap must be >= 100")
        if not 0 < self.level < 1:
            raise InputError("level must lie in (0, 1)")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def dumps(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")


_FIELDS = {f.name: f for f in fields(PipelineConfig)}


def _coerce(name: str, text: str):
    kind = str(_FIELDS[name].type)
    text = text.strip()
    try:
        if kind.startswith("bool"):
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind.startswith("int"):
            return None if text.lower() in ("", "none") else int(text)
        if kind.startswith("float"):
            return float(text)
        return None if text == "" else text
    except ValueError:
        raise InputError(f"bad value for {name}: {text!r}") from None


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines into typed overrides."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise InputError(f"{source}:{lineno}: expected key = value")
        if key not in _FIELDS:
            raise InputError(f"{source}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def load_config_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), str(path))


def resolve_config(file_values: dict | None = None, cli_values: dict | None = None) -> PipelineConfig:
    """Defaults < file < command line; ``None`` CLI values mean "not given"."""
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (cli_values or {}).items() if v is not None})
    unknown = set(merged) - set(_FIELDS)
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")
    return PipelineConfig(**merged).validate()
