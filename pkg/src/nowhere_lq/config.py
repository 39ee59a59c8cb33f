"""Run configuration: precision, truncation depths, schedule index, output options.

Config files are flat `key=value` text (one pair per line, `#` comments);
command-line flags override file values, and the NOWHERE_LQ_CONFIG
environment variable names a default file so reproducible runs can be
checked into fixtures.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

from .certify import DEFAULT_DEPTHS, Depths
from .exact import DEFAULT_PRECISION, MIN_PRECISION, DomainError, Rat, parse_rat

ENV_CONFIG = "NOWHERE_LQ_CONFIG"

_BOOL_WORDS = {"1": True, "true": True, "yes": True, "0": False, "false": False, "no": False}


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs beyond its own arguments."""

    precision: int = DEFAULT_PRECISION
    depths: Depths = DEFAULT_DEPTHS
    p: Rat = Fraction(1)
    output_dir: Path = Path(".")
    figures: bool = True
    compact: bool = False

    def __post_init__(self) -> None:
        if self.precision < MIN_PRECISION:
            raise DomainError(
                f"precision must be >= {MIN_PRECISION}, got {self.precision}"
            )
        if self.p < 1:
            raise DomainError(f"index p must be >= 1, got {self.p}")

    def replaced(self, **changes) -> "RunConfig":
        depth_keys = {k: v for k, v in changes.items() if k in ("J", "L", "D", "m", "Jg")}
        rest = {k: v for k, v in changes.items() if k not in depth_keys}
        if depth_keys:
            rest["depths"] = replace(self.depths, **depth_keys)
        return replace(self, **rest)

    def to_json(self) -> dict:
        return {
            "precision": self.precision,
            "depths": self.depths.to_json(),
            "p": f"{self.p.numerator}/{self.p.denominator}",
            "output_dir": str(self.output_dir),
            "figures": self.figures,
            "compact": self.compact,
        }


def _parse_bool(text: str, key: str) -> bool:
    try:
        return _BOOL_WORDS[text.strip().lower()]
    except KeyError:
        raise DomainError(f"config key {key} expects a boolean, got {text!r}") from None


def parse_config_text(text: str) -> dict:
    """Key=value lines to an override mapping; unknown keys are errors."""
    overrides: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"config line {lineno} is not key=value: {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in ("precision", "J", "L", "D", "m", "Jg"):
            try:
                overrides[key] = int(value)
            except ValueError:
                raise DomainError(
                    f"config key {key} expects an integer, got {value!r} (line {lineno})"
                ) from None
        elif key == "p":
            try:
                overrides[key] = parse_rat(value)
            except (ValueError, ZeroDivisionError) as err:
                raise DomainError(
                    f"config key p expects a rational, got {value!r} ({err})"
                ) from None
        elif key == "output_dir":
            overrides[key] = Path(value)
        elif key in ("figures", "compact"):
            overrides[key] = _parse_bool(value, key)
        else:
            raise DomainError(f"unknown config key {key!r} on line {lineno}")
    return overrides


def load_config(path: str | os.PathLike | None = None, env=os.environ) -> RunConfig:
    """Defaults, then the config file (explicit path or $NOWHERE_LQ_CONFIG)."""
    chosen = path if path is not None else env.get(ENV_CONFIG)
    config = RunConfig()
    if chosen is None:
        return config
    file_path = Path(chosen)
    if not file_path.exists():
        raise DomainError(f"config file not found: {file_path}")
    return config.replaced(**parse_config_text(file_path.read_text()))
