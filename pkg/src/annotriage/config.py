"""Single-file configuration naming the data, banks, backends, and pricing.

TOML and JSON are both accepted; relative paths resolve against the config
file's directory. CLI flags override individual fields.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .backends import BackendConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    """Configuration file is missing or malformed."""


@dataclass
class AppConfig:
    dataset: Path
    schemas: Path
    backends: dict[str, BackendConfig] = field(default_factory=dict)
    exemplars: Path | None = None
    similarity: Path | None = None
    style_lexicon: Path | None = None
    compositions: Path | None = None
    pricing: Path | None = None
    runs_dir: Path = Path("runs")

    def backend(self, name: str) -> BackendConfig:
        try:
            return self.backends[name]
        except KeyError:
            known = ", ".join(sorted(self.backends)) or "none configured"
            raise ConfigError(f"unknown backend {name!r} (known: {known})") from None


def _resolve(base: Path, value) -> Path | None:
    if value is None:
        return None
    path = Path(value)
    return path if path.is_absolute() else base / path


def load_config(path: str | Path) -> AppConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    raw: Mapping
    if path.suffix == ".toml":
        with open(path, "rb") as f:
            raw = tomllib.load(f)
    else:
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
    for required in ("dataset", "schemas"):
        if required not in raw:
            raise ConfigError(f"{path}: missing required key {required!r}")
    base = path.parent
    backends = {
        name: BackendConfig.from_dict(name, body)
        for name, body in raw.get("backends", {}).items()
    }
    return AppConfig(
        dataset=_resolve(base, raw["dataset"]),
        schemas=_resolve(base, raw["schemas"]),
        backends=backends,
        exemplars=_resolve(base, raw.get("exemplars")),
        similarity=_resolve(base, raw.get("similarity")),
        style_lexicon=_resolve(base, raw.get("style_lexicon")),
        compositions=_resolve(base, raw.get("compositions")),
        pricing=_resolve(base, raw.get("pricing")),
        runs_dir=_resolve(base, raw.get("runs_dir", "runs")),
    )
