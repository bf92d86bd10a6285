"""Line-oriented problem configuration files.

Format: ``[section]`` headers with ``key = value`` lines, UTF-8, ``#``
comments.  Unknown sections or keys are rejected so typos fail loudly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expressions import parse_field_expression

__all__ = ["ConfigError", "Config", "parse_config", "load_config", "dump_config"]


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


_SCHEMA: dict[str, set[str]] = {
    "grid": {"dim", "extent_x", "extent_y", "nodes_x", "nodes_y"},
    "vectorfield": {"ax", "ay"},
    "coefficients": {"a0", "f", "tau"},
    "potential": {"p", "m", "visc_p"},
    "problem": {
        "variant", "omega", "T", "steps", "initial", "initial_alt", "scheme",
    },
    "solver": {
        "tol", "max_iter", "debug_inconsistent_divergence",
    },
    "lagrangian": {
        "kind", "dofs", "radius", "samples", "bound", "lam", "matrix",
        "weights", "p", "alpha", "beta", "lin",
    },
}


@dataclass
class Config:
    sections: dict[str, dict[str, str]] = field(default_factory=dict)

    def has(self, section: str, key: str) -> bool:
        return key in self.sections.get(section, {})

    def get(self, section: str, key: str, default=None, required=False) -> str:
        sec = self.sections.get(section, {})
        if key not in sec:
            if required:
                raise ConfigError(f"missing required key [{section}] {key}")
            return default
        return sec[key]

    def get_float(self, section, key, default=None, required=False):
        raw = self.get(section, key, required=required)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key} must be a number, got {raw!r}")

    def get_int(self, section, key, default=None, required=False):
        raw = self.get(section, key, required=required)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"[{section}] {key} must be an integer, got {raw!r}")

    def get_bool(self, section, key, default=False):
        raw = self.get(section, key)
        if raw is None:
            return default
        if raw.lower() in ("true", "yes", "1", "on"):
            return True
        if raw.lower() in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"[{section}] {key} must be a boolean, got {raw!r}")

    def get_expression(self, section, key, default=None, required=False):
        raw = self.get(section, key, required=required)
        if raw is None:
            raw = default
        if raw is None:
            return None
        try:
            return parse_field_expression(raw)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}")

    def get_interval(self, section, key, default=None, required=False):
        raw = self.get(section, key, required=required)
        if raw is None:
            return default
        parts = raw.split(",")
        if len(parts) != 2:
            raise ConfigError(f"[{section}] {key} must be 'lo,hi', got {raw!r}")
        try:
            return (float(parts[0]), float(parts[1]))
        except ValueError:
            raise ConfigError(f"[{section}] {key} must be 'lo,hi', got {raw!r}")

    def get_vector(self, section, key, default=None):
        raw = self.get(section, key)
        if raw is None:
            return default
        try:
            return np.array([float(v) for v in raw.split(",")])
        except ValueError:
            raise ConfigError(f"[{section}] {key} must be comma-separated numbers")

    def get_matrix(self, section, key, default=None):
        raw = self.get(section, key)
        if raw is None:
            return default
        try:
            return np.array(
                [[float(v) for v in row.split(",")] for row in raw.split(";")]
            )
        except ValueError:
            raise ConfigError(
                f"[{section}] {key} must be rows of comma-separated numbers "
                "joined by ';'"
            )


def parse_config(text: str) -> Config:
    sections: dict[str, dict[str, str]] = {}
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current not in _SCHEMA:
                raise ConfigError(f"line {lineno}: unknown section [{current}]")
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if current is None:
            raise ConfigError(f"line {lineno}: key outside any section")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _SCHEMA[current]:
            raise ConfigError(f"line {lineno}: unknown key [{current}] {key}")
        if key in sections[current]:
            raise ConfigError(f"line {lineno}: duplicate key [{current}] {key}")
        sections[current][key] = value
    if not sections:
        raise ConfigError("empty configuration")
    return Config(sections=sections)


def load_config(path) -> Config:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def dump_config(config: Config) -> str:
    """Serialize with sorted sections/keys (used for run manifests)."""
    lines = []
    for section in sorted(config.sections):
        lines.append(f"[{section}]")
        for key in sorted(config.sections[section]):
            lines.append(f"{key} = {config.sections[section][key]}")
        lines.append("")
    return "\n".join(lines)
