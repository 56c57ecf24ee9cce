"""Run configuration: parsing, defaults, and exhaustive validation.

Configs are plain key = value text (one scalar or bracketed list per key,
``#`` comments).  Validation collects every violation instead of stopping at
the first, and unknown keys are rejected outright.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

__all__ = ["RunConfig", "ConfigError", "parse_config", "config_from_mapping"]


class ConfigError(ValueError):
    """Carries the full list of validation violations."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass
class RunConfig:
    """Validated inputs of a solve or sweep run.

    ``alpha`` is a single value for ``solve`` and a sorted list for
    ``sweep``.  Optional observable blocks: grid momentum profile, Monte
    Carlo semi-classical momentum profile, and Husimi level fillings
    (``husimi_epsilon``/``husimi_n_max`` left at 0 mean automatic choices).
    """

    n: int
    alpha: float | list[float]
    s: float = 2.0
    q_x: float = 2.0
    q_p: float = 6.0
    seed: int = 0
    out_dir: str = "runs"
    gradient_tolerance: float = 1e-6
    max_iterations: int = 2000
    lbfgs_history: int = 10
    init_mode: str = "linear-eigenstates"
    max_grid_points: int = 1024
    radial_profiles: bool = True
    momentum: bool = True
    mc_momentum: bool = False
    mc_samples: int = 100_000
    husimi: bool = False
    husimi_epsilon: float = 0.0
    husimi_n_max: int = 0
    profile_points: int = 129
    checkpoint_in: str = ""
    checkpoint_every: int = 100
    timing: bool = False

    def alphas(self) -> list[float]:
        return list(self.alpha) if isinstance(self.alpha, list) else [self.alpha]


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_KNOWN_KEYS = set(_FIELD_TYPES)


def _parse_scalar(token: str):
    token = token.strip()
    lowered = token.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        pass
    return token.strip("\"'")


def _parse_value(raw: str):
    raw = raw.strip()
    if raw.startswith("[") and raw.endswith("]"):
        inner = raw[1:-1].strip()
        if not inner:
            return []
        return [_parse_scalar(tok) for tok in inner.split(",")]
    return _parse_scalar(raw)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a config; raises :class:`ConfigError` listing all
    violations (unknown keys, type mismatches, out-of-range values)."""
    violations: list[str] = []
    mapping: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            violations.append(f"line {lineno}: expected 'key = value', got {stripped!r}")
            continue
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _KNOWN_KEYS:
            violations.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in mapping:
            violations.append(f"line {lineno}: duplicate key {key!r}")
            continue
        mapping[key] = _parse_value(raw)
    if violations:
        raise ConfigError(violations)
    return config_from_mapping(mapping)


def config_from_mapping(mapping: dict) -> RunConfig:
    """Build a validated config from a key/value mapping (flags or file)."""
    violations: list[str] = []
    unknown = set(mapping) - _KNOWN_KEYS
    for key in sorted(unknown):
        violations.append(f"unknown key {key!r}")
    if "n" not in mapping:
        violations.append("missing required key 'n'")
    if "alpha" not in mapping:
        violations.append("missing required key 'alpha'")
    if violations:
        raise ConfigError(violations)

    values = {k: v for k, v in mapping.items() if k in _KNOWN_KEYS}
    config = RunConfig(**{**values})
    _validate(config, violations)
    if violations:
        raise ConfigError(violations)
    return config


def _validate(config: RunConfig, violations: list[str]) -> None:
    def require(condition: bool, message: str) -> None:
        if not condition:
            violations.append(message)

    require(isinstance(config.n, int) and config.n >= 1, f"n must be an integer >= 1, got {config.n!r}")

    alphas = config.alpha if isinstance(config.alpha, list) else [config.alpha]
    cleaned: list[float] = []
    for value in alphas:
        if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
            violations.append(f"alpha values must be finite numbers, got {value!r}")
        elif not 0.0 <= float(value) < 1.0:
            violations.append(f"alpha = {value!r} outside the statistics domain [0, 1)")
        else:
            cleaned.append(float(value))
    if len(cleaned) == len(alphas):
        if len(set(cleaned)) != len(cleaned):
            violations.append("alpha sweep contains duplicate values")
        ordered = sorted(cleaned)
        if isinstance(config.alpha, list):
            config.alpha = ordered
        else:
            config.alpha = ordered[0]

    require(isinstance(config.s, (int, float)) and config.s > 0, f"s must be > 0, got {config.s!r}")
    require(config.q_x >= 1, f"q_x must be >= 1, got {config.q_x!r}")
    require(config.q_p >= 1, f"q_p must be >= 1, got {config.q_p!r}")
    require(isinstance(config.seed, int) and 0 <= config.seed < 2**64, f"seed must be a u64, got {config.seed!r}")
    require(config.gradient_tolerance > 0, "gradient_tolerance must be positive")
    require(isinstance(config.max_iterations, int) and config.max_iterations >= 1, "max_iterations must be >= 1")
    require(isinstance(config.lbfgs_history, int) and config.lbfgs_history >= 1, "lbfgs_history must be >= 1")
    require(
        config.init_mode in ("linear-eigenstates", "randomized"),
        f"init_mode must be 'linear-eigenstates' or 'randomized', got {config.init_mode!r}",
    )
    require(isinstance(config.max_grid_points, int) and config.max_grid_points >= 8, "max_grid_points must be >= 8")
    require(isinstance(config.mc_samples, int) and config.mc_samples >= 10_000, "mc_samples must be >= 10000")
    require(isinstance(config.profile_points, int) and config.profile_points >= 2, "profile_points must be >= 2")
    require(isinstance(config.checkpoint_every, int) and config.checkpoint_every >= 1, "checkpoint_every must be >= 1")
    require(config.husimi_epsilon >= 0, "husimi_epsilon must be >= 0 (0 = automatic)")
    require(isinstance(config.husimi_n_max, int) and config.husimi_n_max >= 0, "husimi_n_max must be >= 0 (0 = automatic)")
    if config.husimi and config.husimi_n_max:
        for value in (config.alpha if isinstance(config.alpha, list) else [config.alpha]):
            if isinstance(value, float) and value > 0:
                needed = math.floor(1.0 / value) + 2
                if config.husimi_n_max < needed:
                    violations.append(
                        f"husimi_n_max = {config.husimi_n_max} below floor(1/alpha)+2 = {needed} for alpha = {value}"
                    )
