"""Emitter parameters, detuning arithmetic and configuration loading.

All frequencies at the API are absolute angular frequencies in rad/s and
coupling amplitudes are in (rad/s)^(1/2), with hbar = 1.  Internally every
formula depends on frequencies only through detunings, so the waveguide
central frequency ``omega0`` is carried for bookkeeping and never enters a
computation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import yaml

__all__ = [
    "TLS",
    "LAMBDA",
    "ConfigError",
    "EmitterSystem",
    "ValidationReport",
    "PhotonConfig",
    "RunConfig",
    "detuning",
    "validate_system",
    "load_config",
    "parse_config",
]

TLS = "TLS"
LAMBDA = "Lambda"


class ConfigError(ValueError):
    """Raised for malformed configuration files or invalid parameters."""


@dataclass(frozen=True)
class EmitterSystem:
    """A two-level or Lambda emitter side-coupled to a chiral waveguide.

    Parameters
    ----------
    kind : {"TLS", "Lambda"}
    omega : float
        Excited-level frequency above the zero-energy reference.
    gamma1, gamma2 : float
        Coupling amplitudes to the ground levels |g1> and |g2>.  A TLS uses
        ``gamma1`` only.
    dtilde1, dtilde2 : float
        Ground-level offsets entering the detuning ``w - omega + dtilde``.
        Ignored for a TLS.
    omega0 : float
        Waveguide central frequency.  Kept for traceability only.
    """

    kind: str
    omega: float
    gamma1: float
    gamma2: float = 0.0
    dtilde1: float = 0.0
    dtilde2: float = 0.0
    omega0: float = 0.0

    @classmethod
    def tls(cls, omega: float, gamma: float, omega0: float = 0.0) -> "EmitterSystem":
        return cls(TLS, omega, gamma, omega0=omega0)

    @classmethod
    def lambda_system(
        cls,
        omega: float,
        gamma1: float,
        gamma2: float,
        dtilde1: float = 0.0,
        dtilde2: float = 0.0,
        omega0: float = 0.0,
    ) -> "EmitterSystem":
        return cls(LAMBDA, omega, gamma1, gamma2, dtilde1, dtilde2, omega0)

    @property
    def is_tls(self) -> bool:
        return self.kind == TLS

    @property
    def levels(self) -> tuple[int, ...]:
        return (1,) if self.is_tls else (1, 2)

    def gamma(self, level: int) -> float:
        """Coupling amplitude to ground level ``level``."""
        _check_level(self, level)
        return self.gamma1 if level == 1 else self.gamma2

    def dtilde(self, level: int) -> float:
        """Ground-level offset; zero for the TLS ground state."""
        _check_level(self, level)
        if self.is_tls:
            return 0.0
        return self.dtilde1 if level == 1 else self.dtilde2

    @property
    def gamma_sq(self) -> float:
        """Total squared coupling, gamma1^2 + gamma2^2 (gamma^2 for a TLS)."""
        if self.is_tls:
            return self.gamma1 * self.gamma1
        return self.gamma1 * self.gamma1 + self.gamma2 * self.gamma2

    @property
    def Gamma(self) -> float:
        """Half-width pi * gamma_sq, the natural frequency scale."""
        return math.pi * self.gamma_sq

    def with_omega0(self, omega0: float) -> "EmitterSystem":
        return EmitterSystem(
            self.kind, self.omega, self.gamma1, self.gamma2,
            self.dtilde1, self.dtilde2, omega0,
        )

    def as_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "omega": self.omega,
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "dtilde1": self.dtilde1,
            "dtilde2": self.dtilde2,
            "omega0": self.omega0,
        }


def _check_level(system: EmitterSystem, level: int) -> None:
    if level not in system.levels:
        raise ValueError(f"ground level {level!r} is not valid for a {system.kind} system")


def detuning(system: EmitterSystem, level: int | None, omega: float) -> float:
    """Detuning of frequency ``omega`` from the emitter resonance.

    Returns ``omega - Omega`` when ``level`` is None (the bare detuning) and
    ``omega - Omega + dtilde_level`` otherwise.
    """
    if not math.isfinite(omega):
        raise ValueError("frequency must be finite")
    if level is None:
        return omega - system.omega
    return omega - system.omega + system.dtilde(level)


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_system(system: EmitterSystem) -> ValidationReport:
    """Check the parameter invariants and list every violation found."""
    problems = []
    if system.kind not in (TLS, LAMBDA):
        problems.append(f"kind: unknown system kind {system.kind!r}")
        return ValidationReport(tuple(problems))
    values = system.as_dict()
    for key in ("omega", "gamma1", "gamma2", "dtilde1", "dtilde2", "omega0"):
        if not math.isfinite(values[key]):
            problems.append(f"finite: {key} is not finite")
    if system.gamma1 < 0 or system.gamma2 < 0:
        problems.append("coupling: coupling amplitudes must be non-negative")
    active = (system.gamma1,) if system.is_tls else (system.gamma1, system.gamma2)
    if not any(g > 0 for g in active):
        problems.append("coupling: at least one coupling amplitude must be positive")
    if system.is_tls and system.gamma2 != 0:
        problems.append("coupling: a TLS has a single coupling, gamma2 must be 0")
    if not system.is_tls and not (system.omega > system.dtilde2 >= system.dtilde1):
        problems.append("ordering: require omega > dtilde2 >= dtilde1")
    return ValidationReport(tuple(problems))


@dataclass(frozen=True)
class PhotonConfig:
    """Absolute input (and optionally output) photon frequencies."""

    inputs: tuple[float, ...]
    outputs: tuple[float, ...] | None = None

    def __post_init__(self):
        for name, seq in (("inputs", self.inputs), ("outputs", self.outputs)):
            if seq is None:
                continue
            if len(seq) not in (1, 2):
                raise ConfigError(f"{name} must list one or two frequencies")
            if not all(math.isfinite(w) and w > 0 for w in seq):
                raise ConfigError(f"{name} must be positive finite frequencies")
        if self.outputs is not None and len(self.outputs) != len(self.inputs):
            raise ConfigError("outputs must have the same length as inputs")


@dataclass(frozen=True)
class RunConfig:
    system: EmitterSystem
    photons: PhotonConfig
    initial_ground: int = 1
    extra: Mapping[str, Any] = field(default_factory=dict)


_KEYS = {"kind", "omega", "gamma1", "gamma2", "dtilde1", "dtilde2", "omega0",
         "inputs", "outputs", "initial_ground"}


def _number(data: Mapping[str, Any], key: str, default: float | None = None) -> float:
    if key not in data:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ConfigError(f"{key!r} must be a number")
    try:
        return float(value)
    except ValueError as exc:
        raise ConfigError(f"{key!r} must be a number") from exc


def _numbers(data: Mapping[str, Any], key: str) -> tuple[float, ...] | None:
    if key not in data or data[key] is None:
        return None
    value = data[key]
    if not isinstance(value, Sequence) or isinstance(value, str):
        value = [value]
    return tuple(_number({key: v}, key) for v in value)


def parse_config(data: Any) -> RunConfig:
    """Build a validated :class:`RunConfig` from a parsed mapping."""
    if not isinstance(data, Mapping):
        raise ConfigError("configuration must be a mapping")
    kind = data.get("kind")
    if kind not in (TLS, LAMBDA):
        raise ConfigError(f"kind must be {TLS!r} or {LAMBDA!r}, got {kind!r}")
    system = EmitterSystem(
        kind=kind,
        omega=_number(data, "omega"),
        gamma1=_number(data, "gamma1"),
        gamma2=_number(data, "gamma2", 0.0),
        dtilde1=_number(data, "dtilde1", 0.0),
        dtilde2=_number(data, "dtilde2", 0.0),
        omega0=_number(data, "omega0", 0.0),
    )
    report = validate_system(system)
    if not report.ok:
        raise ConfigError("; ".join(report.violations))
    inputs = _numbers(data, "inputs")
    if inputs is None:
        raise ConfigError("missing required key 'inputs'")
    photons = PhotonConfig(inputs, _numbers(data, "outputs"))
    ground = data.get("initial_ground", 1)
    if ground not in system.levels:
        raise ConfigError(f"initial_ground {ground!r} is not valid for {kind}")
    extra = {k: v for k, v in data.items() if k not in _KEYS}
    return RunConfig(system, photons, int(ground), extra)


def load_config(path: str | Path) -> RunConfig:
    """Read a YAML (or JSON) configuration file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return parse_config(data)
