"""System configuration, validation and derived constants.

Every model symbol lives on :class:`SystemParams`; quantities that depend on
the load point ``(N_c, N_f)`` live on :class:`DerivedConstants`.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

SPEED_OF_LIGHT = 299_792_458.0

HOPPING_MODES = ("joint", "independent")
SHADOW_VARIANCE_MODES = ("ratio", "single")


class ConfigError(ValueError):
    """Raised when a configuration cannot be turned into SystemParams."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class MissingKey(ConfigError):
    pass


class UnknownKey(ConfigError):
    pass


class OutOfRange(ConfigError):
    def __init__(self, name, value, bound):
        self.name, self.value, self.bound = name, value, bound
        super().__init__(f"{name}={value!r} out of range ({bound})")


class InconsistentPair(ConfigError):
    pass


@dataclass(frozen=True)
class SystemParams:
    """Two-tier network parameters, SI units, powers linear.

    Defaults reproduce the numerical setup of the reference study with
    ``N_hop=1`` and unit receive-power ratio.
    """

    R_c: float = 500.0
    R_f: float = 20.0
    U_f: float = 5.0
    N_sec: int = 3
    N_hop: int = 1
    G: float = 128.0
    gamma: float = 2.0
    epsilon: float = 0.1
    P_r_c: float = 1.0
    P_r_f: float = 1.0
    sigma_dB: float = 4.0
    alpha: float = 4.0
    beta: float = 2.0
    d_0c: float = 100.0
    d_0f: float = 5.0
    f_carrier: float = 2e9
    R_f_exc: float = 0.0
    hopping_mode: str = "joint"
    tier_selection: bool = False
    shadow_variance_mode: str = "ratio"

    def __post_init__(self):
        problems = _check(self)
        if problems:
            # surface the first structured error, keep the full list
            first = problems[0]
            if isinstance(first, ConfigError) and len(problems) == 1:
                raise first
            raise ConfigError([str(p) for p in problems])

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        """Stable short hash of every field (used for caches and manifests)."""
        blob = json.dumps(self.to_dict(), sort_keys=True, default=repr)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @property
    def area_H(self) -> float:
        return hex_area(self.R_c)

    @property
    def K_c(self) -> float:
        return reference_gain(self.f_carrier, self.d_0c)

    @property
    def K_f(self) -> float:
        return reference_gain(self.f_carrier, self.d_0f)

    @property
    def Q_f(self) -> float:
        return (self.P_r_f * self.R_f**self.beta * (self.K_c / self.K_f)
                * self.d_0c**self.alpha / self.d_0f**self.beta)

    @property
    def delta(self) -> float:
        return 2.0 / self.alpha

    def rho(self, P_r: float) -> float:
        """Total-interference outage threshold ``G P_r / (gamma N_hop)``."""
        return self.G * P_r / (self.gamma * self.N_hop)


FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(SystemParams)}
FIELD_NAMES = tuple(FIELD_TYPES)


def _check(p: SystemParams) -> list:
    out: list = []
    positive = ("R_c", "R_f", "G", "gamma", "P_r_c", "P_r_f", "d_0c", "d_0f",
                "f_carrier", "beta")
    for name in positive:
        v = getattr(p, name)
        if not (v > 0 and math.isfinite(v)):
            out.append(OutOfRange(name, v, "> 0"))
    if not p.U_f >= 0:
        out.append(OutOfRange("U_f", p.U_f, ">= 0"))
    if not p.sigma_dB >= 0:
        out.append(OutOfRange("sigma_dB", p.sigma_dB, ">= 0"))
    if not p.R_f_exc >= 0:
        out.append(OutOfRange("R_f_exc", p.R_f_exc, ">= 0"))
    if p.R_f_exc >= p.R_c:
        out.append(OutOfRange("R_f_exc", p.R_f_exc, f"< R_c={p.R_c}"))
    if p.R_f >= p.R_c:
        out.append(OutOfRange("R_f", p.R_f, f"< R_c={p.R_c}"))
    if p.d_0f >= p.d_0c:
        out.append(OutOfRange("d_0f", p.d_0f, f"< d_0c={p.d_0c}"))
    for name in ("N_sec", "N_hop"):
        v = getattr(p, name)
        if int(v) != v or v < 1:
            out.append(OutOfRange(name, v, "integer >= 1"))
    if not 0 < p.epsilon < 1:
        out.append(OutOfRange("epsilon", p.epsilon, "in (0, 1)"))
    if not p.alpha > 2:
        out.append(OutOfRange("alpha", p.alpha, "> 2"))
    if p.N_hop > p.G:
        out.append(InconsistentPair(f"N_hop={p.N_hop} exceeds G={p.G}"))
    if p.hopping_mode not in HOPPING_MODES:
        out.append(OutOfRange("hopping_mode", p.hopping_mode, HOPPING_MODES))
    if p.shadow_variance_mode not in SHADOW_VARIANCE_MODES:
        out.append(OutOfRange("shadow_variance_mode", p.shadow_variance_mode,
                              SHADOW_VARIANCE_MODES))
    return out


def hex_area(R: float) -> float:
    """Exact area of a regular hexagon with circumradius ``R``."""
    return 1.5 * math.sqrt(3.0) * R * R


def reference_gain(f_carrier: float, d_0: float) -> float:
    """Free-space reference gain ``[c / (4 pi f d_0)]^2``."""
    return (SPEED_OF_LIGHT / (4.0 * math.pi * f_carrier * d_0)) ** 2


def reference_params(**overrides) -> SystemParams:
    """Reference parameter set; keyword overrides are applied on top."""
    return SystemParams(**overrides)


_BOOL_WORDS = {"true": True, "yes": True, "on": True, "1": True,
               "false": False, "no": False, "off": False, "0": False}


def _coerce(name: str, value: Any):
    typ = FIELD_TYPES[name]
    if not isinstance(value, str):
        if typ == "int" and isinstance(value, float) and value.is_integer():
            return int(value)
        return value
    text = value.strip()
    try:
        if typ == "bool":
            return _BOOL_WORDS[text.lower()]
        if typ == "int":
            f = float(text)
            return int(f) if f.is_integer() else f
        if typ == "float":
            return float(text)
    except (KeyError, ValueError):
        raise ConfigError(f"{name}: cannot parse {text!r} as {typ}") from None
    return text


def validate(raw_config: Mapping[str, Any],
             base: SystemParams | None = None) -> SystemParams:
    """Build SystemParams from a flat key/value map.

    Without ``base`` every field must be present; with ``base`` the map
    only overrides. Unknown keys are rejected.
    """
    unknown = sorted(set(raw_config) - set(FIELD_NAMES))
    if unknown:
        raise UnknownKey([f"unknown key {k!r}" for k in unknown])
    if base is None:
        missing = [k for k in FIELD_NAMES if k not in raw_config]
        if missing:
            raise MissingKey([f"missing key {k!r}" for k in missing])
        values: dict[str, Any] = {}
    else:
        values = base.to_dict()
    for k, v in raw_config.items():
        values[k] = _coerce(k, v)
    return SystemParams(**values)


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines with ``#`` comments.

    Raises ConfigError naming the offending line number.
    """
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_config(path, base: SystemParams | None = None,
                overrides: Mapping[str, str] | None = None) -> SystemParams:
    with open(path) as fh:
        raw = parse_config_text(fh.read())
    if overrides:
        raw.update(overrides)
    return validate(raw, base=base)


@dataclass(frozen=True)
class DerivedConstants:
    K_c: float
    K_f: float
    Q_f: float
    area_H: float
    lambda_c: float
    lambda_f: float
    rho_c: float
    rho_f: float
    extra: dict = field(default_factory=dict, compare=False)


def derive(params: SystemParams, N_c: float, N_f: float) -> DerivedConstants:
    if N_c < 0 or N_f < 0:
        raise OutOfRange("N_c/N_f", (N_c, N_f), ">= 0")
    area = params.area_H
    return DerivedConstants(
        K_c=params.K_c,
        K_f=params.K_f,
        Q_f=params.Q_f,
        area_H=area,
        lambda_c=N_c / area,
        lambda_f=N_f / area,
        rho_c=params.rho(params.P_r_c),
        rho_f=params.rho(params.P_r_f),
    )
