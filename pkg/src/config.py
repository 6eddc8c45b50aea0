import logging
import math
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Union

from .errors import ConfigError, InvalidInputError

CONFIG_ENV_VAR = 'JOURNEY_DETECTOR_CONFIG'

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GpsFsmParams:
    v_i: float = 1.0  # instantaneous velocity threshold, m/s
    v_c: float = 1.0  # cumulative velocity threshold, m/s
    m: int = 3  # Markov chain length in windows
    h: int = 25  # hysteresis buffer length in windows
    d_h: float = 30.0  # displacement gate, meters
    sat_min: int = 5
    sat_timeout: float = 40.0  # seconds
    watchdog_timeout: float = 60.0  # seconds

    def validate(self) -> None:
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise InvalidInputError(f"gps.{f.name} must be strictly positive")
        if self.m > self.h:
            raise InvalidInputError(f"gps.m ({self.m}) must not exceed gps.h ({self.h})")


@dataclass(frozen=True)
class PostprocParams:
    low_len: float = 50.0  # meters
    high_len: float = 500.0  # meters
    join_gap: float = 120.0  # seconds
    join_tolerance: float = 1.2
    tail_speed: float = 20.0  # m/s
    tail_max_cuts: int = 3
    join_avg_count: int = 5

    def validate(self) -> None:
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise InvalidInputError(f"postproc.{f.name} must be strictly positive")
        if self.low_len >= self.high_len:
            raise InvalidInputError("postproc.low_len must be below postproc.high_len")
        if self.join_tolerance < 1:
            raise InvalidInputError("postproc.join_tolerance must be at least 1")


# Search box of the motion detector: (low, high, integer?)
MOTION_PARAM_BOX = {
    'n1': (1, 20, True),
    'th1': (0.0, 5.0, False),
    'n2': (1, 20, True),
    'th2': (0.0, 5.0, False),
    'w2': (1, 5, True),
}


@dataclass(frozen=True)
class MotionParams:
    n1: int = 5
    th1: float = 0.18
    n2: int = 7
    th2: float = 4.78
    w2: int = 1

    def validate(self) -> None:
        for name, (low, high, _) in MOTION_PARAM_BOX.items():
            value = getattr(self, name)
            if not low <= value <= high:
                raise InvalidInputError(f"motion.{name}={value} outside [{low}, {high}]")

    def as_tuple(self):
        return (self.n1, self.th1, self.n2, self.th2, self.w2)


@dataclass(frozen=True)
class ControllerParams:
    battery_aware: bool = True
    idle_timeout: float = 300.0  # seconds in US_IDLE/US_SRCH before GPS -> ACC
    reacquisition_delay: float = 0.0  # GPS dead time after ACC -> GPS, seconds

    def validate(self) -> None:
        if self.idle_timeout <= 0:
            raise InvalidInputError("controller.idle_timeout must be strictly positive")
        if self.reacquisition_delay < 0:
            raise InvalidInputError("controller.reacquisition_delay must not be negative")

    @property
    def effective_idle_timeout(self) -> float:
        return self.idle_timeout if self.battery_aware else math.inf


@dataclass(frozen=True)
class PipelineConfig:
    window: int = 3  # down-sampler window size W
    gps: GpsFsmParams = field(default_factory=GpsFsmParams)
    postproc: PostprocParams = field(default_factory=PostprocParams)
    motion: MotionParams = field(default_factory=MotionParams)
    controller: ControllerParams = field(default_factory=ControllerParams)
    device: str = 'S2'
    validation_tolerance: float = 60.0  # seconds

    @classmethod
    def default_config(cls) -> 'PipelineConfig':
        return cls()

    def validate(self) -> 'PipelineConfig':
        if self.window < 1:
            raise InvalidInputError("downsampler.window must be at least 1")
        self.gps.validate()
        self.postproc.validate()
        self.motion.validate()
        self.controller.validate()
        return self

    def with_overrides(self, overrides: Dict[str, Dict[str, Any]]) -> 'PipelineConfig':
        """Apply {section: {key: value}} overrides, coercing values to the field types."""
        config = self
        for section, values in overrides.items():
            if not values:
                continue
            if section in _TOP_LEVEL_SECTIONS:
                top = {}
                for key, value in values.items():
                    name = _TOP_LEVEL_SECTIONS[section].get(key)
                    if name is None:
                        raise ConfigError(f"Unknown key '{key}' in section [{section}]")
                    top[name] = _coerce(type(getattr(config, name)), value, f"{section}.{key}")
                config = replace(config, **top)
            elif section in _GROUP_SECTIONS:
                group = getattr(config, section)
                known = {f.name: f for f in fields(group)}
                updates = {}
                for key, value in values.items():
                    if key not in known:
                        raise ConfigError(f"Unknown key '{key}' in section [{section}]")
                    updates[key] = _coerce(type(getattr(group, key)), value, f"{section}.{key}")
                config = replace(config, **{section: replace(group, **updates)})
            else:
                raise ConfigError(f"Unknown config section [{section}]")
        return config.validate()

    @classmethod
    def from_file(cls, path: Union[str, Path], base: Optional['PipelineConfig'] = None) -> 'PipelineConfig':
        base = base or cls.default_config()
        return base.with_overrides(parse_config_file(path))

    @classmethod
    def load(cls, path: Optional[Union[str, Path]] = None) -> 'PipelineConfig':
        """Load from `path`, else from $JOURNEY_DETECTOR_CONFIG, else defaults."""
        path = path or os.environ.get(CONFIG_ENV_VAR)
        if not path:
            return cls.default_config()
        logger.info(f"Loading parameters from {path}")
        return cls.from_file(path)


_GROUP_SECTIONS = ('gps', 'postproc', 'motion', 'controller')
_TOP_LEVEL_SECTIONS = {
    'downsampler': {'window': 'window'},
    'power': {'device': 'device'},
    'validation': {'tolerance': 'validation_tolerance'},
}


def _coerce(kind: type, raw: Any, name: str) -> Any:
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered in ('1', 'true', 'yes', 'on'):
                return True
            if lowered in ('0', 'false', 'no', 'off'):
                return False
            raise ValueError(text)
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
    except ValueError:
        raise ConfigError(f"Invalid value '{text}' for {name}")
    return text


def parse_config_file(path: Union[str, Path]) -> Dict[str, Dict[str, str]]:
    """
    Parse a flat `key = value` file into {section: {key: raw value}}.

    Lines starting with # and blank lines are ignored. A `[section]` line sets
    the section for following keys; keys may also be written as `section.key`.
    """
    sections: Dict[str, Dict[str, str]] = {}
    current = None
    with open(path, 'r', encoding='utf-8') as f:
        for lineno, raw_line in enumerate(f, start=1):
            line = raw_line.strip()
            if not line or line.startswith('#'):
                continue
            if line.startswith('[') and line.endswith(']'):
                current = line[1:-1].strip()
                continue
            if '=' not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got '{line}'")
            key, value = (part.strip() for part in line.split('=', 1))
            section = current
            if '.' in key:
                section, key = key.split('.', 1)
            if section is None:
                raise ConfigError(f"{path}:{lineno}: key '{key}' has no section")
            sections.setdefault(section, {})[key] = value.split('#', 1)[0].strip()
    return sections
