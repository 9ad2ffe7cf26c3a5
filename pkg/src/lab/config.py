"""
Experiment Config - Lab
YAML (or JSON) experiment documents, merged over config/lab_defaults.yaml,
and a structural validator that itemizes failures instead of raising.
"""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml

from src.core.drift import FIELD_REGISTRY
from src.core.exceptions import ConfigValidationError
from src.core.geometry import DomainFactory
from src.solver.data import DATA_REGISTRY
from src.solver.problem import TransportProblem

logger = logging.getLogger(__name__)

SCHEMA = 'stochlab/1'
EXPERIMENT_KINDS = ('solve', 'weakform', 'trace', 'renorm', 'convergence', 'hypothesis')
SCHEDULE_KEYS = ('tau', 'epsilon', 'mu')

PROJECT_ROOT = Path(__file__).parent.parent.parent
DEFAULTS_PATH = PROJECT_ROOT / 'config' / 'lab_defaults.yaml'


def default_config() -> Dict[str, Any]:
    """Built-in defaults, used when config/lab_defaults.yaml is missing."""
    return {
        'schema': SCHEMA,
        'kind': 'solve',
        'problem': {
            'domain': {'kind': 'disk', 'center': [0.0, 0.0], 'radius': 1.0},
            'drift': {'name': 'zero'},
            'initial': {'name': 'constant', 'parameters': {'value': 0.0}},
            'boundary': {'name': 'constant', 'parameters': {'value': 1.0}},
            'horizon': 0.5,
            'noise': True,
        },
        'numerics': {
            'dt': 0.01,
            'n_paths': 256,
            'seed': 0,
            'times': None,
            'interior_resolution': 48,
            'boundary_resolution': 64,
            'schedules': {'tau': None, 'epsilon': None, 'mu': None},
        },
        'experiment': {},
        'output_dir': 'results',
    }


@dataclass(frozen=True)
class ValidationFailure:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


@dataclass
class ValidationReport:
    failures: List[ValidationFailure] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    @property
    def paths(self) -> List[str]:
        return [f.path for f in self.failures]

    def add(self, path: str, message: str) -> None:
        self.failures.append(ValidationFailure(path, message))

    def to_dict(self) -> Dict[str, Any]:
        return {'ok': self.ok, 'failures': [{'path': f.path, 'message': f.message} for f in self.failures]}


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    out = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_defaults(path: Optional[Path] = None) -> Dict[str, Any]:
    path = Path(path) if path is not None else DEFAULTS_PATH
    if not path.exists():
        logger.debug(f"no defaults file at {path}, using built-in defaults")
        return default_config()
    with open(path) as fh:
        loaded = yaml.safe_load(fh) or {}
    return deep_merge(default_config(), loaded)


def load_document(path: Union[str, Path]) -> Dict[str, Any]:
    """YAML is a superset of JSON, so one loader reads both."""
    with open(path) as fh:
        loaded = yaml.safe_load(fh)
    if loaded is None:
        return {}
    if not isinstance(loaded, dict):
        raise ConfigValidationError([ValidationFailure('', 'document is not a mapping')])
    return loaded


@dataclass
class ExperimentConfig:
    """A validated experiment document."""
    kind: str
    problem: Dict[str, Any]
    numerics: Dict[str, Any]
    experiment: Dict[str, Any] = field(default_factory=dict)
    output_dir: str = 'results'
    schema: str = SCHEMA

    @classmethod
    def from_dict(cls, document: Dict[str, Any], defaults: Optional[Dict[str, Any]] = None,
                  strict: bool = True) -> "ExperimentConfig":
        merged = deep_merge(defaults if defaults is not None else default_config(), document)
        if strict:
            report = validate(merged)
            if not report.ok:
                raise ConfigValidationError(report.failures)
        return cls(kind=merged['kind'], problem=merged['problem'], numerics=merged['numerics'],
                   experiment=merged.get('experiment') or {}, output_dir=str(merged.get('output_dir', 'results')),
                   schema=merged.get('schema', SCHEMA))

    def to_dict(self) -> Dict[str, Any]:
        return {'schema': self.schema, 'kind': self.kind, 'problem': copy.deepcopy(self.problem),
                'numerics': copy.deepcopy(self.numerics), 'experiment': copy.deepcopy(self.experiment),
                'output_dir': self.output_dir}

    def with_overrides(self, kind: Optional[str] = None, seed: Optional[int] = None,
                       n_paths: Optional[int] = None, dt: Optional[float] = None,
                       output_dir: Optional[str] = None) -> "ExperimentConfig":
        """Command-line overrides; the result is validated again."""
        doc = self.to_dict()
        if kind is not None:
            doc['kind'] = kind
        for key, value in (('seed', seed), ('n_paths', n_paths), ('dt', dt)):
            if value is not None:
                doc['numerics'][key] = value
        if output_dir is not None:
            doc['output_dir'] = str(output_dir)
        return ExperimentConfig.from_dict(doc, defaults={})

    # numerics accessors
    @property
    def dt(self) -> float:
        return float(self.numerics['dt'])

    @property
    def n_paths(self) -> int:
        return int(self.numerics['n_paths'])

    @property
    def seed(self) -> int:
        return int(self.numerics['seed'])

    @property
    def horizon(self) -> float:
        return float(self.problem.get('horizon', 1.0))

    @property
    def times(self) -> List[float]:
        times = self.numerics.get('times')
        return [self.horizon] if not times else [float(t) for t in times]

    def schedule(self, key: str) -> Optional[List[float]]:
        raw = (self.numerics.get('schedules') or {}).get(key)
        return None if raw is None else [float(v) for v in raw]

    def build_problem(self) -> TransportProblem:
        return TransportProblem.from_descriptor(self.problem)


def load_config(path: Union[str, Path], defaults_path: Optional[Path] = None) -> ExperimentConfig:
    document = load_document(path)
    config = ExperimentConfig.from_dict(document, load_defaults(defaults_path))
    logger.info(f"loaded {config.kind} config from {path}")
    return config


# -- validation -----------------------------------------------------------------

def _number(value: Any) -> Optional[float]:
    if isinstance(value, bool):
        return None
    try:
        out = float(value)
    except (TypeError, ValueError):
        return None
    return out if math.isfinite(out) else None


def _check_problem(problem: Any, report: ValidationReport) -> Optional[float]:
    if not isinstance(problem, dict):
        report.add('problem', 'missing or not a mapping')
        return None
    domain = problem.get('domain')
    if not isinstance(domain, dict) or domain.get('kind') not in DomainFactory.get_available_kinds():
        report.add('problem.domain.kind', f"expected one of {DomainFactory.get_available_kinds()}")
    drift = problem.get('drift') or {'name': 'zero'}
    if not isinstance(drift, dict) or drift.get('name', 'zero') not in FIELD_REGISTRY:
        report.add('problem.drift.name', f"expected one of {sorted(FIELD_REGISTRY)}")
    for key in ('initial', 'boundary'):
        datum = problem.get(key) or {'name': 'constant'}
        if not isinstance(datum, dict) or datum.get('name', 'constant') not in DATA_REGISTRY:
            report.add(f'problem.{key}.name', f"expected one of {sorted(DATA_REGISTRY)}")
    horizon = _number(problem.get('horizon', 1.0))
    if horizon is None or horizon <= 0:
        report.add('problem.horizon', 'must be a positive number')
        return None
    return horizon


def _check_schedule(path: str, values: Any, report: ValidationReport) -> None:
    if values is None:
        return
    if not isinstance(values, (list, tuple)) or not values:
        report.add(path, 'must be a non-empty list')
        return
    numbers = [_number(v) for v in values]
    if any(v is None or v <= 0 for v in numbers):
        report.add(path, 'entries must be positive numbers')
        return
    if any(b >= a for a, b in zip(numbers, numbers[1:])):
        report.add(path, 'must be strictly decreasing')


def _check_numerics(numerics: Any, horizon: Optional[float], report: ValidationReport) -> None:
    if not isinstance(numerics, dict):
        report.add('numerics', 'missing or not a mapping')
        return
    dt = _number(numerics.get('dt'))
    if dt is None or dt <= 0:
        report.add('numerics.dt', 'must be a positive number')
    elif horizon is not None:
        steps = round(horizon / dt)
        if steps < 1 or abs(steps * dt - horizon) > 1e-12 * max(1.0, horizon):
            report.add('numerics.dt', f'must divide the horizon T={horizon}')
    n_paths = numerics.get('n_paths')
    if isinstance(n_paths, bool) or not isinstance(n_paths, int) or n_paths < 1:
        report.add('numerics.n_paths', 'must be a positive integer')
    seed = numerics.get('seed')
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        report.add('numerics.seed', 'must be present as a non-negative integer')
    for key in ('interior_resolution', 'boundary_resolution'):
        value = numerics.get(key)
        if value is not None and (not isinstance(value, int) or value < 2):
            report.add(f'numerics.{key}', 'must be an integer >= 2')
    times = numerics.get('times')
    if times is not None:
        numbers = [_number(t) for t in times] if isinstance(times, (list, tuple)) else [None]
        if any(t is None or t < 0 or (horizon is not None and t > horizon * (1 + 1e-12)) for t in numbers):
            report.add('numerics.times', 'must be a list of times in [0, T]')
    schedules = numerics.get('schedules') or {}
    if not isinstance(schedules, dict):
        report.add('numerics.schedules', 'must be a mapping')
        return
    for key in SCHEDULE_KEYS:
        _check_schedule(f'numerics.schedules.{key}', schedules.get(key), report)


def validate(config: Union[ExperimentConfig, Dict[str, Any]]) -> ValidationReport:
    """Structural and invariant checks; never runs numerics and never raises on content."""
    document = config.to_dict() if isinstance(config, ExperimentConfig) else config
    report = ValidationReport()
    if not isinstance(document, dict):
        report.add('', 'document is not a mapping')
        return report
    if document.get('schema') != SCHEMA:
        report.add('schema', f"expected {SCHEMA!r}")
    if document.get('kind') not in EXPERIMENT_KINDS:
        report.add('kind', f"expected one of {list(EXPERIMENT_KINDS)}")
    horizon = _check_problem(document.get('problem'), report)
    _check_numerics(document.get('numerics'), horizon, report)
    if not isinstance(document.get('experiment', {}) or {}, dict):
        report.add('experiment', 'must be a mapping')
    for failure in report.failures:
        logger.debug(f"validation failure {failure}")
    return report
