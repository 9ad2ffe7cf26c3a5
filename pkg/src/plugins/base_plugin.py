"""
Base Plugin Interface - Plugins
Every experiment kind is a plugin that turns an experiment context into
tables, a summary and an acceptance flag.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional, Dict, Any, List

from src.lab.config import ExperimentConfig
from src.solver.problem import TransportProblem


@dataclass
class PluginMetadata:
    """Metadata about a plugin."""
    name: str
    version: str
    author: str
    description: str
    kind: str


@dataclass
class ExperimentContext:
    """Everything a plugin needs to run one experiment."""
    config: ExperimentConfig
    problem: Optional[TransportProblem] = None
    workers: Optional[int] = None

    def __post_init__(self):
        if self.problem is None:
            self.problem = self.config.build_problem()

    @property
    def kind(self) -> str:
        return self.config.kind

    def option(self, key: str, default: Any = None) -> Any:
        value = self.config.experiment.get(key)
        return default if value is None else value


@dataclass
class ExperimentReport:
    """Tables (name -> rows), a JSON summary and the acceptance outcome."""
    plugin_name: str
    kind: str
    tables: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)
    summary: Dict[str, Any] = field(default_factory=dict)
    acceptance_passed: Optional[bool] = None

    def to_dict(self) -> dict:
        return {
            'plugin_name': self.plugin_name,
            'kind': self.kind,
            'tables': {name: len(rows) for name, rows in self.tables.items()},
            'summary': self.summary,
            'acceptance_passed': self.acceptance_passed,
        }


class BasePlugin(ABC):
    """
    Base class for all experiment plugins.

    Plugins run one experiment kind and never swallow numeric errors.
    """

    def __init__(self):
        self._metadata = self._get_metadata()

    @abstractmethod
    def _get_metadata(self) -> PluginMetadata:
        """Return plugin metadata. Must be implemented by subclass."""
        pass

    @abstractmethod
    def run(self, context: ExperimentContext) -> ExperimentReport:
        """Run the experiment and return its report."""
        pass

    def report(self, context: ExperimentContext, **kwargs) -> ExperimentReport:
        return ExperimentReport(plugin_name=self.metadata.name, kind=context.kind, **kwargs)

    @property
    def metadata(self) -> PluginMetadata:
        return self._metadata
