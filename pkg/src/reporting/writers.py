"""
Report Writers - Reporting
Write experiment tables (CSV), summaries (JSON) and run manifests to the
output directory. Writers report failures in their result instead of raising.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Dict, Any, List
import json
import logging
from datetime import datetime
from pathlib import Path

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

# round-trip precision, so equal runs give equal bytes
CSV_FLOAT_FORMAT = '%.17g'


@dataclass
class WriteResult:
    """Result of writing one artifact."""
    success: bool
    artifact_type: str
    message: str
    data: Optional[Dict[str, Any]] = None
    written_at: Optional[datetime] = None

    def __post_init__(self):
        if self.written_at is None:
            self.written_at = datetime.now()

    @property
    def path(self) -> Optional[Path]:
        if self.data and 'path' in self.data:
            return Path(self.data['path'])
        return None


def _plain(value: Any) -> Any:
    """numpy scalars and arrays to JSON-ready values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


class ReportWriter(ABC):
    """Base class for all report writers."""

    suffix = ''

    def __init__(self, output_dir: Path):
        self.output_dir = Path(output_dir)
        self.artifact_type = self.__class__.__name__.replace('Writer', '').lower()

    @abstractmethod
    def write(self, name: str, payload: Any) -> WriteResult:
        """Write payload under output_dir/name + suffix."""
        pass

    def target(self, name: str) -> Path:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        return self.output_dir / f"{name}{self.suffix}"

    def _failed(self, name: str, error: Exception) -> WriteResult:
        logger.error(f"Failed to write {self.artifact_type} {name}: {error}")
        return WriteResult(success=False, artifact_type=self.artifact_type,
                           message=f"Error writing {name}: {error}")


class CsvTableWriter(ReportWriter):
    """Rows (list of dicts) to a CSV with a header row."""

    suffix = '.csv'

    def write(self, name: str, payload: List[Dict[str, Any]]) -> WriteResult:
        try:
            if not payload:
                return WriteResult(success=False, artifact_type='csv_table', message=f"Empty table: {name}")
            path = self.target(name)
            frame = pd.DataFrame.from_records(payload)
            frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator='\n')
            return WriteResult(success=True, artifact_type='csv_table',
                               message=f"Wrote {len(frame)} rows to {path.name}",
                               data={'path': str(path), 'rows': len(frame), 'columns': list(frame.columns)})
        except Exception as e:
            return self._failed(name, e)


class JsonSummaryWriter(ReportWriter):
    """A summary mapping to indented JSON."""

    suffix = '.json'

    def write(self, name: str, payload: Dict[str, Any]) -> WriteResult:
        try:
            path = self.target(name)
            with open(path, 'w') as fh:
                json.dump(_plain(payload), fh, indent=2, sort_keys=True)
                fh.write('\n')
            return WriteResult(success=True, artifact_type='json_summary',
                               message=f"Wrote summary {path.name}", data={'path': str(path)})
        except Exception as e:
            return self._failed(name, e)


class ManifestWriter(JsonSummaryWriter):
    """Run manifest, always named manifest.json."""

    def write(self, name: str, payload: Any) -> WriteResult:
        body = payload.to_dict() if hasattr(payload, 'to_dict') else payload
        result = super().write('manifest', body)
        if result.success:
            result.artifact_type = 'manifest'
        return result


class ReportWriterFactory:
    """Factory to create report writers."""

    _writers = {
        'csv': CsvTableWriter,
        'json': JsonSummaryWriter,
        'manifest': ManifestWriter,
    }

    @classmethod
    def create(cls, artifact_type: str, output_dir: Path) -> Optional[ReportWriter]:
        """Create writer for artifact type."""
        writer_class = cls._writers.get(artifact_type)
        if writer_class:
            return writer_class(output_dir)
        return None

    @classmethod
    def get_available_writers(cls) -> list[str]:
        return list(cls._writers.keys())
