"""
Run Manifest - Lab
Provenance of one experiment run: config echo, package versions, wall time,
output files and a checksum over the numeric CSV bodies.
"""

from __future__ import annotations

import hashlib
import logging
import platform
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
import scipy

import src
from src.lab.config import ExperimentConfig

logger = logging.getLogger(__name__)


def artifact_versions() -> Dict[str, str]:
    return {
        'stochlab': src.__version__,
        'python': platform.python_version(),
        'numpy': np.__version__,
        'scipy': scipy.__version__,
        'pandas': pd.__version__,
    }


def numeric_checksum(paths: List[Path]) -> str:
    """sha256 over CSV file bytes in file-name order; JSON summaries carry timestamps and are left out."""
    digest = hashlib.sha256()
    for path in sorted((Path(p) for p in paths if str(p).endswith('.csv')), key=lambda p: p.name):
        digest.update(path.name.encode('utf-8'))
        digest.update(b'\0')
        digest.update(path.read_bytes())
    return digest.hexdigest()


@dataclass
class RunManifest:
    config: Dict[str, Any]
    versions: Dict[str, str]
    wall_time: float
    outputs: List[str]
    checksum: str
    acceptance_passed: Optional[bool] = None
    started_at: str = field(default_factory=lambda: datetime.now().isoformat(timespec='seconds'))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'config': self.config,
            'versions': self.versions,
            'started_at': self.started_at,
            'wall_time_seconds': self.wall_time,
            'outputs': self.outputs,
            'checksum_sha256': self.checksum,
            'acceptance_passed': self.acceptance_passed,
        }


def build_manifest(config: ExperimentConfig, outputs: List[Path], wall_time: float,
                   acceptance_passed: Optional[bool] = None) -> RunManifest:
    outputs = [Path(p) for p in outputs]
    manifest = RunManifest(
        config=config.to_dict(),
        versions=artifact_versions(),
        wall_time=float(wall_time),
        outputs=sorted(p.name for p in outputs),
        checksum=numeric_checksum(outputs),
        acceptance_passed=acceptance_passed,
    )
    logger.debug(f"manifest checksum {manifest.checksum[:12]} over {len(outputs)} outputs")
    return manifest
