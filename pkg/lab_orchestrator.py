#!/usr/bin/env python3
"""
Stochastic Transport Lab Orchestrator
Config → Plugin → Reports: validates an experiment document, dispatches it to
the plugin for its kind and writes CSV tables, a JSON summary and the manifest.

    python lab_orchestrator.py solve --config config/experiments/solve.yaml
    python lab_orchestrator.py validate --config my_experiment.yaml
"""

import sys
from pathlib import Path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

import argparse
import json
import logging
import time
from typing import List, Optional, Union

from src.core.exceptions import ConfigValidationError, NumericError, StencilEscapeError
from src.lab.config import (EXPERIMENT_KINDS, ExperimentConfig, deep_merge, load_defaults, load_document,
                            validate)
from src.lab.manifest import RunManifest, build_manifest
from src.plugins.base_plugin import ExperimentContext, ExperimentReport
from src.plugins.plugin_manager import PluginManager
from src.reporting.writers import ReportWriterFactory
from src.solver.parallel import worker_count

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INTERRUPTED = 1
EXIT_INVALID = 2
EXIT_NUMERIC = 3
EXIT_ACCEPTANCE = 4


def configure_logging(quiet: bool = False, log_dir: Union[str, Path] = 'logs'):
    """File + console logging, the file under logs/stochlab.log."""
    log_dir = Path(log_dir)
    log_dir.mkdir(parents=True, exist_ok=True)
    logging.basicConfig(
        level=logging.WARNING if quiet else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(log_dir / 'stochlab.log'),
            logging.StreamHandler()
        ],
        force=True,
    )


class LabOrchestrator:
    """
    Runs one experiment end to end.
    Coordinates: ExperimentConfig → PluginManager → ReportWriters → RunManifest
    """

    def __init__(self, config: Optional[Union[ExperimentConfig, dict]] = None, workers: Optional[int] = None):
        """
        Initialize the orchestrator.

        Args:
            config: Validated config, or a document merged over the defaults
            workers: Worker threads per path fan-out (STOCHLAB_WORKERS otherwise)
        """
        if isinstance(config, ExperimentConfig):
            self.config = config
        else:
            self.config = ExperimentConfig.from_dict(config or {}, self._default_config())
        self.workers = workers if workers is not None else worker_count()
        self.plugin_manager = PluginManager()
        self.last_report: Optional[ExperimentReport] = None

        logger.info(f"🚀 Lab orchestrator initialized for kind {self.config.kind}")

    def _default_config(self) -> dict:
        """Defaults file, falling back to the built-in defaults."""
        return load_defaults()

    def run(self) -> RunManifest:
        """Dispatch to the experiment plugin and write every artifact."""
        started = time.perf_counter()
        if not self.plugin_manager.registry:
            self.plugin_manager.load_all_plugins()

        context = ExperimentContext(config=self.config, workers=self.workers)
        report = self.plugin_manager.run(context)
        self.last_report = report

        out = Path(self.config.output_dir)
        outputs = []
        csv_writer = ReportWriterFactory.create('csv', out)
        for name, rows in sorted(report.tables.items()):
            result = csv_writer.write(name, rows)
            if result.success:
                outputs.append(result.path)
            else:
                logger.warning(f"⚠️  {result.message}")

        summary = ReportWriterFactory.create('json', out).write('summary', report.to_dict())
        if summary.success:
            outputs.append(summary.path)

        manifest = build_manifest(self.config, outputs, time.perf_counter() - started, report.acceptance_passed)
        written = ReportWriterFactory.create('manifest', out).write('manifest', manifest)
        if not written.success:
            logger.error(f"❌ {written.message}")

        logger.info(f"📊 {len(outputs)} artifact(s) in {out}, checksum {manifest.checksum[:12]}, "
                     f"acceptance={report.acceptance_passed}")
        return manifest


def run(config: Union[ExperimentConfig, dict], workers: Optional[int] = None) -> RunManifest:
    """Run one experiment; see LabOrchestrator.run."""
    return LabOrchestrator(config, workers).run()


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='lab_orchestrator',
                                     description='Stochastic transport Monte Carlo lab')
    parser.add_argument('command', choices=list(EXPERIMENT_KINDS) + ['validate'])
    parser.add_argument('--config', type=Path, help='experiment document (YAML or JSON)')
    parser.add_argument('--out', type=Path, help='output directory')
    parser.add_argument('--seed', type=int, help='master seed override')
    parser.add_argument('--paths', type=int, help='number of paths override')
    parser.add_argument('--dt', type=float, help='time step override')
    parser.add_argument('--quiet', action='store_true', help='log warnings and errors only')
    return parser


def _document(args) -> dict:
    document = load_document(args.config) if args.config else {}
    if args.command != 'validate':
        document['kind'] = args.command
    numerics = document.setdefault('numerics', {})
    for key, value in (('seed', args.seed), ('n_paths', args.paths), ('dt', args.dt)):
        if value is not None:
            numerics[key] = value
    if args.out is not None:
        document['output_dir'] = str(args.out)
    return document


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    configure_logging(args.quiet)

    try:
        document = _document(args)
        if args.command == 'validate':
            report = validate(deep_merge(load_defaults(), document))
            print(json.dumps(report.to_dict(), indent=2))
            return EXIT_OK if report.ok else EXIT_INVALID

        manifest = run(ExperimentConfig.from_dict(document, load_defaults()))
        if manifest.acceptance_passed is False:
            logger.warning("⚠️  acceptance thresholds not met")
            return EXIT_ACCEPTANCE
        logger.info("✅ Experiment finished")
        return EXIT_OK

    except ConfigValidationError as e:
        for failure in e.failures:
            logger.error(f"❌ {failure}")
        return EXIT_INVALID
    except (NumericError, StencilEscapeError) as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        return EXIT_NUMERIC
    except KeyboardInterrupt:
        logger.info("\n⚠️  Keyboard interrupt received")
        return EXIT_INTERRUPTED


if __name__ == "__main__":
    sys.exit(main())
