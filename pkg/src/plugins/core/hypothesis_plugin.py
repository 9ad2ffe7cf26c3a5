"""
Hypothesis Plugin - Plugins
Uniqueness hypotheses on the drift and data, and optionally the
mollifier-independence table and the pathwise comparison check.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List

import sys
project_root = Path(__file__).parent.parent.parent.parent
sys.path.insert(0, str(project_root))

from src.analysis.uniqueness import comparison_check, hypothesis_report, mollifier_independence
from src.plugins.base_plugin import BasePlugin, PluginMetadata, ExperimentContext, ExperimentReport
from src.solver.data import data_from_descriptor

logger = logging.getLogger(__name__)


class HypothesisPlugin(BasePlugin):
    """Pass/warn/fail per hypothesis, plus the estimator-independence experiments."""

    def _get_metadata(self) -> PluginMetadata:
        return PluginMetadata(
            name="hypothesis_plugin",
            version="1.0.0",
            author="stochlab",
            description="Uniqueness hypotheses, mollifier independence and comparison",
            kind="hypothesis",
        )

    def run(self, context: ExperimentContext) -> ExperimentReport:
        config, problem = context.config, context.problem
        report = hypothesis_report(problem, int(context.option('resolution', 64)),
                                   int(context.option('n_times', 16)))
        tables: Dict[str, List[Dict[str, Any]]] = {
            'hypotheses': [dict(row, n_paths=config.n_paths, dt=config.dt, seed=config.seed)
                           for row in report.rows()]}
        summary: Dict[str, Any] = {'problem': problem.describe(), 'hypotheses': report.to_dict()}
        passed = report.passed
        common = dict(n_paths=config.n_paths, dt=config.dt, seed=config.seed, workers=context.workers)
        t = float(max(config.times))

        schedule = config.schedule('epsilon') if context.option('independence', False) else None
        if schedule is not None:
            table = mollifier_independence(problem, schedule, t=t,
                                           resolution=int(context.option('field_resolution', 16)), **common)
            tables['mollifier_independence'] = table.rows()
            summary['mollifier_independence'] = {'monotone': table.monotone,
                                                 'final_within_se': table.final_within_se}
            passed &= table.final_within_se

        upper = context.option('upper_data')
        if upper:
            upper_problem = problem.with_data(
                initial=data_from_descriptor(upper['initial']) if 'initial' in upper else None,
                boundary=data_from_descriptor(upper['boundary']) if 'boundary' in upper else None)
            comparison = comparison_check(problem, upper_problem, t,
                                          resolution=int(context.option('field_resolution', 16)), **common)
            summary['comparison'] = comparison.to_dict()
            tables['comparison'] = [dict(comparison.to_dict(), n_paths=config.n_paths, dt=config.dt,
                                         seed=config.seed)]
            passed &= comparison.passed

        if report.warnings:
            logger.warning(f"hypotheses with warnings: {report.warnings}")
        return self.report(context, tables=tables, summary=summary, acceptance_passed=bool(passed))
