"""
Solve Plugin - Plugins
Monte Carlo field of the representation solution on interior quadrature
nodes, with the maximum principle and constant preservation checked.
"""

import logging
from pathlib import Path

import sys
project_root = Path(__file__).parent.parent.parent.parent
sys.path.insert(0, str(project_root))

import numpy as np

from src.plugins.base_plugin import BasePlugin, PluginMetadata, ExperimentContext, ExperimentReport
from src.solver.representation import mc_field

logger = logging.getLogger(__name__)


class SolvePlugin(BasePlugin):
    """E u(t, x) on interior nodes at each configured time."""

    def _get_metadata(self) -> PluginMetadata:
        return PluginMetadata(
            name="solve_plugin",
            version="1.0.0",
            author="stochlab",
            description="Monte Carlo field of the representation solution",
            kind="solve",
        )

    def run(self, context: ExperimentContext) -> ExperimentReport:
        config, problem = context.config, context.problem
        resolution = int(context.option('resolution', 16))
        M = problem.data_bound
        rows, per_time = [], []
        bound_ok, exact_ok = True, True
        c = problem.constant_value
        for t in config.times:
            snap = mc_field(problem, float(t), resolution, config.n_paths, config.dt, config.seed,
                            workers=context.workers)
            rows.extend(snap.rows())
            bound_ok &= bool(np.all(np.abs(snap.mean) <= M * (1 + 1e-12) + 1e-12))
            if c is not None:
                exact_ok &= bool(np.all(np.abs(snap.mean - c) <= 1e-12) and np.all(snap.se == 0.0))
            per_time.append({'t': float(t), 'min': float(np.min(snap.mean)), 'max': float(np.max(snap.mean)),
                             'max_se': float(np.max(snap.se)), 'nodes': len(snap.points)})
        summary = {'problem': problem.describe(), 'fields': per_time, 'maximum_principle': bound_ok}
        if c is not None:
            summary['constant_preserved'] = exact_ok
        return self.report(context, tables={'field': rows}, summary=summary,
                           acceptance_passed=bound_ok and exact_ok)
