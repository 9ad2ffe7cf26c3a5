"""
Renormalization Plugin - Plugins
v = E[beta(u)] on an interior grid, its parabolic residual against the
noise floor, the mass trend and the finite-difference duality check.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List

import sys
project_root = Path(__file__).parent.parent.parent.parent
sys.path.insert(0, str(project_root))

import numpy as np

from src.analysis.parabolic_oracle import oracle_for
from src.analysis.renormalization import (interior_grid, parabolic_residual, renormalized_expectation,
                                          renormalized_mass)
from src.plugins.base_plugin import BasePlugin, PluginMetadata, ExperimentContext, ExperimentReport
from src.verification.test_functions import get_beta

logger = logging.getLogger(__name__)


class RenormPlugin(BasePlugin):
    """Interior parabolic equation for the renormalized expectation."""

    def _get_metadata(self) -> PluginMetadata:
        return PluginMetadata(
            name="renorm_plugin",
            version="1.0.0",
            author="stochlab",
            description="Renormalized expectation, parabolic residual and oracle duality",
            kind="renorm",
        )

    def run(self, context: ExperimentContext) -> ExperimentReport:
        config, problem = context.config, context.problem
        beta = get_beta(context.option('beta', 'square'))
        grid = interior_grid(problem.domain, int(context.option('points_per_axis', 17)), context.option('extent'))
        times = config.times
        common = dict(n_paths=config.n_paths, dt=config.dt, seed=config.seed, workers=context.workers)
        tables: Dict[str, List[Dict[str, Any]]] = {}
        summary: Dict[str, Any] = {'problem': problem.describe(), 'beta': beta.name}

        v = renormalized_expectation(problem, beta, grid, times, **common)
        tables['expectation'] = v.rows()
        passed = True
        if len(times) >= 2:
            residual = parabolic_residual(v, problem.drift)
            summary['parabolic_residual'] = residual.to_dict()
            tables['parabolic_residual'] = [
                {'t': float(t), 'rms': float(np.sqrt(np.mean(residual.values[k] ** 2))),
                 'noise_floor': float(np.sqrt(np.mean(residual.noise_floor[k] ** 2))),
                 'n_paths': config.n_paths, 'dt': config.dt, 'seed': config.seed}
                for k, t in enumerate(residual.times)]
            passed &= residual.within_floor

        if context.option('check_mass', False):
            trend = renormalized_mass(problem, beta, times, int(context.option('mass_resolution', 24)), **common)
            tables['mass'] = [{'t': float(t), 'mass': float(m), 'se': float(s), 'n_paths': config.n_paths,
                               'dt': config.dt, 'seed': config.seed}
                              for t, m, s in zip(trend.times, trend.mass, trend.se)]
            summary['mass_non_increasing'] = trend.non_increasing
            passed &= trend.non_increasing

        oracle_opts = context.option('oracle')
        if oracle_opts and beta.name == 'id':
            oracle = oracle_for(problem, int(oracle_opts.get('resolution', 64)),
                                float(oracle_opts.get('dt_grid', config.dt)), times)
            bias = float(oracle_opts.get('bias_band', 0.0))
            rows, ok = [], True
            for k, t in enumerate(times):
                exact = oracle.evaluate(float(t), grid.points)
                gap = np.abs(v.values[k] - exact)
                ok &= bool(np.all(gap <= 3.0 * v.se[k] + bias))
                rows.append({'t': float(t), 'max_gap': float(np.max(gap)), 'max_se': float(np.max(v.se[k])),
                             'n_paths': config.n_paths, 'dt': config.dt, 'seed': config.seed})
            tables['oracle_duality'] = rows
            summary['oracle_duality'] = ok
            passed &= ok

        logger.info(f"renorm beta={beta.name}: acceptance={passed}")
        return self.report(context, tables=tables, summary=summary, acceptance_passed=bool(passed))
