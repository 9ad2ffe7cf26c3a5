"""
Trace Plugin - Plugins
Stochastic trace samples, the data-bound check, estimator stability, the
renormalized trace identity and commutator decay.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List

import sys
project_root = Path(__file__).parent.parent.parent.parent
sys.path.insert(0, str(project_root))

import numpy as np

from src.plugins.base_plugin import BasePlugin, PluginMetadata, ExperimentContext, ExperimentReport
from src.verification.test_functions import get_beta, make_test_function, phi_from_descriptor
from src.verification.trace import (DeformationTrace, MollificationTrace, commutator_P, commutator_R,
                                    commutator_decay, default_epsilon_schedule, default_tau_schedule,
                                    trace_bound_check, trace_by_deformation, trace_by_mollification,
                                    trace_stability, trace_table, trace_weakform_check)

logger = logging.getLogger(__name__)


class TracePlugin(BasePlugin):
    """gamma u on boundary nodes and everything checked about it."""

    def _get_metadata(self) -> PluginMetadata:
        return PluginMetadata(
            name="trace_plugin",
            version="1.0.0",
            author="stochlab",
            description="Stochastic trace estimation, bound, stability and commutators",
            kind="trace",
        )

    def _schedules(self, context: ExperimentContext):
        domain = context.problem.domain
        taus = context.config.schedule('tau')
        eps = context.config.schedule('epsilon')
        return (np.asarray(default_tau_schedule(domain) if taus is None else taus),
                np.asarray(default_epsilon_schedule(domain) if eps is None else eps))

    def run(self, context: ExperimentContext) -> ExperimentReport:
        config, problem = context.config, context.problem
        nodes = int(context.option('nodes', 32))
        method = context.option('method', 'deformation')
        taus, eps = self._schedules(context)
        common = dict(n_paths=config.n_paths, dt=config.dt, seed=config.seed, workers=context.workers)
        tables: Dict[str, List[Dict[str, Any]]] = {}
        summary: Dict[str, Any] = {'problem': problem.describe(), 'method': method}

        if method == 'mollification':
            samples = trace_by_mollification(problem, config.times, nodes, eps, lam=context.option('lam'), **common)
            estimator = MollificationTrace(eps, context.option('lam'))
        else:
            samples = trace_by_deformation(problem, config.times, nodes, taus, **common)
            estimator = DeformationTrace(taus)
        tables['trace_samples'] = [s.row(config.dt, config.seed) for s in samples]
        bound = trace_bound_check(samples)
        summary['bound'] = bound.to_dict()

        against = context.option('stability_against', 'halved')
        if against == 'mollification':
            other = MollificationTrace(eps, context.option('lam'))
        elif method == 'mollification':
            other = MollificationTrace(eps / 2.0, context.option('lam'))
        else:
            other = DeformationTrace(taus / 2.0)
        stability = trace_stability(problem, estimator, other, config.times, nodes=nodes, **common)
        summary['stability'] = stability.to_dict()

        beta_name = context.option('beta')
        if beta_name:
            source = trace_table(problem, estimator, config.n_paths, config.dt, config.seed, max(config.times),
                                 int(config.numerics.get('boundary_resolution') or 64), context.workers)
            phi_desc = context.option('phi')
            phi = phi_from_descriptor(phi_desc) if phi_desc else make_test_function('constant', {'value': 1.0})
            report = trace_weakform_check(problem, source, get_beta(beta_name), phi, config.n_paths, config.dt,
                                          config.times, config.seed,
                                          boundary_resolution=int(config.numerics.get('boundary_resolution') or 64),
                                          workers=context.workers)
            tables['trace_weakform'] = report.rows()
            summary['trace_weakform'] = report.summary()

        commutator_eps = np.asarray(context.option('commutator_epsilons', eps.tolist()), dtype=float)
        R = [commutator_R(problem.drift, problem.u0, problem.domain, float(e),
                          probe=context.option('probe', 'interior')) for e in commutator_eps]
        P = [commutator_P(problem.u0, problem.domain, float(e), probe='collar') for e in commutator_eps]
        tables['commutators'] = [{'epsilon': float(e), 'R_l1': r.l1_norm, 'P_l1': p.l1_norm,
                                  'n_paths': config.n_paths, 'dt': config.dt, 'seed': config.seed}
                                 for e, r, p in zip(commutator_eps, R, P)]
        summary['commutators'] = {'R_slope': commutator_decay(R), 'P_slope': commutator_decay(P)}

        passed = bound.passed and stability.passed
        logger.info(f"trace: {len(samples)} samples, bound={bound.passed}, stability={stability.passed}")
        return self.report(context, tables=tables, summary=summary, acceptance_passed=bool(passed))
