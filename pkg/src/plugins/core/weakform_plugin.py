"""
Weak Form Plugin - Plugins
Residuals of the interior and boundary weak identities, the Ito conversion
corrections and the collar (coarea) boundary limits.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List

import sys
project_root = Path(__file__).parent.parent.parent.parent
sys.path.insert(0, str(project_root))

import numpy as np

from src.plugins.base_plugin import BasePlugin, PluginMetadata, ExperimentContext, ExperimentReport
from src.verification.test_functions import make_test_function, phi_from_descriptor
from src.verification.trace import (DeformationTrace, MollificationTrace, default_epsilon_schedule,
                                    default_tau_schedule, trace_table)
from src.verification.weakform import (DEFAULT_BOUNDARY_RESOLUTION, DEFAULT_INTERIOR_RESOLUTION,
                                       boundary_weakform_residual, closed_form_ito_boundary_check,
                                       coarea_boundary_limit, conversion_corrections, ito_boundary_residual,
                                       ito_residual, stratonovich_residual)

logger = logging.getLogger(__name__)

INTERIOR_IDENTITIES = ('stratonovich', 'ito')
BOUNDARY_IDENTITIES = ('boundary', 'ito_boundary', 'conversion')

# per-path agreement of the Stratonovich and measured Ito boundary residuals
BOOKKEEPING_TOLERANCE = 1e-10
# added to the closed-form band; constant data leaves only roundoff there
ROUNDOFF_FLOOR = 1e-9


def trace_estimator(context: ExperimentContext):
    """Deformation or mollification estimator from the experiment options."""
    domain = context.problem.domain
    method = context.option('trace_method', 'deformation')
    if method == 'mollification':
        eps = context.config.schedule('epsilon')
        return MollificationTrace(default_epsilon_schedule(domain) if eps is None else eps,
                                  context.option('lam'))
    taus = context.config.schedule('tau')
    return DeformationTrace(default_tau_schedule(domain) if taus is None else taus)


class WeakformPlugin(BasePlugin):
    """Weak-formulation residuals with per-term breakdown."""

    def _get_metadata(self) -> PluginMetadata:
        return PluginMetadata(
            name="weakform_plugin",
            version="1.0.0",
            author="stochlab",
            description="Weak-form, Ito conversion and collar-limit checks",
            kind="weakform",
        )

    def _interior_phi(self, context: ExperimentContext):
        descriptor = context.option('phi')
        if descriptor:
            return phi_from_descriptor(descriptor)
        domain = context.problem.domain
        return make_test_function('bump', {'center': domain.center.tolist(), 'radius': 0.5 * domain.inradius})

    def _boundary_phi(self, context: ExperimentContext):
        descriptor = context.option('boundary_phi')
        if descriptor:
            return phi_from_descriptor(descriptor)
        return make_test_function('coordinate', {'component': 0})

    def run(self, context: ExperimentContext) -> ExperimentReport:
        config, problem = context.config, context.problem
        identities = list(context.option('identities', list(INTERIOR_IDENTITIES)))
        bias = float(context.option('bias_band', 0.0))
        n_se = float(context.option('n_se', 3.0))
        interior_res = int(config.numerics.get('interior_resolution') or DEFAULT_INTERIOR_RESOLUTION)
        boundary_res = int(config.numerics.get('boundary_resolution') or DEFAULT_BOUNDARY_RESOLUTION)
        common = dict(n_paths=config.n_paths, dt=config.dt, times=config.times, seed=config.seed,
                      interior_resolution=interior_res, workers=context.workers)
        tables: Dict[str, List[Dict[str, Any]]] = {}
        summary: Dict[str, Any] = {'problem': problem.describe()}
        passed = True

        phi = self._interior_phi(context)
        for name, fn in (('stratonovich', stratonovich_residual), ('ito', ito_residual)):
            if name in identities:
                report = fn(problem, phi, **common)
                tables[f'weakform_{name}'] = report.rows()
                summary[name] = report.summary()
                passed &= report.within_band(n_se, bias)

        if any(name in identities for name in BOUNDARY_IDENTITIES):
            source = trace_table(problem, trace_estimator(context), config.n_paths, config.dt, config.seed,
                                 max(config.times), boundary_res, context.workers)
            gphi = self._boundary_phi(context)
            boundary_args = dict(common, boundary_resolution=boundary_res)
            reports = {}
            if 'boundary' in identities:
                reports['boundary'] = boundary_weakform_residual(problem, gphi, source, **boundary_args)
            if 'ito_boundary' in identities:
                reports['ito_boundary'] = ito_boundary_residual(problem, gphi, source, **boundary_args)
            for name, report in reports.items():
                tables[f'weakform_{name}'] = report.rows()
                summary[name] = report.summary()
                passed &= report.within_band(n_se, bias)
            if 'ito_boundary' in reports:
                if 'closed_form_residual' in reports['ito_boundary'].diagnostics:
                    band = float(context.option('closed_form_band', bias)) + ROUNDOFF_FLOOR
                    check = closed_form_ito_boundary_check(reports['ito_boundary'], n_se, band)
                    summary['ito_boundary']['closed_form'] = check
                    passed &= check['within_band']
                else:
                    logger.warning("trace estimator gives no normal slope; closed-form Ito boundary "
                                   "residual not checked")
                    summary['ito_boundary']['closed_form'] = None
            if len(reports) == 2:
                gap = float(np.max(np.abs(reports['boundary'].per_path - reports['ito_boundary'].per_path)))
                summary['bookkeeping_gap'] = gap
                passed &= gap <= BOOKKEEPING_TOLERANCE
            if 'conversion' in identities:
                corrections = conversion_corrections(problem, gphi, source, **boundary_args)
                tables['conversion_corrections'] = corrections.rows()
                summary['conversion'] = {name: {'mean': stats[0].tolist(), 'se': stats[1].tolist()}
                                         for name, stats in corrections.stats().items()}

        if 'coarea' in identities:
            component = int(context.option('coarea_component', 0))
            table = coarea_boundary_limit(lambda p: np.ones(len(p)), make_test_function(
                'coordinate', {'component': component}), problem.domain, component, config.schedule('mu'),
                boundary_res)
            tables['coarea'] = table.rows()
            summary['coarea'] = table.to_dict()
            passed &= table.monotone and float(table.errors[-1]) <= 0.02 * abs(table.direct)

        logger.info(f"weakform identities {identities}: acceptance={passed}")
        return self.report(context, tables=tables, summary=summary, acceptance_passed=bool(passed))
