import copy
from pathlib import Path

import numpy as np
import pytest

from src.core.exceptions import ArgumentError, UsageError
from src.lab.config import ExperimentConfig, load_config, load_defaults
from src.plugins.base_plugin import BasePlugin, ExperimentContext, PluginMetadata
from src.plugins.plugin_manager import PluginManager

CONFIGS = Path(__file__).parent.parent / 'config' / 'experiments'

KINDS = {'solve', 'weakform', 'trace', 'renorm', 'convergence', 'hypothesis'}


@pytest.fixture(scope='module')
def manager():
    manager = PluginManager()
    manager.load_all_plugins()
    return manager


def context_for(document, **experiment):
    doc = copy.deepcopy(document)
    doc.setdefault('experiment', {}).update(experiment)
    return ExperimentContext(ExperimentConfig.from_dict(doc, load_defaults()), workers=1)


def constant_document(lab_document, kind, **numerics):
    doc = copy.deepcopy(lab_document)
    doc['kind'] = kind
    doc['experiment'] = {}
    doc['problem']['drift'] = {'name': 'strain'}
    doc['problem']['horizon'] = 0.5
    doc['numerics'].update({'dt': 0.05, 'n_paths': 4, 'seed': 1}, **numerics)
    return doc


class TestPluginManager:

    def test_every_kind_has_a_plugin(self, manager):
        assert set(manager.kinds) == KINDS
        for kind in KINDS:
            plugin = manager.plugin_for(kind)
            assert plugin.metadata.kind == kind
            assert plugin.metadata.author == 'stochlab'

    def test_discovers_plugin_modules(self):
        modules = PluginManager().discover_modules()
        assert 'src.plugins.core.solve_plugin' in modules
        assert all(name.endswith('_plugin') for name in modules)

    def test_unknown_kind(self, lab_document):
        with pytest.raises(LookupError):
            PluginManager().run(context_for(lab_document))

    def test_second_plugin_for_a_kind(self, manager):
        fresh = PluginManager()
        fresh.register(manager.plugin_for('solve'))
        with pytest.raises(UsageError):
            fresh.register(manager.plugin_for('solve'))

    def test_kind_outside_the_schema(self):
        class Stray(BasePlugin):
            def _get_metadata(self):
                return PluginMetadata(name='stray_plugin', version='0.0.1', author='stochlab',
                                      description='no such experiment', kind='forecast')

            def run(self, context):
                return self.report(context)

        with pytest.raises(UsageError):
            PluginManager().register(Stray())

    def test_context_options(self, lab_document):
        context = context_for(lab_document, nodes=None)
        assert context.kind == 'solve'
        assert context.option('resolution') == 6
        assert context.option('nodes', 12) == 12
        assert context.problem.horizon == 0.2


class TestSolvePlugin:

    def test_constant_data(self, manager, lab_document):
        report = manager.run(context_for(lab_document))
        assert report.acceptance_passed
        assert report.summary['constant_preserved']
        assert report.summary['maximum_principle']
        assert {row['mean'] for row in report.tables['field']} == {0.7}
        assert report.to_dict()['tables'] == {'field': len(report.tables['field'])}


class TestWeakformPlugin:

    def test_boundary_bookkeeping(self, manager, lab_document):
        doc = copy.deepcopy(lab_document)
        doc['kind'] = 'weakform'
        doc['problem']['initial'] = {'name': 'smooth_bump', 'parameters': {'radius': 0.6}}
        doc['problem']['boundary'] = {'name': 'constant', 'parameters': {'value': 0.0}}
        doc['numerics'].update({'dt': 0.02, 'n_paths': 3, 'times': [0.1, 0.2], 'interior_resolution': 16,
                                'boundary_resolution': 16})
        report = manager.run(context_for(doc, identities=['stratonovich', 'ito', 'boundary', 'ito_boundary',
                                                          'conversion']))
        assert report.summary['bookkeeping_gap'] <= 1e-10
        assert {'weakform_stratonovich', 'weakform_ito', 'weakform_boundary', 'weakform_ito_boundary',
                'conversion_corrections'} == set(report.tables)

    def test_closed_form_ito_boundary_is_checked(self, manager, lab_document):
        doc = copy.deepcopy(lab_document)
        doc['kind'] = 'weakform'
        doc['numerics'].update({'n_paths': 2, 'times': [0.1, 0.2], 'interior_resolution': 8,
                                'boundary_resolution': 32})
        report = manager.run(context_for(doc, identities=['ito_boundary'], boundary_phi={'name': 'constant'},
                                         bias_band=1e-9))
        closed = report.summary['ito_boundary']['closed_form']
        assert report.acceptance_passed
        assert closed['within_band']
        assert closed['curvature_mean'][-1] == pytest.approx(0.7 * 0.2 * np.pi, rel=1e-2)
        assert closed['literal_mean'][-1] == pytest.approx(-closed['curvature_mean'][-1], abs=1e-9)

    def test_closed_form_band_gates_acceptance(self, manager, lab_document):
        doc = copy.deepcopy(lab_document)
        doc['kind'] = 'weakform'
        doc['problem']['initial'] = {'name': 'smooth_bump', 'parameters': {'radius': 0.6}}
        doc['numerics'].update({'dt': 0.02, 'n_paths': 2, 'times': [0.2], 'interior_resolution': 8,
                                'boundary_resolution': 16})
        report = manager.run(context_for(doc, identities=['ito_boundary'], bias_band=1e3,
                                         closed_form_band=-1e3))
        assert report.summary['ito_boundary']['closed_form']['within_band'] is False
        assert not report.acceptance_passed

    def test_coarea_limit(self, manager, lab_document):
        doc = copy.deepcopy(lab_document)
        doc['kind'] = 'weakform'
        doc['numerics']['schedules'] = {'mu': [0.2, 0.1, 0.05, 0.025, 0.0125]}
        report = manager.run(context_for(doc, identities=['coarea']))
        assert report.acceptance_passed
        assert report.summary['coarea']['monotone']


class TestTracePlugin:

    def test_constant_data(self, manager, lab_document):
        doc = constant_document(lab_document, 'trace', boundary_resolution=16)
        report = manager.run(context_for(doc, nodes=8, beta='square'))
        assert report.acceptance_passed
        assert report.summary['bound']['passed']
        assert report.summary['stability']['passed']
        assert abs(report.summary['trace_weakform']['mean_residual'][0]) < 1e-9
        assert {'trace_samples', 'trace_weakform', 'commutators'} == set(report.tables)

    def test_mollification_estimator(self, manager, lab_document):
        doc = constant_document(lab_document, 'trace')
        report = manager.run(context_for(doc, nodes=8, method='mollification'))
        assert report.summary['method'] == 'mollification'
        assert all(row['mean_trace'] == pytest.approx(0.7) for row in report.tables['trace_samples'])


class TestRenormPlugin:

    def test_constant_data(self, manager, lab_document):
        doc = constant_document(lab_document, 'renorm', times=[0.25, 0.3, 0.35])
        report = manager.run(context_for(doc, beta='square', points_per_axis=7, check_mass=True, mass_resolution=12))
        assert report.acceptance_passed
        assert report.summary['mass_non_increasing']
        assert report.summary['parabolic_residual']['aggregate'] < 1e-9

    def test_oracle_duality_for_constant_data(self, manager, lab_document):
        doc = constant_document(lab_document, 'renorm', times=[0.25, 0.5])
        report = manager.run(context_for(doc, beta='id', points_per_axis=7,
                                         oracle={'resolution': 16, 'dt_grid': 0.05, 'bias_band': 1e-9}))
        assert report.summary['oracle_duality']
        assert report.tables['oracle_duality'][0]['max_gap'] < 1e-9


class TestConvergencePlugin:

    def test_closed_form_reference(self, manager):
        config = load_config(CONFIGS / 'convergence.yaml')
        report = manager.run(ExperimentContext(config, workers=1))
        slope = report.summary['slope']
        assert 0.9 <= slope <= 1.1
        assert report.acceptance_passed
        errors = [row['max_error'] for row in report.tables['convergence']]
        assert np.all(np.diff(errors) < 0)

    def test_needs_two_halvings(self, manager):
        config = load_config(CONFIGS / 'convergence.yaml')
        config.experiment['halvings'] = 1
        with pytest.raises(ArgumentError):
            manager.run(ExperimentContext(config, workers=1))

    def test_unknown_reference(self, manager):
        config = load_config(CONFIGS / 'convergence.yaml')
        config.experiment['reference'] = 'richardson'
        with pytest.raises(ArgumentError):
            manager.run(ExperimentContext(config, workers=1))


class TestHypothesisPlugin:

    def test_translation_with_comparison_and_independence(self, manager):
        config = load_config(CONFIGS / 'hypothesis.yaml').with_overrides(n_paths=4, dt=0.05)
        config.numerics['schedules'] = {'epsilon': [0.2, 0.1]}
        config.experiment.update({'independence': True, 'field_resolution': 6, 'resolution': 32})
        report = manager.run(ExperimentContext(config, workers=1))
        assert report.acceptance_passed
        assert report.summary['comparison']['passed']
        assert report.summary['mollifier_independence']['final_within_se']
        assert {row['name'] for row in report.tables['hypotheses']} >= {'bounded_drift', 'compatibility',
                                                                        'data_bound'}
