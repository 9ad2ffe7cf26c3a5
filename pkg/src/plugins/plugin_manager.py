"""
Plugin Manager - Plugins
Registry of experiment plugins keyed by the experiment kind they run
"""

import importlib
import logging
import pkgutil
from types import ModuleType
from typing import Dict, List, Optional

from src.core.exceptions import UsageError
from src.lab.config import EXPERIMENT_KINDS
from src.plugins.base_plugin import BasePlugin, ExperimentContext, ExperimentReport

logger = logging.getLogger(__name__)

PLUGIN_PACKAGE = 'src.plugins.core'


def plugin_class(module: ModuleType) -> Optional[type]:
    """The BasePlugin subclass a *_plugin module defines, if any."""
    for attr_name in dir(module):
        attr = getattr(module, attr_name)
        if (isinstance(attr, type) and issubclass(attr, BasePlugin) and attr is not BasePlugin
                and attr.__module__ == module.__name__):
            return attr
    return None


class PluginManager:
    """
    One plugin per experiment kind. Kinds outside the configuration schema
    and a second plugin for a kind already taken are rejected.
    """

    def __init__(self, package: str = PLUGIN_PACKAGE):
        self.package = package
        self.registry: Dict[str, BasePlugin] = {}
        logger.info("🔌 Plugin Manager initialized")

    @property
    def kinds(self) -> List[str]:
        return sorted(self.registry)

    def discover_modules(self) -> List[str]:
        """Dotted names of the *_plugin modules in the plugin package."""
        package = importlib.import_module(self.package)
        return sorted(f"{self.package}.{info.name}" for info in pkgutil.iter_modules(package.__path__)
                      if info.name.endswith('_plugin'))

    def register(self, plugin: BasePlugin) -> None:
        kind = plugin.metadata.kind
        if kind not in EXPERIMENT_KINDS:
            raise UsageError(f"{plugin.metadata.name} runs unknown experiment kind {kind!r} "
                             f"(known: {list(EXPERIMENT_KINDS)})")
        if kind in self.registry:
            raise UsageError(f"experiment kind {kind!r} is already run by {self.registry[kind].metadata.name}")
        self.registry[kind] = plugin
        logger.info(f"✅ {plugin.metadata.name} v{plugin.metadata.version} runs kind {kind}")

    def load_all_plugins(self) -> List[str]:
        """Import every plugin module, register its plugin and return the covered kinds."""
        logger.info("🔌 Loading plugins...")
        for module_name in self.discover_modules():
            try:
                module = importlib.import_module(module_name)
            except ImportError as e:
                logger.error(f"❌ Failed to import {module_name}: {e}")
                continue
            cls = plugin_class(module)
            if cls is None:
                logger.error(f"❌ No plugin class found in {module_name}")
                continue
            self.register(cls())
        missing = sorted(set(EXPERIMENT_KINDS) - set(self.registry))
        if missing:
            logger.warning(f"No plugin for experiment kinds {missing}")
        return self.kinds

    def plugin_for(self, kind: str) -> Optional[BasePlugin]:
        return self.registry.get(kind)

    def run(self, context: ExperimentContext) -> ExperimentReport:
        """
        Run the plugin registered for the context's experiment kind.

        Numeric errors propagate to the caller.
        """
        plugin = self.plugin_for(context.kind)
        if plugin is None:
            raise LookupError(f"no plugin for experiment kind {context.kind!r} (registered: {self.kinds})")
        logger.info(f"🚀 Running {plugin.metadata.name} for kind {context.kind}")
        report = plugin.run(context)
        logger.info(f"📊 {plugin.metadata.name}: {len(report.tables)} table(s), "
                    f"acceptance={report.acceptance_passed}")
        return report
