"""
Bundled named configurations.
"""
from fnmatch import fnmatch
import logging
from os import walk
from os.path import dirname, exists, join, splitext

import squeeze_film.scenarios as scenario_dir

from .config import SolverConfig

_LOGGER = logging.getLogger(__name__)


def available_scenarios():
    """List the bundled scenario names."""
    _SCENARIO_DIR = dirname(scenario_dir.__file__)

    for path, dirs, files in walk(_SCENARIO_DIR):
        for basename in sorted(files):
            if fnmatch(basename, "*.yaml"):
                yield splitext(basename)[0]


def scenario_path(name):
    return join(dirname(scenario_dir.__file__), name + ".yaml")


def get_scenario(name):
    """
    Return the config of a bundled scenario, or None if there is none.
    """
    fpath = scenario_path(name)
    if exists(fpath):
        return SolverConfig.load(fpath)
    _LOGGER.debug("No scenario named %s", name)
    return None
