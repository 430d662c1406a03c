"""
Run artifacts: diagnostics documents, CSV tables and the run manifest.
"""
from __future__ import annotations

from datetime import datetime, timezone
import json
import logging
import os
from pathlib import Path

import numpy as np
from slugify import slugify

from .const import DEFAULT_OUTPUT_ROOT, DOMAIN, ENV_OUTPUT_ROOT
from .grid import TrajectoryPath, path_to_csv
from .helpers.log import non_json

_LOGGER = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
SWEEP_HEADER = "beta_F,w_min,solvable"
FIELD_NAMES = ("u", "v", "w")


def package_version():
    """Version string from the package manifest."""
    with open(Path(__file__).parent / "manifest.json", encoding="utf-8") as f:
        return json.load(f)["version"]


def to_json(data):
    """Stable JSON text: sorted keys, numpy values converted."""
    return json.dumps(data, indent=2, sort_keys=True, default=non_json)


def write_json(data, fname):
    Path(fname).write_text(to_json(data) + "\n", encoding="utf-8")


def output_root():
    return Path(os.environ.get(ENV_OUTPUT_ROOT, DEFAULT_OUTPUT_ROOT))


def run_directory(cfg, out=None):
    """
    Where a run writes its artifacts.

    An explicit out wins, then the output.dir setting, then a slug of the
    config name and hash under the output root.
    """
    if out is not None:
        return Path(out)
    if cfg.output_dir:
        return Path(cfg.output_dir)
    stem = Path(cfg.source).stem if cfg.source else DOMAIN
    return output_root() / slugify(f"{stem} {cfg.sha256[:8]}")


def sweep_csv(results):
    """One row per steady solve with its load, minimum gap and solvability."""
    rows = [
        f"{r.beta_F!r},{r.min_w!r},{'true' if r.solvable else 'false'}"
        for r in results
    ]
    return "\n".join([SWEEP_HEADER, *rows]) + "\n"


def sweep_to_csv(results, fname):
    Path(fname).write_text(sweep_csv(results), encoding="utf-8")


def field_difference(a: TrajectoryPath, b: TrajectoryPath):
    """
    max|a - b| over the common time rows, relative to max(1, max|b|).
    """
    rows = min(a.values.shape[0], b.values.shape[0])
    gap = np.abs(a.values[:rows] - b.values[:rows])
    scale = max(1.0, float(np.max(np.abs(b.values[:rows]))))
    return float(gap.max()) / scale


class RunManifest:
    """Index of every file a run wrote, with the config hash and timestamps."""

    def __init__(self, directory, cfg):
        self._directory = Path(directory)
        self._cfg = cfg
        self._artifacts = []
        self._summary = {}
        self._started = _now()
        self._finished = None

    @property
    def directory(self):
        return self._directory

    @property
    def artifacts(self):
        return list(self._artifacts)

    def path(self, *parts):
        """Register a relative artifact path and return its absolute path."""
        relative = "/".join(parts)
        if relative == MANIFEST_NAME:
            raise ValueError(f"{MANIFEST_NAME} is written by the manifest itself")
        if relative in self._artifacts:
            raise ValueError(f"artifact {relative} already recorded")
        self._artifacts.append(relative)
        target = self._directory.joinpath(*parts)
        target.parent.mkdir(parents=True, exist_ok=True)
        return target

    def write_paths(self, folder, paths):
        """Write a (u, v, w) triple as folder/{u,v,w}.csv."""
        for name, path in zip(FIELD_NAMES, paths):
            path_to_csv(path, self.path(folder, f"{name}.csv"))

    def summarize(self, **items):
        self._summary.update(items)

    def as_dict(self):
        return {
            "package": DOMAIN,
            "version": package_version(),
            "config_sha256": self._cfg.sha256,
            "config_source": str(self._cfg.source) if self._cfg.source else None,
            "started": self._started,
            "finished": self._finished,
            "artifacts": sorted([*self._artifacts, MANIFEST_NAME]),
            "summary": self._summary,
        }

    def write(self):
        """Write manifest.json; called once, after every other artifact."""
        self._finished = _now()
        self._directory.mkdir(parents=True, exist_ok=True)
        write_json(self.as_dict(), self._directory / MANIFEST_NAME)
        _LOGGER.info(
            "Wrote %d artifacts to %s", len(self._artifacts) + 1, self._directory
        )


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")
