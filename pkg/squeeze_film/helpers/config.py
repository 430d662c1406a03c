"""
Solver configuration: flat key=value or YAML files, validated on load.
"""
from hashlib import sha256
import logging
import math
from os.path import splitext

from fuzzywuzzy import process
import numpy as np
import yaml

from ..const import (
    CONF_ALPHA,
    CONF_BETA_F,
    CONF_BETA_P,
    CONF_GAMMA_TOL,
    CONF_HORIZON,
    CONF_LENGTH,
    CONF_MAX_ITER,
    CONF_MODES,
    CONF_NEWTON_TOL,
    CONF_NODES,
    CONF_OUTPUT_DIR,
    CONF_PICARD_TOL,
    CONF_PROFILE,
    CONF_QUENCH_THRESHOLD,
    CONF_RADIUS,
    CONF_SEED,
    CONF_STEPS,
    CONF_THETA1,
    CONF_THETA2,
    DEFAULTS,
    INT_KEYS,
    OPTIONAL_KEYS,
    PROFILE_BUMP,
    PROFILE_EQUILIBRIUM,
    PROFILE_FILE,
    PROFILE_MODE,
    QUENCH_FRACTION,
    STR_KEYS,
)
from ..errors import ConfigurationError
from ..grid import Field, build_grid, embedding_constant, sine_eigenbasis
from ..hyperbolic import PhysicalConstants

_LOGGER = logging.getLogger(__name__)

KNOWN_KEYS = sorted(set(DEFAULTS) | set(OPTIONAL_KEYS))
# Minimum fuzzy score for suggesting a known key.
SUGGESTION_SCORE = 80
DEFAULT_BUMP = 0.1
MAX_ALPHA = 0.25


def _suggest(key):
    match = process.extractOne(key, KNOWN_KEYS)
    if match and match[1] >= SUGGESTION_SCORE:
        return f" (did you mean {match[0]}?)"
    return ""


def _coerce(key, value):
    """Convert a raw value to the type its key expects."""
    if value is None:
        return None
    if key in STR_KEYS:
        return str(value)
    if key in INT_KEYS:
        if isinstance(value, bool):
            raise ConfigurationError(f"expected an integer, got {value!r}", key)
        try:
            number = float(value)
        except (TypeError, ValueError):
            raise ConfigurationError(f"expected an integer, got {value!r}", key)
        if not number.is_integer():
            raise ConfigurationError(f"expected an integer, got {value!r}", key)
        return int(number)
    if isinstance(value, bool):
        raise ConfigurationError(f"expected a number, got {value!r}", key)
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"expected a number, got {value!r}", key)
    if not math.isfinite(number):
        raise ConfigurationError(f"must be finite, got {value!r}", key)
    return number


def flatten(data, prefix=""):
    """Flatten nested sections into section-prefixed keys."""
    flat = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten(value, f"{name}."))
        else:
            flat[name] = value
    return flat


def parse_flat(text):
    """Parse key=value lines; blank lines and # comments are skipped."""
    data = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {number} is not key=value: {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in data:
            raise ConfigurationError(f"duplicate key on line {number}", key)
        data[key] = value
    return data


def parse_yaml(text):
    data = yaml.safe_load(text)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError("YAML config must be a mapping")
    return flatten(data)


class SolverConfig:
    """Representation of a solver configuration."""

    def __init__(self, config=None, source=None):
        """Initialize the config.
        Args:
            config (dict): flat or nested settings; missing keys take defaults.
            source (string): where the settings were read from, for messages."""
        self._source = source
        raw = flatten(config or {})
        for key in raw:
            if key not in KNOWN_KEYS:
                raise ConfigurationError(f"unknown setting{_suggest(key)}", key)
        merged = {**DEFAULTS, **raw}
        self._config = {key: _coerce(key, value) for key, value in merged.items()}
        self._validate()
        _LOGGER.debug("Loaded solver config from %s", source or "dict")

    @classmethod
    def from_text(cls, text, source=None):
        return cls(parse_flat(text), source)

    @classmethod
    def from_yaml(cls, text, source=None):
        return cls(parse_yaml(text), source)

    @classmethod
    def load(cls, fname):
        """Load a .yaml/.yml file as YAML and anything else as key=value text."""
        try:
            with open(fname, encoding="utf-8") as f:
                text = f.read()
        except OSError as e:
            raise ConfigurationError(f"cannot read {fname}: {e.strerror}", "config")
        if splitext(str(fname))[1].lower() in (".yaml", ".yml"):
            return cls.from_yaml(text, fname)
        return cls.from_text(text, fname)

    def emit(self):
        """Flat key=value text that loads back to an equal config."""
        lines = []
        for key in sorted(self._config):
            value = self._config[key]
            if value is None:
                continue
            text = f"{key}={value!r}" if isinstance(value, float) else f"{key}={value}"
            lines.append(text)
        return "\n".join(lines) + "\n"

    def replace(self, updates):
        """Return a copy with some settings changed, keyed by CONF_* names."""
        return SolverConfig({**self._config, **updates}, self._source)

    def as_dict(self):
        return dict(self._config)

    @property
    def sha256(self):
        return sha256(self.emit().encode("utf-8")).hexdigest()

    @property
    def source(self):
        return self._source

    def __eq__(self, other):
        if not isinstance(other, SolverConfig):
            return NotImplemented
        return self._config == other._config

    def __repr__(self):
        return f"SolverConfig({self._source or 'dict'})"

    @property
    def beta_F(self):
        return self._config[CONF_BETA_F]

    @property
    def beta_p(self):
        return self._config[CONF_BETA_P]

    @property
    def theta1(self):
        return self._config[CONF_THETA1]

    @property
    def theta2(self):
        return self._config[CONF_THETA2]

    @property
    def constants(self):
        return PhysicalConstants(self.beta_F, self.beta_p, self.theta1, self.theta2)

    @property
    def profile(self):
        return self._config[CONF_PROFILE]

    @property
    def length(self):
        return self._config[CONF_LENGTH]

    @property
    def n_nodes(self):
        return self._config[CONF_NODES]

    @property
    def n_modes(self):
        return self._config[CONF_MODES]

    @property
    def grid(self):
        return build_grid(self.length, self.n_nodes)

    @property
    def basis(self):
        return sine_eigenbasis(self.grid, self.n_modes)

    @property
    def horizon(self):
        return self._config[CONF_HORIZON]

    @property
    def n_steps(self):
        return self._config[CONF_STEPS]

    @property
    def alpha(self):
        return self._config[CONF_ALPHA]

    @property
    def picard_tol(self):
        return self._config[CONF_PICARD_TOL]

    @property
    def gamma_tol(self):
        return self._config[CONF_GAMMA_TOL]

    @property
    def newton_tol(self):
        return self._config[CONF_NEWTON_TOL]

    @property
    def quench_threshold(self):
        value = self._config.get(CONF_QUENCH_THRESHOLD)
        return value if value is not None else QUENCH_FRACTION * self.theta2

    @property
    def radius(self):
        """Picard ball radius, or None to use the default fraction of κ/(2C)."""
        return self._config.get(CONF_RADIUS)

    @property
    def max_iter(self):
        return self._config[CONF_MAX_ITER]

    @property
    def seed(self):
        return self._config[CONF_SEED]

    @property
    def output_dir(self):
        return self._config.get(CONF_OUTPUT_DIR)

    def initial_fields(self, grid=None):
        """Initial (u₀, v₀, w₀) for the configured profile."""
        return initial_fields(
            self.profile, grid or self.grid, self.theta1, self.theta2
        )

    def _validate(self):
        # Both raise ConfigurationError on invalid values.
        self.constants
        self.basis
        for key in (CONF_HORIZON, CONF_PICARD_TOL, CONF_GAMMA_TOL, CONF_NEWTON_TOL):
            if not self._config[key] > 0:
                raise ConfigurationError(
                    f"must be positive, got {self._config[key]}", key
                )
        for key in (CONF_STEPS, CONF_MAX_ITER):
            if self._config[key] < 1:
                raise ConfigurationError(
                    f"must be at least 1, got {self._config[key]}", key
                )
        if not 0 < self.alpha < MAX_ALPHA:
            raise ConfigurationError(
                f"must lie in (0, {MAX_ALPHA}), got {self.alpha}", CONF_ALPHA
            )
        u0, v0, w0 = self.initial_fields()
        kappa = float(min(w0.values.min(), w0.boundary))
        if not 0 < self.quench_threshold < kappa:
            raise ConfigurationError(
                f"must lie in (0, {kappa:.6g}), got {self.quench_threshold}",
                CONF_QUENCH_THRESHOLD,
            )
        if self.radius is not None:
            limit = kappa / (2 * embedding_constant(self.basis))
            if not 0 < self.radius < limit:
                raise ConfigurationError(
                    f"must lie in (0, {limit:.6g}), got {self.radius}", CONF_RADIUS
                )


def _parse_profile(profile):
    name, _, rest = profile.partition(":")
    return name, rest


def initial_fields(profile, grid, theta1, theta2):
    """
    Build (u₀, v₀, w₀) from a profile name.

    equilibrium      u₀ ≡ θ₁, v₀ ≡ 0, w₀ ≡ θ₂
    bump[:A]         u₀ = θ₁(1 + A s³), w₀ = θ₂(1 - A s³) with s = sin(πx/L)
    mode:k:A         u₀ = θ₁(1 + A sin(kπx/L)), w₀ = θ₂(1 + A sin(kπx/L))
    file:<csv>       columns x,u0,v0,w0 at the interior nodes
    """
    name, rest = _parse_profile(profile)
    x = grid.nodes
    zero = Field(grid, np.zeros(grid.n_nodes))
    if name == PROFILE_EQUILIBRIUM and not rest:
        return (
            Field(grid, np.full(grid.n_nodes, theta1), theta1),
            zero,
            Field(grid, np.full(grid.n_nodes, theta2), theta2),
        )
    if name == PROFILE_BUMP:
        amplitude = _profile_number(rest, profile) if rest else DEFAULT_BUMP
        if not abs(amplitude) < 1:
            raise ConfigurationError(
                f"bump amplitude must be below 1 in {profile!r}", CONF_PROFILE
            )
        shape = np.sin(np.pi * x / grid.length) ** 3
        return (
            Field(grid, theta1 * (1 + amplitude * shape), theta1),
            zero,
            Field(grid, theta2 * (1 - amplitude * shape), theta2),
        )
    if name == PROFILE_MODE:
        parts = rest.split(":")
        if len(parts) != 2:
            raise ConfigurationError(
                f"expected mode:k:A, got {profile!r}", CONF_PROFILE
            )
        k = _profile_number(parts[0], profile)
        amplitude = _profile_number(parts[1], profile)
        if not float(k).is_integer() or k < 1 or k > grid.n_nodes:
            raise ConfigurationError(
                f"mode index out of range in {profile!r}", CONF_PROFILE
            )
        if not abs(amplitude) < 1:
            raise ConfigurationError(
                f"mode amplitude must be below 1 in {profile!r}", CONF_PROFILE
            )
        shape = np.sin(int(k) * np.pi * x / grid.length)
        return (
            Field(grid, theta1 * (1 + amplitude * shape), theta1),
            zero,
            Field(grid, theta2 * (1 + amplitude * shape), theta2),
        )
    if name == PROFILE_FILE and rest:
        return _fields_from_csv(rest, grid, theta1, theta2)
    raise ConfigurationError(f"unknown profile {profile!r}", CONF_PROFILE)


def _profile_number(text, profile):
    try:
        return float(text)
    except ValueError:
        raise ConfigurationError(
            f"malformed number {text!r} in {profile!r}", CONF_PROFILE
        )


def _fields_from_csv(fname, grid, theta1, theta2):
    try:
        data = np.genfromtxt(fname, delimiter=",", names=True)
    except OSError as e:
        raise ConfigurationError(f"cannot read {fname}: {e}", CONF_PROFILE)
    missing = {"x", "u0", "v0", "w0"} - set(data.dtype.names or ())
    if missing:
        raise ConfigurationError(
            f"{fname} lacks columns {', '.join(sorted(missing))}", CONF_PROFILE
        )
    if data.size != grid.n_nodes or not np.allclose(data["x"], grid.nodes, atol=1e-9):
        raise ConfigurationError(
            f"{fname} does not sample the {grid.n_nodes} interior nodes", CONF_PROFILE
        )
    u0 = Field(grid, data["u0"], theta1)
    w0 = Field(grid, data["w0"], theta2)
    if u0.values.min() <= 0 or w0.values.min() <= 0:
        raise ConfigurationError(f"{fname} has nonpositive u0 or w0", CONF_PROFILE)
    return u0, Field(grid, data["v0"]), w0
