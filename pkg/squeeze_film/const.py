DOMAIN = "squeeze_film"

ENV_OUTPUT_ROOT = "SQUEEZE_FILM_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT = "runs"

CONF_BETA_F = "physics.beta_F"
CONF_BETA_P = "physics.beta_p"
CONF_THETA1 = "physics.theta1"
CONF_THETA2 = "physics.theta2"
CONF_PROFILE = "init.profile"
CONF_LENGTH = "grid.L"
CONF_NODES = "grid.n_nodes"
CONF_MODES = "grid.n_modes"
CONF_HORIZON = "time.T"
CONF_STEPS = "time.n_steps"
CONF_ALPHA = "time.alpha"
CONF_PICARD_TOL = "tol.picard_tol"
CONF_GAMMA_TOL = "tol.gamma_tol"
CONF_NEWTON_TOL = "tol.newton_tol"
CONF_QUENCH_THRESHOLD = "tol.quench_threshold"
CONF_RADIUS = "picard.radius"
CONF_MAX_ITER = "picard.max_iter"
CONF_SEED = "run.seed"
CONF_OUTPUT_DIR = "output.dir"

DEFAULTS = {
    CONF_BETA_F: 1.0,
    CONF_BETA_P: 1.0,
    CONF_THETA1: 2.0,
    CONF_THETA2: 1.0,
    CONF_PROFILE: "equilibrium",
    CONF_LENGTH: 1.0,
    CONF_NODES: 63,
    CONF_MODES: 63,
    CONF_HORIZON: 0.05,
    CONF_STEPS: 50,
    CONF_ALPHA: 0.2,
    CONF_PICARD_TOL: 1e-10,
    CONF_GAMMA_TOL: 1e-8,
    CONF_NEWTON_TOL: 1e-10,
    CONF_MAX_ITER: 50,
    CONF_SEED: 0,
}

# Keys without a default: filled from other settings when absent.
OPTIONAL_KEYS = [CONF_QUENCH_THRESHOLD, CONF_RADIUS, CONF_OUTPUT_DIR]

INT_KEYS = [CONF_NODES, CONF_MODES, CONF_STEPS, CONF_MAX_ITER, CONF_SEED]
STR_KEYS = [CONF_PROFILE, CONF_OUTPUT_DIR]

NORM_L2 = "L2"
NORM_H1 = "H1"
NORM_H2 = "H2"
NORM_ORDERS = [NORM_L2, NORM_H1, NORM_H2]

PROFILE_EQUILIBRIUM = "equilibrium"
PROFILE_BUMP = "bump"
PROFILE_MODE = "mode"
PROFILE_FILE = "file"

QUENCH_FRACTION = 1e-2
RADIUS_FRACTION = 0.5

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2

SUITE_SEMIGROUP = "semigroup"
SUITE_HYPERBOLIC = "hyperbolic"
SUITE_FRECHET = "frechet"
SUITE_PARABOLIC = "parabolic"
SUITE_COUPLED = "coupled"
SUITE_STEADY = "steady"
SUITE_APPENDIX = "appendixA"
SUITE_ALL = "all"
SUITES = [
    SUITE_SEMIGROUP,
    SUITE_HYPERBOLIC,
    SUITE_FRECHET,
    SUITE_PARABOLIC,
    SUITE_COUPLED,
    SUITE_STEADY,
    SUITE_APPENDIX,
]
