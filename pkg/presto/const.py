"""Constants for the presto package."""

# Base package constants
DOMAIN = "presto"
VERSION = "0.4.0"  # x-release-please-version

# Environment
ENV_JOBS = "PRESTO_JOBS"

# Configuration keys
CONF_P = "p"
CONF_H_MAX = "h_max"
CONF_NORMALIZE = "normalize"
CONF_PROJECTION = "projection"
CONF_METHOD = "method"
CONF_K = "k"
CONF_N_PROJECTIONS = "n_projections"
CONF_SEED = "seed"
CONF_COMPLEX = "complex"
CONF_GRID_STEP = "grid_step"
CONF_CAP_ESSENTIAL = "cap_essential"
CONF_SAMPLE_SIZE = "sample_size"
CONF_RESTARTS = "restarts"
CONF_EXACT_THRESHOLD = "exact_threshold"

# Projectors
PROJECTOR_PCA = "pca"
PROJECTOR_GAUSSIAN = "gaussian"
PROJECTOR_MMDS = "mmds"
PROJECTORS = (PROJECTOR_PCA, PROJECTOR_GAUSSIAN, PROJECTOR_MMDS)
# Full-dimension reference topology, no projection applied
PROJECTOR_NONE = "none"

# Complexes
COMPLEX_ALPHA = "alpha"
COMPLEX_RIPS = "rips"
COMPLEXES = (COMPLEX_ALPHA, COMPLEX_RIPS)
ALPHA_MAX_DIM = 3

# Norms; infinity is spelled as a float so it can be used directly in arithmetic
P_INF = float("inf")
SUPPORTED_P = (1.0, 2.0, P_INF)
SUPPORTED_H = (0, 1, 2)

# Default values
DEFAULT_P = 2.0
DEFAULT_H_MAX = 2
DEFAULT_K = 2
DEFAULT_N_PROJECTIONS = 1
DEFAULT_SEED = 0
DEFAULT_RESTARTS = 8
DEFAULT_EXACT_THRESHOLD = 2048
DEFAULT_ZSCORE_THRESHOLD = 3.0
DEFAULT_IQR_THRESHOLD = 1.5
DEFAULT_PERMUTATIONS = 999
MIN_PERMUTATIONS = 99

# Numeric tolerances
SYMMETRY_TOLERANCE = 1e-9
MMS_SYMMETRY_TOLERANCE = 1e-12
MMS_TRIANGLE_TOLERANCE = 1e-9
BOUND_TOLERANCE = 1e-9
DUPLICATE_JITTER = 1e-12

# Desk-scale caps
PCA_COVARIANCE_MAX_D = 1024
RIPS_REFERENCE_MAX_D = 16
RIPS_REFERENCE_MAX_N = 256
RIPS_REFERENCE_MAX_SIMPLICES = 3_000_000
RIPS_MAX_SIMPLICES = 1 << 24
RIPS_CHUNK_CELLS = 1 << 22
EXHAUSTIVE_COVER_MAX_M = 20

# Outlier methods
OUTLIER_ZSCORE = "zscore"
OUTLIER_IQR = "iqr"

# Compression methods
COMPRESSION_GREEDY = "greedy_set_cover"
COMPRESSION_LINKAGE = "complete_linkage"

# Diagram metrics
METRIC_BOTTLENECK = "bottleneck"
METRIC_WASSERSTEIN = "wasserstein"

# CLI exit codes
EXIT_OK = 0
EXIT_DOMAIN_ERROR = 2
EXIT_USAGE_ERROR = 64


def format_p(p: float) -> str:
    """Render a norm exponent for logs and artifact headers.

    Args:
        p: Norm exponent, 1, 2 or infinity

    Returns:
        "1", "2" or "inf"
    """
    if p == P_INF:
        return "inf"
    return str(int(p))
