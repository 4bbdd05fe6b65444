TRADE_CSV_HEADER = ("timestamp", "firm_id", "stock_id", "side", "value")

# Activity filter
MIN_TRADES_PER_YEAR = 1000
MIN_ACTIVE_DAYS = 200
MAX_DAYS_PER_YEAR = 366

# Segmentation
SEGMENTATION_THRESHOLD = 0.99
MIN_WINDOW = 4
MIN_SIDE = 2
# Closed-form significance of the maximum t statistic: {1 - I_x(delta*nu, delta)}^eta
SIGNIFICANCE_DELTA = 0.40
SIGNIFICANCE_ETA_SLOPE = 4.19
SIGNIFICANCE_ETA_INTERCEPT = -11.54
SMALL_N_MONTE_CARLO = 20
DEFAULT_MC_TRIALS = 10_000
# Monte Carlo null tables from this length up are built on a geometric grid of
# lengths and interpolated in log n
MC_GRID_START = 64
MC_GRID_STEPS_PER_DOUBLING = 4
# pooled variance of standardized values below which a window counts as noiseless
ZERO_VARIANCE = 1e-14
ZERO_MEAN_GAP = 1e-12

# Patches
THETA = 0.75
MIN_PATCH_TRADES = 10

# Tail statistics
Z_95 = 1.96
MIN_AUTO_K_SAMPLE = 50
AUTO_K_MIN = 10
FALLBACK_K_FRACTION = 0.1

# Allometry
BOOTSTRAP_SAMPLES = 1000
MIN_BOOTSTRAP_SAMPLES = 200
MIN_FIRM_PATCHES = 10

# Plot data
# firms per stock, by directional patch count, whose inventory path is exported
INVENTORY_FIRMS = 3
MAX_BOOTSTRAP_FAILURE_RATE = 0.01
AXIS_DEGENERATE = 1e-12
# bivariate analyses as (u, v) with v ~ u^g
ALLOMETRIC_PAIRS = {
    "g1": ("V_m", "N_m"),
    "g2": ("V_m", "T"),
    "g3": ("T", "N_m"),
}

# Lognormality
JB_MIN_N = 8
JB_SMALL_N = 50
JB_ALPHA = 0.05
JB_CHI2_CRITICAL = 5.991464547107979
JB_MC_TRIALS = 20_000
JB_MC_SEED = 19_840_906

# Report
REPORT_SCHEMA_VERSION = 1
TAIL_CONVENTION = "ccdf"

# Synthetic market
SYNTH_START_TIMESTAMP = 978_307_200  # 2001-01-01T00:00:00Z
SYNTH_FIRM_PREFIX = "F"
SYNTH_PRESETS = {
    # Zipf sizes with V_m ~ size^0.5 give a pooled V_m tail of 2; N_m and T
    # follow V_m with exponents 1.1 and 1.75 and small lognormal noise, which
    # puts the pooled tails of N_m and T near 1.8 and 1.15 and the PCA slopes
    # near 1.12, 1.8 and 0.62. The noise share of a package is at most 0.04, so
    # every planted package passes theta = 0.95.
    "paper-like": {
        "n_firms": 1000,
        "zipf_exponent": 1.0,
        "packages_mean": 12.0,
        "packages_min": 10,
        "size_elasticity": 0.5,
        "sigma": 0.5,
        "trades_at_mu0": 40.0,
        "trades_exponent": 1.1,
        "trades_sigma": 0.15,
        "duration_at_mu0": 600.0,
        "duration_exponent": 1.75,
        "duration_sigma": 0.25,
        "noise_fraction": 0.04,
    },
    "small": {
        "n_firms": 12,
        "zipf_exponent": 1.0,
        "packages_mean": 12.0,
        "packages_min": 10,
        "size_elasticity": 0.5,
        "sigma": 0.5,
        "trades_at_mu0": 20.0,
        "trades_exponent": 1.0,
        "trades_sigma": 0.15,
        "duration_at_mu0": 600.0,
        "duration_exponent": 1.5,
        "duration_sigma": 0.5,
        "noise_fraction": 0.1,
    },
}
