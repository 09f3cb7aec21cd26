# Optimizers
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
ADAGRAD_EPS = 1e-10
COCOB_ALPHA = 100.0
COCOB_L_INIT = 1e-8

# Preprocessing
LOG_EPSILON_REAL = 1e-8
LOG_EPSILON_COUNT = 0.0
INPUT_WINDOW_FACTOR = 1.25
STL_INNER_ITERATIONS = 2

# Metrics
SMAPE_EPSILON = 0.1

# Runs
DEFAULT_SEED_COUNT = 10
DEFAULT_TUNING_ITERATIONS = 50
MIN_RANDOM_TRIALS = 10
RIDGE_LAMBDA_UPPER_POOLED = 1.0
RIDGE_LAMBDA_UPPER_UNPOOLED = 200.0
RIDGE_CV_FOLDS = 10
RIDGE_SMBO_ITERATIONS = 50
RIDGE_SPLIT_RATIO = 0.7
DEFAULT_RIDGE_LAGS = 10

# Files
CACHE_ENV_VAR = "FORECAST_CACHE_DIR"
WINDOW_CACHE_MAGIC = b"GRNNWIN\x00"
CHECKPOINT_MAGIC = b"GRNNCKP\x00"
CONTAINER_VERSION = 1
MISSING_MARKERS = ("", "NA")

# Dataset information: (horizon, period) per competition collection
DATASET_INFO = {
    "cif12": (12, 12),
    "cif6": (6, 12),
    "nn5": (56, 7),
    "m3": (18, 12),
    "m4": (18, 12),
    "wikipedia": (59, 7),
    "tourism": (24, 12),
}

# Initial hyperparameter ranges per collection. Columns: minibatch_size,
# epochs, epoch_size, noise_sigma, l2_psi, cell_dim, layers, init_sigma.
_SMALL = (0.0001, 0.0008)
HYPERPARAMETER_RANGES = {
    "cif12": ((10, 30), (3, 25), (5, 20), (0.01, 0.08), _SMALL, (20, 50), (1, 2), _SMALL),
    "cif6": ((2, 5), (3, 30), (5, 15), _SMALL, _SMALL, (20, 50), (1, 5), _SMALL),
    "nn5": ((5, 15), (3, 25), (2, 10), _SMALL, _SMALL, (20, 25), (1, 2), _SMALL),
    "m3_micro": ((40, 100), (3, 30), (2, 10), _SMALL, _SMALL, (20, 50), (1, 2), _SMALL),
    "m3_macro": ((30, 70), (3, 30), (2, 10), _SMALL, _SMALL, (20, 50), (1, 2), _SMALL),
    "m3_industry": ((30, 70), (3, 30), (2, 10), _SMALL, _SMALL, (20, 50), (1, 2), _SMALL),
    "m3_demographic": ((20, 60), (3, 30), (2, 10), _SMALL, _SMALL, (20, 50), (1, 2), _SMALL),
    "m3_finance": ((20, 60), (3, 30), (2, 10), _SMALL, _SMALL, (20, 50), (1, 2), _SMALL),
    "m3_other": ((10, 30), (3, 30), (5, 20), _SMALL, _SMALL, (20, 50), (1, 2), _SMALL),
    "m4_micro": ((1000, 1500), (3, 25), (2, 10), _SMALL, _SMALL, (20, 50), (1, 2), _SMALL),
    "m4_macro": ((1000, 1500), (3, 25), (2, 10), _SMALL, _SMALL, (20, 50), (1, 2), _SMALL),
    "m4_industry": ((1000, 1500), (3, 25), (2, 10), _SMALL, _SMALL, (20, 50), (1, 2), _SMALL),
    "m4_demographic": ((850, 1000), (3, 25), (2, 10), _SMALL, _SMALL, (20, 50), (1, 2), _SMALL),
    "m4_finance": ((1000, 1500), (3, 25), (2, 10), _SMALL, _SMALL, (20, 50), (1, 2), _SMALL),
    "m4_other": ((50, 60), (3, 25), (2, 10), _SMALL, _SMALL, (20, 25), (1, 2), _SMALL),
    "wikipedia": ((200, 700), (3, 25), (2, 10), _SMALL, _SMALL, (20, 25), (1, 2), _SMALL),
    "tourism": ((10, 90), (3, 25), (2, 10), _SMALL, _SMALL, (20, 25), (1, 2), _SMALL),
}
LEARNING_RATE_RANGES = {"adam": (0.001, 0.1), "adagrad": (0.01, 0.9)}
PARAM_BUDGET_RANGE = (2000, 25000)
