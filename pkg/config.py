"""
Configuration settings for the Dengue Diagnosis Toolkit
"""
from pathlib import Path

# === DATA SETTINGS ===

# Cell values that mean "missing" (blank cells and ARFF-style "?")
MISSING_TOKENS = ("", "?")

# Token written back for missing cells
MISSING_OUTPUT_TOKEN = "?"

# Separator between nominal categories in the schema sidecar file
CATEGORY_SEPARATOR = "|"

# === ADTREE SETTINGS ===

# Boosting iterations (one decision node per iteration)
BOOSTING_ITERATIONS = 10

# Smoothing added to both weight sums of a prediction value
SMOOTHING_EPSILON = 1.0

# === C4.5 SETTINGS ===

# Minimum instances per leaf
MIN_LEAF = 2

# Confidence factor for pessimistic pruning
CONFIDENCE_FACTOR = 0.25

# Only consider splits whose info gain reaches the average gain
USE_AVERAGE_GAIN_GATE = True

# === FEATURE SELECTION ===

# Significance level for Wald and chi-squared screening
SIGNIFICANCE_ALPHA = 0.05

# IRLS stops when max |delta beta| drops below this
IRLS_TOLERANCE = 1e-8

# IRLS iteration cap (non-convergence is reported, not fatal)
IRLS_MAX_ITERATIONS = 50

# Information matrix is treated as singular below this
SINGULAR_TOLERANCE = 1e-12

# === EVALUATION SETTINGS ===

# Cross-validation folds
K_FOLDS = 10

# Default seed so "no flags" runs are reproducible
RANDOM_SEED = 42

# Beta for the F-measure (1.0 = harmonic mean)
F_BETA = 1.0

# Worker threads for fold evaluation (1 = sequential)
FOLD_WORKERS = 1

# === DOCUMENT SETTINGS ===

# Version stamped on model and report documents
FORMAT_VERSION = 1

MODEL_FORMAT = "dengue-toolkit-model"
REPORT_FORMAT = "dengue-toolkit-report"

# === LOGGING SETTINGS ===

# Where to save the log file
LOG_FILE = Path(__file__).parent / "dengue_toolkit.log"

# Log level for the console (DEBUG, INFO, WARNING, ERROR)
LOG_LEVEL = "INFO"
