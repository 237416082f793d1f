"""
Pipeline constants and configuration defaults.
"""

# Project
PROJECT_NAME: str = "leafaug"
VERSION: str = "1.0.0"
LOG_LEVEL_ENV: str = "LEAFAUG_LOG_LEVEL"
DEFAULT_LOG_LEVEL: str = "INFO"

# Exit codes
EXIT_OK: int = 0
EXIT_INTERNAL: int = 1
EXIT_CONFIG: int = 2
EXIT_DATA: int = 3

# Manifest
MANIFEST_SCHEMA_VERSION: int = 1

# Preprocessing
IMAGE_SIZE: int = 256
FEATURE_SIZE: int = 32
LUMA_WEIGHTS: tuple = (0.299, 0.587, 0.114)

# Split
TRAIN_FRAC: float = 0.8
DEV_FRAC: float = 0.1
TEST_FRAC: float = 0.1
RESPLIT_RATIO: tuple = (8, 1)

# Online augmentations
APPLY_PROB: float = 0.5
FLIP_PROB: float = 0.25
ROTATION_RANGE: tuple = (0.0, 180.0)
BETA_MIX: tuple = (0.8, 0.8)
BETA_FMIX: tuple = (1.0, 1.0)
FMIX_DECAY: float = 3.0
CENTER_MARGIN_FRAC: float = 0.25
AUG_BATCH_SIZE: int = 8

# GAN objectives
PIX2PIX_L1_WEIGHT: float = 100.0
CYCLE_WEIGHT: float = 10.0
IDENTITY_WEIGHT: float = 5.0
PREDICTION_EPS: float = 1e-7

# Recorded GAN training setup (documentation only, no training happens here)
GAN_ADAM_LR: float = 2e-4
GAN_ADAM_BETAS: tuple = (0.5, 0.999)
GAN_BATCH_SIZE: int = 1
PIX2PIX_EPOCHS: int = 25
CYCLEGAN_EPOCHS: int = 100
CYCLEGAN_RESIDUAL_BLOCKS: int = 9
PIX2PIX_PATCH_OUTPUT: int = 30
CYCLEGAN_PATCH_RECEPTIVE_FIELD: int = 70

# Reference classifier
TRAIN_BATCH_SIZE: int = 32
TRAIN_EPOCHS: int = 45
TRAIN_INITIAL_LR: float = 0.01
TRAIN_LR_DECAY: float = 0.25
TRAIN_LR_DECAY_EVERY: int = 15
STD_FLOOR: float = 1e-8

# t-SNE
TSNE_PERPLEXITY: float = 30.0
TSNE_ITERATIONS: int = 1000
TSNE_LEARNING_RATE: float = 200.0
TSNE_MOMENTUM_EARLY: float = 0.5
TSNE_MOMENTUM_LATE: float = 0.8
TSNE_EXAGGERATION: float = 12.0
TSNE_EXAGGERATION_ITERS: int = 250
TSNE_INIT_STD: float = 1e-4
TSNE_PERPLEXITY_TOL: float = 1e-5
TSNE_MAX_SEARCH_ITERS: int = 64
TSNE_MAX_POINTS: int = 5000
TSNE_DUPLICATE_JITTER: float = 1e-10
TSNE_Q_FLOOR: float = 1e-12

# Output layout, relative to the output directory
PREPARED_DIR: str = "prepared"
PREPARED_MANIFEST: str = "prepared/manifest.json"
SPLIT_MANIFEST: str = "manifests/split.json"
BALANCED_MANIFEST: str = "manifests/balanced.json"
BALANCE_PLAN: str = "manifests/balance_plan.json"
RESPLIT_MANIFEST: str = "manifests/resplit.json"
TRAIN_REPORT: str = "reports/train.csv"
MODEL_DIR: str = "models"
MATRIX_REPORT: str = "reports/eval_matrix.csv"
MATRIX_RUN_MANIFEST: str = "reports/eval_matrix_run.json"
TSNE_OUTPUT: str = "embed/tsne.csv"
TSNE_KL_OUTPUT: str = "embed/tsne_kl.json"
GAN_LOSS_OUTPUT: str = "gan/gan_loss.json"
PREVIEW_DIR: str = "preview"
PREVIEW_EVENT: str = "preview/event.json"
PREVIEW_REPLAY_DIR: str = "preview/replay"
RUN_META_DIR: str = "run_meta"
REPORT_COLUMNS: tuple = (
    "method", "accuracy", "top2_accuracy", "precision", "recall", "f1", "accuracy_macro_ovr",
)
