"""Global constants for AGOP-TRIS."""

TITLE = "AGOP-TRIS"
VERSION = "0.1.0"

# ---------------------------------------------------------------------------
# Benchmark data
# ---------------------------------------------------------------------------
IMAGE_SIZE = 8
N_PIXELS = IMAGE_SIZE * IMAGE_SIZE  # 64
N_CLASSES = 2
ALPHA = 0.18          # signal mixing weight
N_TRAIN = 4000
N_TEST = 2000

# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------
EPOCHS = 100
LR0 = 1e-3
WEIGHT_DECAY = 1e-4
BATCH_SIZE = 32
SNAPSHOT_EVERY = 100  # gradient steps between diag(M) snapshots
ONLY_CORRECT = True

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# ---------------------------------------------------------------------------
# Attribution
# ---------------------------------------------------------------------------
IG_STEPS = 50
SMOOTHGRAD_SAMPLES = 50
SMOOTHGRAD_SIGMA = 0.15
GRADCAM_LAYER = "block1"  # 3x3 feature map

# ---------------------------------------------------------------------------
# Evaluation / reporting
# ---------------------------------------------------------------------------
N_EVAL = 2000
CSV_SIG_DIGITS = 6
SMOOTHING_WINDOW = 3
DUMP_SAMPLES = 4      # PGMs written per method by `evaluate --dump-dir`

# ---------------------------------------------------------------------------
# Run directory layout
# ---------------------------------------------------------------------------
TRAIN_FILE = "train.xtrb"
TEST_FILE = "test.xtrb"
MODEL_FILE = "model.cnn8"
DIAG_FILE = "agop.diag"
SNAPSHOT_DIR = "snapshots"
HISTORY_FILE = "history.csv"
MANIFEST_FILE = "manifest.jsonl"
REPORT_FILE = "report.csv"
SCENARIO_FILE = "scenario.json"
CHECKPOINT_DIR = "checkpoints"
MAPS_DIR = "maps"
