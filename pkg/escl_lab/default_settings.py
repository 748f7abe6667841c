"""
escl_lab default settings

Config-file keys map onto these names: ``loss.lambda`` is
``ESCL_LOSS_LAMBDA``, ``batch_size`` is ``ESCL_BATCH_SIZE``.
"""

ESCL_BATCH_SIZE = 32
ESCL_STEPS = 200
ESCL_LEARNING_RATE = 5e-3
ESCL_OPTIMIZER = 'adam'
ESCL_ADAM_BETA1 = 0.9
ESCL_ADAM_BETA2 = 0.999
ESCL_ADAM_EPS = 1e-8
ESCL_R_LOW = 0.1
ESCL_R_HIGH = 0.45
ESCL_LOSS_TEMPERATURE = 0.2
ESCL_LOSS_LAMBDA = 2.5e-3
ESCL_LOSS_VARIANT = 'rd'
ESCL_SEED = 0
ESCL_EVAL_EVERY = 50
ESCL_CHECKPOINT_PATH = 'escl-checkpoint.npz'
ESCL_TRACE_PATH = ''
ESCL_EMBED_DIM = 32
ESCL_OUTPUT_DIM = 32
ESCL_SELECT_BEST = False

ESCL_OPTIMIZERS = {
    'sgd': 'escl_lab.optim.SGD',
    'adam': 'escl_lab.optim.Adam',
}
ESCL_EQUIVARIANT_LOSSES = {
    'rd': 'escl_lab.losses.RDLoss',
    'cossim': 'escl_lab.losses.CosSimLoss',
    'none': 'escl_lab.losses.NoEquivariantLoss',
}

ESCL_CHECKPOINT_STORAGE = 'escl_lab.storage.FilesystemCheckpointStorage'
ESCL_CHECKPOINT_GZIP = False
ESCL_CHECKPOINT_DB = 'escl-checkpoints.db'

ESCL_ABLATION_WORKERS = 1
ESCL_PROBE_TRIALS = 100

LOG_LEVEL = 'INFO'
LOG_FORMAT = '%(asctime)s [%(name)s] %(levelname)s: %(message)s'
