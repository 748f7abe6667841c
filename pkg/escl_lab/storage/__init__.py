from .base import Checkpoint, CheckpointStorage, decode_checkpoint, encode_checkpoint
from .filesystem import FilesystemCheckpointStorage
from .sqlite import SqliteCheckpointStorage
