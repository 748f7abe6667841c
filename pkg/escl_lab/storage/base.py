import io
import json
import logging
import zipfile
from dataclasses import dataclass, field

import numpy as np
from scrapy.utils.misc import load_object

from ..encoder import PARAM_NAMES, EncoderParams
from ..exceptions import DataError, DimensionError


logger = logging.getLogger(__name__)


FORMAT_VERSION = 1

# fixed member timestamp, so equal checkpoints are equal bytes
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)


@dataclass(frozen=True, eq=False)
class Checkpoint:
    """Everything needed to evaluate a model or resume its training."""

    params: EncoderParams
    vocabulary: tuple
    step: int = 0
    optimizer: str = ''
    optimizer_state: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        object.__setattr__(self, 'vocabulary', tuple(self.vocabulary))
        if len(self.vocabulary) != self.params.vocab_size:
            raise DimensionError(
                "Checkpoint vocabulary has %d entries but the embedding "
                "table has %d rows" % (len(self.vocabulary),
                                        self.params.vocab_size))

    def get_vocabulary(self):
        from ..evaluation.data import Vocabulary
        return Vocabulary.from_list(self.vocabulary)


def _add_array(zf, name, arr, compress_type):
    info = zipfile.ZipInfo(name + '.npy', date_time=_ZIP_DATE)
    info.compress_type = compress_type
    with zf.open(info, 'w') as f:
        np.lib.format.write_array(f, np.ascontiguousarray(arr),
                                  allow_pickle=False)


def encode_checkpoint(checkpoint, compress=False):
    """Serialize a checkpoint to zip-of-.npy bytes."""
    compress_type = zipfile.ZIP_DEFLATED if compress else zipfile.ZIP_STORED
    arrays = {}
    for name, arr in checkpoint.params.as_dict().items():
        arrays['params/%s' % name] = arr
    scalars = {}
    for key, value in sorted(checkpoint.optimizer_state.items()):
        if isinstance(value, dict):
            for name, arr in value.items():
                arrays['optimizer/%s/%s' % (key, name)] = arr
        else:
            scalars[key] = value
    meta = {
        'format_version': checkpoint.format_version,
        'dims': {
            'vocab_size': checkpoint.params.vocab_size,
            'embed_dim': checkpoint.params.embed_dim,
            'output_dim': checkpoint.params.output_dim,
        },
        'vocabulary': list(checkpoint.vocabulary),
        'step': int(checkpoint.step),
        'optimizer': checkpoint.optimizer,
        'optimizer_scalars': scalars,
        'config': checkpoint.config,
    }
    arrays['meta'] = np.frombuffer(
        json.dumps(meta, sort_keys=True).encode('utf-8'), dtype=np.uint8)
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, 'w') as zf:
        for name in sorted(arrays):
            _add_array(zf, name, arrays[name], compress_type)
    return buf.getvalue()


def decode_checkpoint(data, source='<bytes>'):
    """Inverse of encode_checkpoint; ``source`` names the origin in errors."""
    try:
        with np.load(io.BytesIO(data), allow_pickle=False) as npz:
            arrays = dict((name, npz[name]) for name in npz.files)
    except (ValueError, OSError, zipfile.BadZipFile) as e:
        raise DataError("Cannot read checkpoint %s: %s" % (source, e))
    if 'meta' not in arrays:
        raise DataError("Checkpoint %s has no metadata" % source)
    meta = json.loads(arrays.pop('meta').tobytes().decode('utf-8'))
    if meta.get('format_version') != FORMAT_VERSION:
        raise DataError("Checkpoint %s has unsupported format version %r"
                        % (source, meta.get('format_version')))
    try:
        params = EncoderParams(**dict(
            (name, arrays['params/%s' % name]) for name in PARAM_NAMES))
    except KeyError as e:
        raise DataError("Checkpoint %s lacks parameter %s" % (source, e))
    for key, value in meta['dims'].items():
        if getattr(params, key) != value:
            raise DimensionError("Checkpoint %s declares %s=%d but stores %d"
                                 % (source, key, value, getattr(params, key)))
    state = dict(meta['optimizer_scalars'])
    for name, arr in arrays.items():
        if name.startswith('optimizer/'):
            _, slot, pname = name.split('/', 2)
            state.setdefault(slot, {})[pname] = arr
    try:
        return Checkpoint(params=params, vocabulary=meta['vocabulary'],
                          step=meta['step'], optimizer=meta['optimizer'],
                          optimizer_state=state, config=meta['config'],
                          format_version=meta['format_version'])
    except DimensionError as e:
        raise DimensionError("Checkpoint %s: %s" % (source, e))


class CheckpointStorage(object):
    """ Abstract checkpoint storage backend.
    """

    def __init__(self, settings):
        self.use_gzip = settings.getbool('ESCL_CHECKPOINT_GZIP')

    @classmethod
    def from_settings(cls, settings):
        return load_object(settings['ESCL_CHECKPOINT_STORAGE'])(settings)

    def open(self):
        logger.debug("Opened %(storage)s", {'storage': self.__class__.__name__})

    def close(self):
        logger.debug("Closed %(storage)s", {'storage': self.__class__.__name__})

    def __enter__(self):
        self.open()
        return self

    def __exit__(self, *exc_info):
        self.close()

    def retrieve_checkpoint(self, name):
        """Return the stored checkpoint, or None when there is none."""
        raise NotImplementedError

    def store_checkpoint(self, name, checkpoint):
        raise NotImplementedError
