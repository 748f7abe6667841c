import logging
import os
import tempfile

from ..exceptions import DataError
from .base import CheckpointStorage, decode_checkpoint, encode_checkpoint


logger = logging.getLogger(__name__)


class FilesystemCheckpointStorage(CheckpointStorage):
    """ Checkpoint storage backend writing one file per checkpoint; the
    checkpoint name is its path.
    """

    def retrieve_checkpoint(self, name):
        if not os.path.exists(name):
            return  # not stored
        try:
            with open(name, 'rb') as f:
                data = f.read()
        except (IOError, OSError) as e:
            raise DataError("Cannot read checkpoint %s: %s" % (name, e))
        return decode_checkpoint(data, source=name)

    def store_checkpoint(self, name, checkpoint):
        data = encode_checkpoint(checkpoint, compress=self.use_gzip)
        dirname = os.path.dirname(os.path.abspath(name))
        try:
            if not os.path.isdir(dirname):
                os.makedirs(dirname)
            # write-temp-then-rename keeps the previous checkpoint intact
            fd, tmppath = tempfile.mkstemp(dir=dirname, suffix='.tmp')
            try:
                with os.fdopen(fd, 'wb') as f:
                    f.write(data)
                    f.flush()
                    os.fsync(f.fileno())
                os.replace(tmppath, name)
            except BaseException:
                if os.path.exists(tmppath):
                    os.remove(tmppath)
                raise
        except (IOError, OSError) as e:
            raise DataError("Cannot write checkpoint %s: %s" % (name, e))
        logger.debug("Stored checkpoint at step %(step)d in %(path)s",
                     {'step': checkpoint.step, 'path': name})
