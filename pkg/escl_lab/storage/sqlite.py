import logging
import sqlite3
from datetime import datetime

from .base import CheckpointStorage, decode_checkpoint, encode_checkpoint


logger = logging.getLogger(__name__)


CREATE_QUERY = """CREATE TABLE IF NOT EXISTS checkpoints (
                       name TEXT PRIMARY KEY,
                       timestamp TIMESTAMP,
                       step INTEGER,
                       data BLOB
                   )
               """
SELECT_QUERY = """SELECT name, step, data
                  FROM checkpoints
                      WHERE name=:name
               """
UPSERT_QUERY = """INSERT INTO checkpoints (name, timestamp, step, data)
                      VALUES (:name, :timestamp, :step, :data)
                  ON CONFLICT(name)
                      DO UPDATE SET timestamp=:timestamp, step=:step, data=:data
               """


class SqliteCheckpointStorage(CheckpointStorage):
    """ Checkpoint storage backend keeping every checkpoint as a row of one
    SQLite database (``ESCL_CHECKPOINT_DB``).
    """

    def __init__(self, settings):
        super(SqliteCheckpointStorage, self).__init__(settings)
        self.dbpath = settings['ESCL_CHECKPOINT_DB']
        self.db = None

    def open(self):
        super(SqliteCheckpointStorage, self).open()
        self.db = sqlite3.connect(self.dbpath)
        self.db.row_factory = sqlite3.Row
        with self.db:
            self.db.execute(CREATE_QUERY)

    def close(self):
        if self.db is not None:
            self.db.close()
            self.db = None
        super(SqliteCheckpointStorage, self).close()

    def _connection(self):
        if self.db is None:
            self.open()
        return self.db

    def retrieve_checkpoint(self, name):
        for row in self._connection().execute(SELECT_QUERY, {'name': name}):
            return decode_checkpoint(bytes(row['data']),
                                     source='%s#%s' % (self.dbpath, name))
        return  # not stored

    def store_checkpoint(self, name, checkpoint):
        dbdata = {
            'name': name,
            'timestamp': datetime.now().isoformat(),
            'step': int(checkpoint.step),
            'data': encode_checkpoint(checkpoint, compress=self.use_gzip),
        }
        db = self._connection()
        with db:
            db.execute(UPSERT_QUERY, dbdata)
        logger.debug("Stored checkpoint %(name)s at step %(step)d in %(db)s",
                     {'name': name, 'step': checkpoint.step,
                      'db': self.dbpath})
