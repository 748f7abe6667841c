"""
Minibatch training of the encoder on the combined objective.

Every random draw of a run is addressed by the run seed: parameter
initialisation, the per-epoch shuffle and each dropout mask (keyed by
epoch, step, corpus index and view). A run is therefore reproducible from
its config alone and can be resumed from any checkpoint.
"""
import dataclasses
import io
import json
import logging
import os
import tempfile
import time
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np
from scrapy.utils.misc import load_object

from . import default_settings
from .encoder import backward_views, embed_batch_views, init_params
from .evaluation.sts import evaluate_sts
from .exceptions import ConfigError, DataError, NumericError
from .losses import LossConfig, escl_loss
from .numerics import DropoutSpec, RngStream, check_finite
from .storage import Checkpoint


logger = logging.getLogger(__name__)


STREAM_INIT = 0
STREAM_SHUFFLE = 1
STREAM_MASKS = 2


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = default_settings.ESCL_BATCH_SIZE
    steps: int = default_settings.ESCL_STEPS
    learning_rate: float = default_settings.ESCL_LEARNING_RATE
    optimizer: str = default_settings.ESCL_OPTIMIZER
    adam_beta1: float = default_settings.ESCL_ADAM_BETA1
    adam_beta2: float = default_settings.ESCL_ADAM_BETA2
    adam_eps: float = default_settings.ESCL_ADAM_EPS
    r_low: DropoutSpec = DropoutSpec(default_settings.ESCL_R_LOW)
    r_high: DropoutSpec = DropoutSpec(default_settings.ESCL_R_HIGH)
    loss: LossConfig = field(default_factory=LossConfig)
    seed: int = default_settings.ESCL_SEED
    eval_every: int = default_settings.ESCL_EVAL_EVERY
    checkpoint_path: str = default_settings.ESCL_CHECKPOINT_PATH
    trace_path: str = default_settings.ESCL_TRACE_PATH
    embed_dim: int = default_settings.ESCL_EMBED_DIM
    output_dim: int = default_settings.ESCL_OUTPUT_DIM
    select_best: bool = default_settings.ESCL_SELECT_BEST
    optimizers: tuple = tuple(sorted(default_settings.ESCL_OPTIMIZERS.items()))

    def __post_init__(self):
        set_ = lambda name, value: object.__setattr__(self, name, value)
        for name in ('batch_size', 'steps', 'seed', 'eval_every', 'embed_dim',
                     'output_dim'):
            set_(name, int(getattr(self, name)))
        for name in ('learning_rate', 'adam_beta1', 'adam_beta2', 'adam_eps'):
            set_(name, float(getattr(self, name)))
        set_('r_low', DropoutSpec.coerce(self.r_low))
        set_('r_high', DropoutSpec.coerce(self.r_high))
        set_('optimizer', str(self.optimizer).lower())
        set_('optimizers', tuple(sorted(dict(self.optimizers).items())))
        set_('checkpoint_path', self.checkpoint_path or '')
        set_('trace_path', self.trace_path or '')
        set_('select_best', bool(self.select_best))

        if self.batch_size < 2:
            raise ConfigError("batch_size must be at least 2, got %d"
                              % self.batch_size)
        if self.steps < 1:
            raise ConfigError("steps must be at least 1, got %d" % self.steps)
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer, got %d"
                              % self.seed)
        if self.eval_every < 1:
            raise ConfigError("eval_every must be at least 1, got %d"
                              % self.eval_every)
        if self.embed_dim < 1 or self.output_dim < 1:
            raise ConfigError("embed_dim and output_dim must be at least 1")
        if not self.r_low.rate < self.r_high.rate:
            raise ConfigError("r_low (%r) must be below r_high (%r)"
                              % (self.r_low.rate, self.r_high.rate))
        if self.optimizer not in dict(self.optimizers):
            raise ConfigError("Unknown optimizer %r (expected one of %s)"
                              % (self.optimizer,
                                 ', '.join(k for k, _ in self.optimizers)))
        # fail early on bad optimizer hyperparameters
        self.build_optimizer()

    @classmethod
    def from_settings(cls, settings):
        try:
            return cls._from_settings(settings)
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError("Invalid setting value: %s" % e)

    @classmethod
    def _from_settings(cls, settings):
        return cls(
            batch_size=settings.getint('ESCL_BATCH_SIZE'),
            steps=settings.getint('ESCL_STEPS'),
            learning_rate=settings.getfloat('ESCL_LEARNING_RATE'),
            optimizer=settings.get('ESCL_OPTIMIZER'),
            adam_beta1=settings.getfloat('ESCL_ADAM_BETA1'),
            adam_beta2=settings.getfloat('ESCL_ADAM_BETA2'),
            adam_eps=settings.getfloat('ESCL_ADAM_EPS'),
            r_low=settings.getfloat('ESCL_R_LOW'),
            r_high=settings.getfloat('ESCL_R_HIGH'),
            loss=LossConfig.from_settings(settings),
            seed=settings.getint('ESCL_SEED'),
            eval_every=settings.getint('ESCL_EVAL_EVERY'),
            checkpoint_path=settings.get('ESCL_CHECKPOINT_PATH'),
            trace_path=settings.get('ESCL_TRACE_PATH'),
            embed_dim=settings.getint('ESCL_EMBED_DIM'),
            output_dim=settings.getint('ESCL_OUTPUT_DIM'),
            select_best=settings.getbool('ESCL_SELECT_BEST'),
            optimizers=tuple(settings.getdict('ESCL_OPTIMIZERS').items()),
        )

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def build_optimizer(self):
        return load_object(dict(self.optimizers)[self.optimizer])(self)

    def to_dict(self):
        """Flat config-key view, as written to config files."""
        return {
            'batch_size': self.batch_size,
            'steps': self.steps,
            'learning_rate': self.learning_rate,
            'optimizer': self.optimizer,
            'adam_beta1': self.adam_beta1,
            'adam_beta2': self.adam_beta2,
            'adam_eps': self.adam_eps,
            'r_low': self.r_low.rate,
            'r_high': self.r_high.rate,
            'loss.temperature': self.loss.temperature,
            'loss.lambda': self.loss.lam,
            'loss.variant': self.loss.variant,
            'seed': self.seed,
            'eval_every': self.eval_every,
            'checkpoint_path': self.checkpoint_path,
            'trace_path': self.trace_path,
            'embed_dim': self.embed_dim,
            'output_dim': self.output_dim,
            'select_best': self.select_best,
        }


Batch = namedtuple('Batch', 'indices sequences')


def make_batches(corpus, batch_size, rng):
    """Shuffle the corpus and cut it into full batches; the remainder of
    the epoch is dropped."""
    n = len(corpus)
    if n < batch_size:
        raise ConfigError("Corpus of %d sentences is smaller than the batch "
                          "size %d" % (n, batch_size))
    order = rng.generator().permutation(n)
    batches = []
    for start in range(0, n - batch_size + 1, batch_size):
        indices = tuple(int(i) for i in order[start:start + batch_size])
        batches.append(Batch(indices, tuple(corpus[i] for i in indices)))
    return batches


def _as_batch(batch):
    if isinstance(batch, Batch):
        return batch
    batch = tuple(batch)
    return Batch(tuple(range(len(batch))), batch)


def train_step(params, batch, config, rng, opt_state, optimizer=None):
    """One forward/backward pass and one optimizer update.

    Returns ``(params, opt_state, LossBreakdown)``.
    """
    batch = _as_batch(batch)
    optimizer = optimizer or config.build_optimizer()
    views, tape = embed_batch_views(params, batch.sequences, config.r_low,
                                    config.r_high, rng, keys=batch.indices,
                                    return_tape=True)
    breakdown, grads = escl_loss(views, config.loss)
    param_grads = backward_views(params, tape, grads)
    for name, grad in sorted(param_grads.items()):
        check_finite('gradient of %s' % name, grad)
    params, opt_state = optimizer.step(params, param_grads, opt_state)
    return params, opt_state, breakdown


@dataclass
class StepRecord:
    step: int
    breakdown: object
    wall_time: float = 0.0
    eval_rho: float = None

    def as_dict(self):
        data = {'step': self.step}
        data.update(self.breakdown.as_dict())
        if self.eval_rho is not None:
            data['eval_rho'] = self.eval_rho
        return data


class MetricTrace(object):
    """Append-only per-step records plus evaluation snapshots.

    With a ``path`` every record is written to a JSON lines file as soon as
    it is appended, so an aborted run leaves the steps it finished on disk.
    Wall times are kept in memory only; the serialized trace is a pure
    function of the run.
    """

    def __init__(self, path=None):
        self.path = path
        self.records = []
        self.evaluations = []
        self._file = None

    def open(self, resume_step=0):
        """Start writing to ``path``. Lines of steps before ``resume_step``
        already in the file are kept; anything later is dropped."""
        kept = []
        if resume_step and os.path.exists(self.path):
            kept = [line for line in self.read(self.path)
                    if line['step'] < resume_step]
        dirname = os.path.dirname(os.path.abspath(self.path))
        try:
            if not os.path.isdir(dirname):
                os.makedirs(dirname)
            fd, tmppath = tempfile.mkstemp(dir=dirname, suffix='.tmp')
            with io.open(fd, 'w', encoding='utf-8', newline='\n') as f:
                f.write(''.join(_jsonl(line) for line in kept))
            os.replace(tmppath, self.path)
            self._file = io.open(self.path, 'a', encoding='utf-8',
                                 newline='\n')
        except (IOError, OSError) as e:
            raise DataError("Cannot write trace %s: %s" % (self.path, e))
        if kept:
            logger.debug("Kept %(n)d trace records of %(path)s",
                         {'n': len(kept), 'path': self.path})

    def close(self):
        if self._file is not None:
            self._file.close()
            self._file = None

    def append(self, record):
        if self.records and record.step <= self.records[-1].step:
            raise ValueError("Trace steps must increase: %d after %d"
                             % (record.step, self.records[-1].step))
        self.records.append(record)
        if self._file is not None:
            try:
                self._file.write(_jsonl(record.as_dict()))
                self._file.flush()
            except (IOError, OSError) as e:
                raise DataError("Cannot write trace %s: %s" % (self.path, e))

    def add_evaluation(self, step, result):
        self.evaluations.append((step, result))

    def __len__(self):
        return len(self.records)

    def to_jsonl(self):
        return ''.join(_jsonl(r.as_dict()) for r in self.records)

    @staticmethod
    def read(path):
        try:
            with io.open(path, 'r', encoding='utf-8') as f:
                return [json.loads(line) for line in f if line.strip()]
        except (IOError, OSError) as e:
            raise DataError("Cannot read trace %s: %s" % (path, e))
        except ValueError as e:
            raise DataError("Trace %s is not valid JSON lines: %s" % (path, e))


def _jsonl(data):
    return json.dumps(data, sort_keys=True) + '\n'


def _checkpoint(params, state, step, config, vocab):
    return Checkpoint(params=params, vocabulary=vocab.to_list(), step=step,
                      optimizer=config.optimizer, optimizer_state=state,
                      config=config.to_dict())


def train(config, corpus, vocab, eval_pairs=None, storage=None,
          resume_from=None, dataset='dev'):
    """Run ``config.steps`` training steps.

    Every ``eval_every`` steps (and at the end) the model is evaluated
    without dropout on ``eval_pairs`` if given, and checkpointed to
    ``config.checkpoint_path`` if a storage backend is given. Returns
    ``(final checkpoint, MetricTrace)``.
    """
    corpus = list(corpus)
    if not corpus:
        raise DataError("Cannot train on an empty corpus")
    if len(corpus) < config.batch_size:
        raise ConfigError("Corpus of %d sentences is smaller than the batch "
                          "size %d" % (len(corpus), config.batch_size))
    optimizer = config.build_optimizer()
    if resume_from is not None:
        if resume_from.optimizer != config.optimizer:
            raise ConfigError("Cannot resume a %r run with optimizer %r"
                              % (resume_from.optimizer, config.optimizer))
        if resume_from.get_vocabulary() != vocab:
            raise DataError("Checkpoint vocabulary (%d tokens) does not match "
                            "the corpus vocabulary (%d tokens)"
                            % (len(resume_from.vocabulary), len(vocab)))
        params = resume_from.params
        state = resume_from.optimizer_state
        start = resume_from.step
    else:
        params = init_params(len(vocab), config.embed_dim, config.output_dim,
                             RngStream(config.seed, (STREAM_INIT,)))
        state = optimizer.init_state(params)
        start = 0

    logger.info("Training %(steps)d steps from step %(start)d with seed "
                "%(seed)d: %(config)s",
                {'steps': config.steps, 'start': start, 'seed': config.seed,
                 'config': json.dumps(config.to_dict(), sort_keys=True)})

    trace = MetricTrace(config.trace_path or None)
    if trace.path:
        trace.open(resume_step=start)
    try:
        final = _run(config, corpus, vocab, params, state, start, optimizer,
                     trace, eval_pairs, storage, dataset)
    finally:
        trace.close()
    return final, trace


def _run(config, corpus, vocab, params, state, start, optimizer, trace,
         eval_pairs, storage, dataset):
    per_epoch = len(corpus) // config.batch_size
    batches, batches_epoch = None, None
    best = None
    for step in range(start, config.steps):
        epoch, position = divmod(step, per_epoch)
        if epoch != batches_epoch:
            batches = make_batches(corpus, config.batch_size,
                                   RngStream(config.seed,
                                             (STREAM_SHUFFLE, epoch)))
            batches_epoch = epoch
        rng = RngStream(config.seed, (STREAM_MASKS, epoch, step))
        started = time.perf_counter()
        try:
            params, state, breakdown = train_step(
                params, batches[position], config, rng, state, optimizer)
        except NumericError as e:
            logger.error("Training aborted at step %(step)d: %(error)s",
                         {'step': step, 'error': e})
            raise NumericError("Training aborted at step %d: %s" % (step, e))
        record = StepRecord(step, breakdown, time.perf_counter() - started)

        done = step + 1
        if done % config.eval_every == 0 or done == config.steps:
            if eval_pairs:
                result = evaluate_sts(params, eval_pairs, dataset)
                record.eval_rho = result.rho
                trace.add_evaluation(step, result)
                if config.select_best and (best is None
                                           or result.rho > best[0]):
                    best = (result.rho, params, state, done)
            logger.info("Step %(step)d/%(steps)d: loss %(total).6f "
                        "(info_nce %(info_nce).6f, equivariant "
                        "%(equivariant).6f) gap %(gap).6f rho %(rho)s",
                        {'step': done, 'steps': config.steps,
                         'total': breakdown.total,
                         'info_nce': breakdown.info_nce,
                         'equivariant': breakdown.equivariant,
                         'gap': breakdown.gap, 'rho': record.eval_rho})
            if storage is not None and config.checkpoint_path:
                storage.store_checkpoint(
                    config.checkpoint_path,
                    _checkpoint(params, state, done, config, vocab))
        trace.append(record)

    final = _checkpoint(params, state, config.steps, config, vocab)
    if best is not None:
        _, params, state, done = best
        logger.info("Selected the checkpoint of step %(step)d (rho %(rho)s)",
                    {'step': done, 'rho': best[0]})
        final = _checkpoint(params, state, done, config, vocab)
        if storage is not None and config.checkpoint_path:
            storage.store_checkpoint(config.checkpoint_path, final)
    return final


def loss_gap(trace, head=1):
    """(gap over the first ``head`` steps, gap over the last ``head``)."""
    gaps = np.array([r.breakdown.gap for r in trace.records])
    return float(np.mean(gaps[:head])), float(np.mean(gaps[-head:]))
