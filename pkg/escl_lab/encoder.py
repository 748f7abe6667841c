"""
The sentence encoder.

A sentence is embedded by looking up its token vectors, applying a dropout
mask to them, mean-pooling over positions and passing the pooled vector
through a tanh-affine projection. The same parameters serve every dropout
view of a sentence.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, DataError, DimensionError
from .numerics import (
    FLOAT, NO_DROPOUT, DropoutSpec, as_tensor, is_valid_mask,
    sample_dropout_mask,
)


logger = logging.getLogger(__name__)


PARAM_NAMES = ('token_embeddings', 'projection_weight', 'projection_bias')

# view indices, also used as the last key of each mask stream
VIEW_ANCHOR = 0
VIEW_POSITIVE = 1
VIEW_NEGATIVE = 2

# spread of token vectors around the shared centroid at initialisation
INIT_OFFSET_SCALE = 0.1


def _frozen(arr, name):
    arr = as_tensor(arr, name)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class EncoderParams:
    """All trainable weights of the encoder."""

    token_embeddings: np.ndarray
    projection_weight: np.ndarray
    projection_bias: np.ndarray

    def __post_init__(self):
        for name in PARAM_NAMES:
            object.__setattr__(self, name, _frozen(getattr(self, name), name))
        emb, weight, bias = (self.token_embeddings, self.projection_weight,
                             self.projection_bias)
        if emb.ndim != 2 or weight.ndim != 2 or bias.ndim != 1:
            raise DimensionError("Encoder parameters have wrong ranks: %s %s %s"
                                 % (emb.shape, weight.shape, bias.shape))
        if weight.shape[0] != emb.shape[1] or weight.shape[1] != bias.shape[0]:
            raise DimensionError(
                "Inconsistent encoder dimensions: embeddings %s, projection "
                "%s, bias %s" % (emb.shape, weight.shape, bias.shape))

    @property
    def vocab_size(self):
        return self.token_embeddings.shape[0]

    @property
    def embed_dim(self):
        return self.token_embeddings.shape[1]

    @property
    def output_dim(self):
        return self.projection_weight.shape[1]

    def as_dict(self):
        return dict((name, getattr(self, name)) for name in PARAM_NAMES)

    def replace(self, **arrays):
        values = self.as_dict()
        values.update(arrays)
        return EncoderParams(**values)

    def __eq__(self, other):
        if not isinstance(other, EncoderParams):
            return NotImplemented
        return all(np.array_equal(getattr(self, name), getattr(other, name))
                   for name in PARAM_NAMES)

    __hash__ = None


def init_params(vocab_size, embed_dim, output_dim, rng,
                offset_scale=INIT_OFFSET_SCALE):
    """Glorot-uniform projection and zero bias. Every token vector is one
    shared Glorot-uniform centroid plus its own Glorot-uniform offset scaled
    by ``offset_scale``; ``offset_scale=None`` draws independent Glorot rows
    instead."""
    counts = {'vocab_size': vocab_size, 'embed_dim': embed_dim,
              'output_dim': output_dim}
    for name, value in counts.items():
        if int(value) < 1:
            raise ConfigError("%s must be at least 1, got %r" % (name, value))
    if offset_scale is not None and not (np.isfinite(offset_scale)
                                         and offset_scale > 0):
        raise ConfigError("offset_scale must be positive, got %r"
                          % (offset_scale,))
    vocab_size, embed_dim, output_dim = (int(vocab_size), int(embed_dim),
                                         int(output_dim))
    gen = rng.generator()
    bound = np.sqrt(6.0 / (vocab_size + embed_dim))
    embeddings = gen.uniform(-bound, bound, (vocab_size, embed_dim))
    if offset_scale is not None:
        centroid = gen.uniform(-bound, bound, embed_dim)
        embeddings = centroid + offset_scale * embeddings
    bound = np.sqrt(6.0 / (embed_dim + output_dim))
    weight = gen.uniform(-bound, bound, (embed_dim, output_dim))
    return EncoderParams(embeddings, weight, np.zeros(output_dim))


def check_tokens(x, vocab_size):
    """Validate a token sequence and return it as an index array."""
    ids = np.asarray(x)
    if ids.ndim != 1 or not ids.size:
        raise DataError("Token sequences must be non-empty, got %r" % (x,))
    if not np.issubdtype(ids.dtype, np.integer):
        raise DataError("Token ids must be integers, got %r" % (x,))
    if ids.min() < 0 or ids.max() >= vocab_size:
        raise DimensionError("Token id out of range for a vocabulary of %d: %r"
                             % (vocab_size, x))
    return ids


def _forward(params, ids, spec, mask):
    mask = np.asarray(mask, dtype=FLOAT)
    if mask.shape != (ids.size, params.embed_dim):
        raise DimensionError("Mask shape %s does not match (%d, %d)"
                             % (mask.shape, ids.size, params.embed_dim))
    if not is_valid_mask(mask, spec):
        raise DataError("Mask entries are inconsistent with dropout rate %r"
                        % DropoutSpec.coerce(spec).rate)
    pooled = np.mean(params.token_embeddings[ids] * mask, axis=0)
    h = np.tanh(pooled @ params.projection_weight + params.projection_bias)
    return h, pooled


def encode(params, x, spec, mask):
    """Embed one sentence under one dropout mask."""
    ids = check_tokens(x, params.vocab_size)
    h, _ = _forward(params, ids, spec, mask)
    return h


def embed(params, x):
    """Inference embedding: no dropout."""
    ids = check_tokens(x, params.vocab_size)
    mask = np.ones((ids.size, params.embed_dim))
    h, _ = _forward(params, ids, NO_DROPOUT, mask)
    return h


def zero_grads(params):
    return dict((name, np.zeros_like(arr))
                for name, arr in params.as_dict().items())


def _accumulate(params, ids, mask, pooled, h, grad_h, out):
    dz = grad_h * (1.0 - h * h)
    out['projection_weight'] += np.outer(pooled, dz)
    out['projection_bias'] += dz
    d_pooled = params.projection_weight @ dz
    rows = mask * (d_pooled / ids.size)[None, :]
    np.add.at(out['token_embeddings'], ids, rows)


def encode_backward(params, x, spec, mask, grad_h):
    """Parameter gradients of ``grad_h . encode(params, x, spec, mask)``."""
    ids = check_tokens(x, params.vocab_size)
    h, pooled = _forward(params, ids, spec, mask)
    out = zero_grads(params)
    _accumulate(params, ids, np.asarray(mask, dtype=FLOAT), pooled, h,
                np.asarray(grad_h, dtype=FLOAT), out)
    return out


@dataclass(frozen=True, eq=False)
class BatchViews:
    """The anchor, positive and negative embeddings of a minibatch.

    Row ``i`` of each matrix belongs to sentence ``i``. The same container
    carries row gradients when returned by the losses.
    """

    H: np.ndarray
    H_pos: np.ndarray
    H_neg: np.ndarray

    def __post_init__(self):
        for name in ('H', 'H_pos', 'H_neg'):
            object.__setattr__(self, name, as_tensor(getattr(self, name), name))
        if not (self.H.ndim == 2 and self.H.shape == self.H_pos.shape
                == self.H_neg.shape):
            raise DimensionError("Views must share one (N, d) shape, got "
                                 "%s %s %s" % (self.H.shape, self.H_pos.shape,
                                               self.H_neg.shape))

    @property
    def shape(self):
        return self.H.shape

    def __iter__(self):
        return iter((self.H, self.H_pos, self.H_neg))


class ViewTape(object):
    """Forward-pass records needed to backpropagate through a batch."""

    def __init__(self):
        self.records = []

    def add(self, view, ids, mask, pooled, h):
        self.records.append((view, ids, mask, pooled, h))


def embed_batch_views(params, batch, r_low, r_high, rng, keys=None,
                      return_tape=False):
    """Encode every sentence three times: twice at ``r_low``, once at
    ``r_high``.

    The mask of sentence ``i`` in view ``v`` comes from the stream
    ``rng.derive(keys[i], v)``; ``keys`` default to batch positions and
    should be corpus indices when sentences have a stable identity.
    """
    r_low = DropoutSpec.coerce(r_low)
    r_high = DropoutSpec.coerce(r_high)
    if not len(batch):
        raise DataError("Cannot embed an empty batch")
    if r_low.rate > r_high.rate or (r_low.rate == r_high.rate
                                    and r_high.rate > 0.0):
        raise ConfigError("r_low (%r) must be below r_high (%r)"
                          % (r_low.rate, r_high.rate))
    keys = list(range(len(batch))) if keys is None else list(keys)
    if len(keys) != len(batch):
        raise DimensionError("Got %d stream keys for %d sentences"
                             % (len(keys), len(batch)))

    tape = ViewTape() if return_tape else None
    sequences = [check_tokens(x, params.vocab_size) for x in batch]
    views = []
    for view, spec in ((VIEW_ANCHOR, r_low), (VIEW_POSITIVE, r_low),
                       (VIEW_NEGATIVE, r_high)):
        rows = []
        for ids, key in zip(sequences, keys):
            mask = sample_dropout_mask((ids.size, params.embed_dim), spec,
                                       rng.derive(key, view))
            h, pooled = _forward(params, ids, spec, mask)
            rows.append(h)
            if tape is not None:
                tape.add(view, ids, mask, pooled, h)
        views.append(np.vstack(rows))
    result = BatchViews(*views)
    if return_tape:
        return result, tape
    return result


def backward_views(params, tape, grads):
    """Accumulate parameter gradients from row gradients of all views."""
    out = zero_grads(params)
    rows = [iter(g) for g in grads]
    for view, ids, mask, pooled, h in tape.records:
        _accumulate(params, ids, mask, pooled, h, next(rows[view]), out)
    return out
