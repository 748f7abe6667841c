"""
Tensor arithmetic, seeded randomness and rank statistics.

Tensors are plain 64-bit ``numpy`` arrays. Randomness is drawn from
counter-based ``Philox`` streams addressed by a (seed, stream_id) value, so
every dropout mask can be reproduced on its own, independently of the order
in which a batch is visited.
"""
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .exceptions import (
    ConfigError, DegenerateInputError, DimensionError, NumericError,
)


FLOAT = np.float64

# relative error floor of grad_check
GRAD_CHECK_FLOOR = 1e-8


def check_finite(name, value):
    """Raise NumericError naming ``name`` if ``value`` holds NaN or Inf."""
    if not np.all(np.isfinite(np.asarray(value, dtype=FLOAT))):
        raise NumericError("Non-finite values in %s" % name)
    return value


def as_tensor(data, name='tensor'):
    """Return a fresh, finite float64 array built from ``data``."""
    arr = np.array(data, dtype=FLOAT)
    return check_finite(name, arr)


@dataclass(frozen=True)
class RngStream:
    """An addressable random stream.

    Equal (seed, stream_id) pairs always produce the same draws; ``derive``
    extends the key path to get an independent sub-stream.
    """

    seed: int
    stream_id: tuple = ()

    def __post_init__(self):
        seed = int(self.seed)
        if not 0 <= seed < 2 ** 64:
            raise ConfigError("Seed must be a 64-bit unsigned integer, got %r"
                              % (self.seed,))
        stream_id = tuple(int(k) for k in self.stream_id)
        if any(k < 0 for k in stream_id):
            raise ConfigError("Stream keys must be non-negative, got %r"
                              % (stream_id,))
        object.__setattr__(self, 'seed', seed)
        object.__setattr__(self, 'stream_id', stream_id)

    def derive(self, *keys):
        return RngStream(self.seed, self.stream_id + tuple(keys))

    def generator(self):
        seq = np.random.SeedSequence(self.seed, spawn_key=self.stream_id)
        return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class DropoutSpec:
    """A dropout rate in [0, 1)."""

    rate: float = 0.0

    def __post_init__(self):
        rate = float(self.rate)
        if not 0.0 <= rate < 1.0:
            raise ConfigError("Dropout rate must lie in [0, 1), got %r"
                              % (self.rate,))
        object.__setattr__(self, 'rate', rate)

    @property
    def scale(self):
        """Value of a kept unit under inverted dropout."""
        return 1.0 / (1.0 - self.rate)

    @classmethod
    def coerce(cls, value):
        if isinstance(value, cls):
            return value
        return cls(value)


NO_DROPOUT = DropoutSpec(0.0)


def sample_dropout_mask(shape, spec, rng):
    """Sample an inverted-dropout mask.

    Each entry is 0 with probability ``spec.rate`` and ``1 / (1 - rate)``
    otherwise, so a masked activation keeps its expectation.
    """
    spec = DropoutSpec.coerce(spec)
    shape = tuple(int(s) for s in shape)
    if spec.rate == 0.0:
        return np.ones(shape, dtype=FLOAT)
    keep = rng.generator().random(shape) >= spec.rate
    return np.where(keep, spec.scale, 0.0)


def is_valid_mask(mask, spec):
    spec = DropoutSpec.coerce(spec)
    mask = np.asarray(mask)
    return bool(np.all((mask == 0.0) | (mask == spec.scale)))


def cosine_similarity(a, b):
    """Cosine similarity of two vectors, in [-1, 1]."""
    a = np.asarray(a, dtype=FLOAT)
    b = np.asarray(b, dtype=FLOAT)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape or not a.size:
        raise DimensionError("cosine_similarity needs two vectors of equal "
                             "length, got shapes %s and %s"
                             % (a.shape, b.shape))
    norm_a = np.linalg.norm(a)
    norm_b = np.linalg.norm(b)
    if norm_a == 0.0 or norm_b == 0.0:
        raise DegenerateInputError("cosine_similarity of a zero vector")
    if np.array_equal(a, b):
        return 1.0
    return float(np.clip(np.dot(a, b) / (norm_a * norm_b), -1.0, 1.0))


def normalize_rows(matrix, name='matrix'):
    """Return (unit-norm rows, row norms)."""
    matrix = np.asarray(matrix, dtype=FLOAT)
    if matrix.ndim != 2:
        raise DimensionError("%s must be a matrix, got shape %s"
                             % (name, matrix.shape))
    norms = np.linalg.norm(matrix, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise DegenerateInputError("Zero-norm row %d in %s" % (zero[0], name))
    return matrix / norms[:, None], norms


def normalize_rows_backward(grad_unit, unit, norms):
    """Pull a gradient w.r.t. unit rows back to the unnormalized rows."""
    radial = np.sum(grad_unit * unit, axis=1, keepdims=True)
    return (grad_unit - radial * unit) / norms[:, None]


def row_cosine(a_unit, b_unit):
    """Row-wise cosine of two matrices of unit rows."""
    return np.sum(a_unit * b_unit, axis=1)


def pairwise_cosine(a_unit, b_unit):
    """All-pairs cosine matrix ``S[i, j] = sim(a_i, b_j)``."""
    return a_unit @ b_unit.T


def spearman_rho(mu, nu):
    """Spearman's rank correlation.

    Both lists are ranked (ties share the average of their positions) and
    the product-moment correlation of the rank vectors is returned.

    >>> spearman_rho([1, 2, 3], [10, 20, 30])
    1.0
    >>> spearman_rho([1, 2, 3], [3, 2, 1])
    -1.0

    """
    mu = np.asarray(mu, dtype=FLOAT)
    nu = np.asarray(nu, dtype=FLOAT)
    if mu.ndim != 1 or mu.shape != nu.shape:
        raise DimensionError("spearman_rho needs two lists of equal length, "
                             "got %d and %d" % (mu.size, nu.size))
    if mu.size < 2:
        raise DimensionError("spearman_rho needs at least two observations")
    check_finite('spearman_rho input', mu)
    check_finite('spearman_rho input', nu)
    du = rankdata(mu) - (mu.size + 1) / 2.0
    dv = rankdata(nu) - (nu.size + 1) / 2.0
    su = np.dot(du, du)
    sv = np.dot(dv, dv)
    if su == 0.0 or sv == 0.0:
        raise DegenerateInputError("spearman_rho of a constant list")
    rho = np.dot(du, dv) / np.sqrt(su * sv)
    return float(np.clip(rho, -1.0, 1.0))


def _loss_value(result):
    if isinstance(result, tuple):
        return float(result[0])
    return float(result)


def grad_check(loss_fn, params, eps=1e-5, max_components=256, rng=None):
    """Compare analytic gradients against central finite differences.

    ``loss_fn`` maps params to ``(value, grads)``. ``params`` is either an
    array (and ``grads`` an array of the same shape) or a dict of named
    arrays (and ``grads`` a dict with the same keys). When there are more
    than ``max_components`` components a random subset of that size is
    probed. Returns the largest relative error.
    """
    if not eps > 0:
        raise ConfigError("grad_check step must be positive, got %r" % eps)
    single = not isinstance(params, dict)
    if single:
        base = {'x': as_tensor(params, 'params')}

        def call(p):
            return loss_fn(p['x'])
    else:
        base = dict((name, as_tensor(value, name))
                    for name, value in params.items())
        call = loss_fn

    value, grads = call(base)
    if single:
        grads = {'x': grads}
    check_finite('loss at the probe centre', value)

    components = [(name, idx) for name in sorted(base)
                  for idx in np.ndindex(base[name].shape)]
    if len(components) > max_components:
        rng = rng or RngStream(0)
        chosen = rng.generator().choice(len(components), max_components,
                                        replace=False)
        components = [components[i] for i in sorted(chosen)]

    worst = 0.0
    for name, idx in components:
        probe = dict(base)
        shifted = base[name].copy()
        shifted[idx] = base[name][idx] + eps
        probe[name] = shifted
        f_plus = _loss_value(call(probe))
        shifted = base[name].copy()
        shifted[idx] = base[name][idx] - eps
        probe[name] = shifted
        f_minus = _loss_value(call(probe))
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NumericError("Non-finite loss probing %s%s" % (name, idx))
        numeric = (f_plus - f_minus) / (2.0 * eps)
        analytic = float(np.asarray(grads[name])[idx])
        error = abs(analytic - numeric) / max(GRAD_CHECK_FLOOR,
                                              abs(analytic) + abs(numeric))
        worst = max(worst, error)
    return worst
