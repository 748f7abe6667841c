"""
Synthetic corpora with a known similarity structure.

Tokens come in synonym classes. Training sentences hold two members of
each of a few classes, so synonyms co-occur; evaluation pairs share a
controlled number of classes, with every shared class realised by a
different member in each sentence. The gold score of a pair is the
fraction of classes the two sentences share.
"""
import logging
from dataclasses import dataclass

import numpy as np

from ..exceptions import ConfigError
from ..numerics import RngStream
from .data import StsPair, Vocabulary, format_sts_row


logger = logging.getLogger(__name__)


DEFAULT_CLASS_SIZE = 2
MIN_VOCAB_SIZE = 20
MAX_PAIR_CLASSES = 6
MIN_LEVELS = 5

TRAIN_CLASSES = (2, 4)


@dataclass(frozen=True, eq=False)
class SyntheticData:
    vocab: Vocabulary
    corpus: list
    pairs: list
    class_of: dict

    def _text(self, ids):
        tokens = self.vocab.to_list()
        return u' '.join(tokens[i] for i in ids)

    def corpus_lines(self):
        return [self._text(x) for x in self.corpus]

    def sts_rows(self):
        return [format_sts_row(self._text(p.sentence_a),
                               self._text(p.sentence_b), p.gold)
                for p in self.pairs]

    def classes(self, ids):
        return set(self.class_of[i] for i in ids if i in self.class_of)

    def oracle_score(self, pair):
        """Synonym-aware bag-of-words overlap of a pair."""
        a = self.classes(pair.sentence_a)
        b = self.classes(pair.sentence_b)
        return len(a & b) / float(max(len(a), len(b), 1))


def _ids(values):
    return tuple(int(v) for v in values)


def generate_synthetic_corpus(gen_seed, n_train, n_pairs, vocab_size,
                              class_size=DEFAULT_CLASS_SIZE):
    """Generate a training corpus and graded STS pairs."""
    for name, value in (('n_train', n_train), ('n_pairs', n_pairs),
                        ('vocab_size', vocab_size)):
        if int(value) < 1:
            raise ConfigError("%s must be at least 1, got %r" % (name, value))
    if vocab_size < MIN_VOCAB_SIZE:
        raise ConfigError("vocab_size must be at least %d, got %r"
                          % (MIN_VOCAB_SIZE, vocab_size))
    if class_size < 2:
        raise ConfigError("class_size must be at least 2, got %r" % class_size)
    if vocab_size % class_size:
        raise ConfigError("vocab_size %d is not a multiple of class_size %d"
                          % (vocab_size, class_size))
    n_classes = vocab_size // class_size
    k = min(MAX_PAIR_CLASSES, n_classes // 2)
    if k + 1 < MIN_LEVELS:
        raise ConfigError("vocab_size %d with class_size %d gives only %d "
                          "overlap levels" % (vocab_size, class_size, k + 1))

    vocab = Vocabulary('w%d_%d' % (c, m) for c in range(n_classes)
                       for m in range(class_size))
    base = len(vocab) - n_classes * class_size

    def token(cls, member):
        return base + cls * class_size + member

    class_of = dict((token(c, m), c) for c in range(n_classes)
                    for m in range(class_size))

    gen = RngStream(gen_seed, (0,)).generator()
    corpus = []
    low, high = TRAIN_CLASSES
    for _ in range(int(n_train)):
        n = int(gen.integers(low, min(high, n_classes) + 1))
        ids = []
        for cls in gen.choice(n_classes, n, replace=False):
            for member in gen.choice(class_size, 2, replace=False):
                ids.append(token(cls, member))
        corpus.append(_ids(gen.permutation(ids)))

    gen = RngStream(gen_seed, (1,)).generator()
    pairs = []
    for p in range(int(n_pairs)):
        shared = p % (k + 1)
        classes_a = gen.choice(n_classes, k, replace=False)
        others = np.setdiff1d(np.arange(n_classes), classes_a)
        classes_b = gen.choice(others, k - shared, replace=False)
        members_a = gen.integers(0, class_size, k)
        a = [token(c, m) for c, m in zip(classes_a, members_a)]
        # a shared class is realised by a different member in sentence b
        shift = gen.integers(1, class_size, shared) if shared else []
        b = [token(c, (m + s) % class_size)
             for c, m, s in zip(classes_a[:shared], members_a[:shared], shift)]
        b.extend(token(c, m) for c, m in
                 zip(classes_b, gen.integers(0, class_size, k - shared)))
        pairs.append(StsPair(_ids(gen.permutation(a)), _ids(gen.permutation(b)),
                             shared / float(k)))

    logger.debug("Generated %(n_train)d sentences and %(n_pairs)d pairs over "
                 "%(n_classes)d synonym classes",
                 {'n_train': n_train, 'n_pairs': n_pairs,
                  'n_classes': n_classes})
    return SyntheticData(vocab=vocab, corpus=corpus, pairs=pairs,
                         class_of=class_of)
