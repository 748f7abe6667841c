"""
Corpus and STS file ingestion.

Corpus files hold one sentence per line. STS files are header-less,
tab-separated ``sentence_a<TAB>sentence_b<TAB>score`` lines.
"""
import io
import logging
import math
from dataclasses import dataclass, field

from ..exceptions import DataError


logger = logging.getLogger(__name__)


PAD_ID = 0
UNK_ID = 1
RESERVED_TOKENS = ('<pad>', '<unk>')


class Vocabulary(object):
    """Token to id map. Ids 0 and 1 are reserved for padding and unknown
    tokens; the rest are assigned in insertion order.
    """

    def __init__(self, tokens=()):
        self._tokens = list(RESERVED_TOKENS)
        self._ids = dict((tok, i) for i, tok in enumerate(self._tokens))
        for token in tokens:
            self.add(token)

    def add(self, token):
        if token not in self._ids:
            self._ids[token] = len(self._tokens)
            self._tokens.append(token)
        return self._ids[token]

    def __len__(self):
        return len(self._tokens)

    def __contains__(self, token):
        return token in self._ids and token not in RESERVED_TOKENS

    def __eq__(self, other):
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self._tokens == other._tokens

    __hash__ = None

    def id_of(self, token):
        return self._ids.get(token, UNK_ID)

    def tokens(self):
        """Non-reserved tokens in id order."""
        return self._tokens[len(RESERVED_TOKENS):]

    def to_list(self):
        return list(self._tokens)

    @classmethod
    def from_list(cls, tokens):
        tokens = list(tokens)
        if tuple(tokens[:len(RESERVED_TOKENS)]) != RESERVED_TOKENS:
            raise DataError("Serialized vocabulary must start with %s"
                            % (RESERVED_TOKENS,))
        vocab = cls(tokens[len(RESERVED_TOKENS):])
        if len(vocab) != len(tokens):
            raise DataError("Serialized vocabulary holds duplicate tokens")
        return vocab


@dataclass
class IngestReport:
    """Counts of a bulk ingestion run."""

    source: str = '<lines>'
    lines_read: int = 0
    lines_skipped: int = 0
    skipped_line_numbers: list = field(default_factory=list)

    def skip(self, lineno, reason):
        self.lines_skipped += 1
        self.skipped_line_numbers.append(lineno)
        logger.warning("Skipped line %(lineno)d of %(source)s: %(reason)s",
                       {'lineno': lineno, 'source': self.source,
                        'reason': reason})

    def as_dict(self):
        return {
            'source': self.source,
            'lines_read': self.lines_read,
            'lines_skipped': self.lines_skipped,
            'skipped_line_numbers': list(self.skipped_line_numbers),
        }


def split_tokens(line):
    return line.lower().split()


def build_vocab(lines, report=None):
    """Build a vocabulary from raw lines, ids in first-occurrence order.

    Empty lines are skipped with a warning and counted in ``report``.
    """
    report = report if report is not None else IngestReport()
    vocab = Vocabulary()
    seen = False
    for lineno, line in enumerate(lines, 1):
        report.lines_read += 1
        tokens = split_tokens(line)
        if not tokens:
            report.skip(lineno, 'empty line')
            continue
        seen = True
        for token in tokens:
            vocab.add(token)
    if not seen:
        raise DataError("Cannot build a vocabulary from empty input (%s)"
                        % report.source)
    return vocab


def tokenize(line, vocab):
    """Lowercased whitespace tokenization; unseen tokens map to UNK."""
    tokens = split_tokens(line)
    if not tokens:
        raise DataError("Cannot tokenize an empty line")
    return tuple(vocab.id_of(token) for token in tokens)


@dataclass(frozen=True)
class StsPair:
    sentence_a: tuple
    sentence_b: tuple
    gold: float

    def __post_init__(self):
        if not self.sentence_a or not self.sentence_b:
            raise DataError("STS pairs need two non-empty sentences")


def _read_lines(path):
    try:
        with io.open(path, 'r', encoding='utf-8') as f:
            return f.read().splitlines()
    except (IOError, OSError) as e:
        raise DataError("Cannot read %s: %s" % (path, e))
    except UnicodeDecodeError as e:
        raise DataError("%s is not valid UTF-8: %s" % (path, e))


def load_corpus(path, vocab=None):
    """Read a corpus file.

    Returns ``(vocab, sentences, report)``; the vocabulary is built from the
    file unless one is given.
    """
    report = IngestReport(source=path)
    kept = []
    for lineno, line in enumerate(_read_lines(path), 1):
        report.lines_read += 1
        if not line.strip():
            report.skip(lineno, 'empty line')
            continue
        kept.append(line)
    if not kept:
        raise DataError("Corpus %s holds no sentences" % path)
    if vocab is None:
        vocab = build_vocab(kept)
    sentences = [tokenize(line, vocab) for line in kept]
    logger.info("Loaded %(n)d sentences from %(path)s (%(skipped)d skipped)",
                {'n': len(sentences), 'path': path,
                 'skipped': report.lines_skipped})
    return vocab, sentences, report


def parse_sts_lines(lines, vocab, source='<lines>'):
    """Parse STS lines; any malformed line rejects the whole input."""
    pairs, errors = [], []
    for lineno, line in enumerate(lines, 1):
        columns = line.split('\t')
        if len(columns) != 3:
            errors.append((lineno, 'expected 3 tab-separated columns, got %d'
                           % len(columns)))
            continue
        text_a, text_b, score = columns
        if not text_a.strip() or not text_b.strip():
            errors.append((lineno, 'empty sentence'))
            continue
        try:
            gold = float(score)
        except ValueError:
            errors.append((lineno, 'score %r is not a number' % score))
            continue
        if not math.isfinite(gold):
            errors.append((lineno, 'score %r is not finite' % score))
            continue
        pairs.append(StsPair(tokenize(text_a, vocab), tokenize(text_b, vocab),
                             gold))
    if errors:
        raise DataError("Malformed STS lines in %s: %s" % (source, '; '.join(
            'line %d: %s' % (lineno, reason) for lineno, reason in errors)))
    return pairs


def load_sts(path, vocab):
    pairs = parse_sts_lines(_read_lines(path), vocab, source=path)
    logger.info("Loaded %(n)d STS pairs from %(path)s",
                {'n': len(pairs), 'path': path})
    return pairs


def write_lines(path, lines):
    try:
        with io.open(path, 'w', encoding='utf-8', newline='\n') as f:
            for line in lines:
                f.write(line)
                f.write(u'\n')
    except (IOError, OSError) as e:
        raise DataError("Cannot write %s: %s" % (path, e))


def format_sts_row(text_a, text_b, gold):
    return u'%s\t%s\t%r' % (text_a, text_b, float(gold))
