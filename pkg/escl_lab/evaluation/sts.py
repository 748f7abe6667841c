"""
Fixed-embedding STS evaluation and the dropout sensitivity probe.

Embeddings are always taken without dropout; nothing here updates the
encoder.
"""
import logging
from dataclasses import dataclass

import numpy as np

from ..encoder import embed, encode
from ..exceptions import ConfigError, DataError, DegenerateInputError
from ..numerics import (
    DropoutSpec, cosine_similarity, normalize_rows, row_cosine,
    sample_dropout_mask, spearman_rho,
)


logger = logging.getLogger(__name__)


MIN_PROBE_TRIALS = 10


@dataclass(frozen=True)
class EvalResult:
    dataset: str
    rho: float
    n_pairs: int
    seeds: tuple = ()
    per_seed_rho: tuple = ()
    std: float = 0.0

    def __post_init__(self):
        if not -1.0 <= self.rho <= 1.0:
            raise DataError("rho out of range: %r" % self.rho)
        if self.n_pairs < 2:
            raise DataError("An evaluation needs at least 2 pairs")
        object.__setattr__(self, 'seeds', tuple(self.seeds))
        object.__setattr__(self, 'per_seed_rho', tuple(self.per_seed_rho))

    def as_dict(self):
        data = {'dataset': self.dataset, 'rho': self.rho,
                'n_pairs': self.n_pairs}
        if self.seeds:
            data.update(seeds=list(self.seeds),
                        per_seed_rho=list(self.per_seed_rho), std=self.std)
        return data

    @classmethod
    def aggregate(cls, results, seeds):
        """Summarise per-seed results of one dataset: mean and sample std."""
        results = list(results)
        if not results or len(results) != len(seeds):
            raise DataError("Need one result per seed, got %d for %d seeds"
                            % (len(results), len(seeds)))
        rhos = np.array([r.rho for r in results])
        std = float(np.std(rhos, ddof=1)) if rhos.size > 1 else 0.0
        return cls(dataset=results[0].dataset, rho=float(np.mean(rhos)),
                   n_pairs=results[0].n_pairs, seeds=seeds,
                   per_seed_rho=tuple(float(r) for r in rhos), std=std)


def score_similarities(similarities, gold, dataset='sts'):
    """Spearman correlation of predicted similarities and gold scores."""
    similarities = np.asarray(similarities, dtype=float)
    gold = np.asarray(gold, dtype=float)
    if gold.size < 2:
        raise DataError("Dataset %s needs at least 2 pairs, got %d"
                        % (dataset, gold.size))
    if np.all(gold == gold[0]):
        raise DegenerateInputError("Gold scores of dataset %s are constant"
                                   % dataset)
    if np.all(similarities == similarities[0]):
        raise DegenerateInputError("Degenerate similarities on dataset %s: "
                                   "every pair scores %r"
                                   % (dataset, float(similarities[0])))
    return EvalResult(dataset=dataset, rho=spearman_rho(similarities, gold),
                      n_pairs=int(gold.size))


def score_embeddings(emb_a, emb_b, gold, dataset='sts'):
    """Score row-aligned embedding matrices of the two pair sides."""
    unit_a, _ = normalize_rows(emb_a, '%s sentence_a embeddings' % dataset)
    unit_b, _ = normalize_rows(emb_b, '%s sentence_b embeddings' % dataset)
    similarities = np.clip(row_cosine(unit_a, unit_b), -1.0, 1.0)
    same = np.all(np.asarray(emb_a) == np.asarray(emb_b), axis=1)
    similarities[same] = 1.0
    return score_similarities(similarities, gold, dataset)


def evaluate_sts(params, pairs, dataset='sts'):
    """Spearman's rho between cosine similarities and gold scores."""
    pairs = list(pairs)
    if len(pairs) < 2:
        raise DataError("Dataset %s needs at least 2 pairs, got %d"
                        % (dataset, len(pairs)))
    gold = [p.gold for p in pairs]
    if len(set(gold)) < 2:
        raise DegenerateInputError("Gold scores of dataset %s are constant"
                                   % dataset)
    emb_a = np.vstack([embed(params, p.sentence_a) for p in pairs])
    emb_b = np.vstack([embed(params, p.sentence_b) for p in pairs])
    return score_embeddings(emb_a, emb_b, gold, dataset)


@dataclass(frozen=True)
class ProbeResult:
    rate: float
    drift: float
    stderr: float
    trials: int

    def as_dict(self):
        return {'rate': self.rate, 'drift': self.drift,
                'stderr': self.stderr, 'trials': self.trials}


def sensitivity_probe(params, sentences, rates, trials, rng):
    """Mean cosine drift ``1 - sim(f(x, no dropout), f(x, r, m))`` per rate.

    The standard error is taken over per-trial means.
    """
    rates = [DropoutSpec.coerce(r) for r in rates]
    if [r.rate for r in rates] != sorted(r.rate for r in rates):
        raise ConfigError("Probe rates must be sorted ascending, got %s"
                          % [r.rate for r in rates])
    if trials < MIN_PROBE_TRIALS:
        raise ConfigError("The probe needs at least %d trials, got %r"
                          % (MIN_PROBE_TRIALS, trials))
    sentences = list(sentences)
    if not sentences:
        raise DataError("The probe needs at least one sentence")
    clean = [embed(params, x) for x in sentences]

    results = []
    for ri, spec in enumerate(rates):
        per_trial = np.zeros(trials)
        for t in range(trials):
            drift = 0.0
            for i, x in enumerate(sentences):
                mask = sample_dropout_mask((len(x), params.embed_dim), spec,
                                           rng.derive(ri, t, i))
                h = encode(params, x, spec, mask)
                drift += 1.0 - cosine_similarity(clean[i], h)
            per_trial[t] = drift / len(sentences)
        stderr = float(np.std(per_trial, ddof=1) / np.sqrt(trials))
        results.append(ProbeResult(rate=spec.rate,
                                   drift=float(np.mean(per_trial)),
                                   stderr=stderr, trials=int(trials)))
        logger.debug("Drift at rate %(rate)s: %(drift).6f +- %(stderr).6f",
                     results[-1].as_dict())
    return results
