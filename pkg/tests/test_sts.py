import unittest

import numpy as np

from escl_lab.encoder import EncoderParams, init_params
from escl_lab.evaluation.data import StsPair
from escl_lab.evaluation.sts import (
    EvalResult, evaluate_sts, score_embeddings, sensitivity_probe,
)
from escl_lab.evaluation.synthetic import generate_synthetic_corpus
from escl_lab.exceptions import ConfigError, DataError, DegenerateInputError
from escl_lab.numerics import RngStream


def identity_encoder():
    """Token 2 -> e1, token 3 -> e2, token 4 -> e1 + e2, identity projection."""
    embeddings = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0],
                           [1.0, 1.0]])
    return EncoderParams(embeddings, np.eye(2), np.zeros(2))


class EvaluateStsTest(unittest.TestCase):

    def test_agreeing_pair_order(self):
        pairs = [StsPair((2,), (3,), 0.1), StsPair((2,), (4,), 0.9)]
        result = evaluate_sts(identity_encoder(), pairs, 'toy')
        self.assertEqual(result.rho, 1.0)
        self.assertEqual(result.n_pairs, 2)
        self.assertEqual(result.dataset, 'toy')

    def test_identical_sentences_are_degenerate(self):
        pairs = [StsPair((2, 3), (2, 3), float(g)) for g in range(4)]
        with self.assertRaises(DegenerateInputError) as cm:
            evaluate_sts(identity_encoder(), pairs, 'same')
        self.assertIn('same', str(cm.exception))

    def test_constant_gold(self):
        pairs = [StsPair((2,), (3,), 1.0), StsPair((2,), (4,), 1.0)]
        with self.assertRaises(DegenerateInputError) as cm:
            evaluate_sts(identity_encoder(), pairs, 'flat')
        self.assertIn('flat', str(cm.exception))

    def test_too_few_pairs(self):
        self.assertRaises(DataError, evaluate_sts, identity_encoder(),
                          [StsPair((2,), (3,), 1.0)])

    def test_invariances(self):
        gen = RngStream(3).generator()
        emb_a = gen.normal(size=(40, 6))
        emb_b = gen.normal(size=(40, 6))
        gold = gen.uniform(0, 5, 40)
        rho = score_embeddings(emb_a, emb_b, gold).rho
        self.assertAlmostEqual(score_embeddings(2.0 * emb_a, 2.0 * emb_b,
                                                gold).rho, rho, places=12)
        self.assertAlmostEqual(score_embeddings(emb_a, emb_b,
                                                np.log1p(gold)).rho,
                               rho, places=12)
        order = gen.permutation(40)
        self.assertAlmostEqual(score_embeddings(emb_a[order], emb_b[order],
                                                gold[order]).rho,
                               rho, places=12)

    def test_untrained_encoder_is_near_chance(self):
        data = generate_synthetic_corpus(0, 8, 256, 200)
        rhos = []
        for seed in range(10):
            params = init_params(len(data.vocab), 32, 32, RngStream(seed))
            rhos.append(evaluate_sts(params, data.pairs).rho)
        self.assertLess(abs(np.mean(rhos)), 0.15)

    def test_aggregate(self):
        results = [EvalResult('dev', rho, 10) for rho in (0.2, 0.4, 0.6)]
        summary = EvalResult.aggregate(results, (1, 2, 3))
        self.assertAlmostEqual(summary.rho, 0.4)
        self.assertAlmostEqual(summary.std, 0.2)
        self.assertEqual(summary.per_seed_rho, (0.2, 0.4, 0.6))
        self.assertEqual(summary.as_dict()['seeds'], [1, 2, 3])
        self.assertRaises(DataError, EvalResult.aggregate, results, (1, 2))

    def test_result_invariants(self):
        self.assertRaises(DataError, EvalResult, 'dev', 1.5, 10)
        self.assertRaises(DataError, EvalResult, 'dev', 0.5, 1)


class SensitivityProbeTest(unittest.TestCase):

    def setUp(self):
        self.params = init_params(30, 16, 8, RngStream(0))
        gen = RngStream(1).generator()
        self.sentences = [tuple(int(t) for t in gen.integers(2, 30, n))
                          for n in (3, 5, 4, 6, 2, 7)]

    def test_rate_zero_has_no_drift(self):
        result, = sensitivity_probe(self.params, self.sentences, [0.0], 10,
                                    RngStream(2))
        self.assertEqual(result.drift, 0.0)
        self.assertEqual(result.stderr, 0.0)

    def test_preconditions(self):
        self.assertRaises(ConfigError, sensitivity_probe, self.params,
                          self.sentences, [0.45, 0.1], 10, RngStream(0))
        self.assertRaises(ConfigError, sensitivity_probe, self.params,
                          self.sentences, [0.1], 9, RngStream(0))
        self.assertRaises(DataError, sensitivity_probe, self.params, [],
                          [0.1], 10, RngStream(0))

    def test_drift_grows_with_rate(self):
        low, high = sensitivity_probe(self.params, self.sentences,
                                      [0.1, 0.45], 100, RngStream(3))
        margin = 3 * np.hypot(low.stderr, high.stderr)
        self.assertGreater(high.drift - low.drift, margin)

    def test_doubling_trials_converges(self):
        short, = sensitivity_probe(self.params, self.sentences, [0.25], 100,
                                   RngStream(4))
        long_, = sensitivity_probe(self.params, self.sentences, [0.25], 200,
                                   RngStream(4))
        self.assertLess(abs(short.drift - long_.drift),
                        2 * np.hypot(short.stderr, long_.stderr))
