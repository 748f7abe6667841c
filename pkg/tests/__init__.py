import os

from escl_lab.evaluation.synthetic import generate_synthetic_corpus
from escl_lab.training import TrainConfig

# Absolutize paths to coverage config and output file because the ablation
# tests spawn worker processes.
_sourceroot = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if 'COV_CORE_CONFIG' in os.environ:
    os.environ['COVERAGE_FILE'] = os.path.join(_sourceroot, '.coverage')
    os.environ['COV_CORE_CONFIG'] = os.path.join(_sourceroot,
                                                 os.environ['COV_CORE_CONFIG'])


def tiny_data(gen_seed=0, n_train=32, n_pairs=24, vocab_size=20):
    """A small synthetic benchmark for fast training tests."""
    return generate_synthetic_corpus(gen_seed, n_train, n_pairs, vocab_size)


def tiny_config(**changes):
    values = dict(batch_size=8, steps=6, eval_every=3, embed_dim=8,
                  output_dim=8, checkpoint_path='', trace_path='')
    values.update(changes)
    return TrainConfig(**values)
