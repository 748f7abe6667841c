from .data import (
    PAD_ID, UNK_ID, IngestReport, StsPair, Vocabulary, build_vocab,
    load_corpus, load_sts, parse_sts_lines, tokenize,
)
from .synthetic import SyntheticData, generate_synthetic_corpus
from .sts import (
    EvalResult, ProbeResult, evaluate_sts, score_embeddings,
    score_similarities, sensitivity_probe,
)
from .ablation import AblationReport, run_ablation
