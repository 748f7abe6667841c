"""
The ``escl-lab`` command line.

Machine output goes to stdout as JSON lines; human logs go to stderr.
"""
import argparse
import functools
import json
import logging
import os
import sys

from scrapy.utils.log import configure_logging

from . import __version__
from .config import (
    get_settings, setting_name, write_provenance, write_resolved_config,
)
from .encoder import (
    BatchViews, EncoderParams, backward_views, embed_batch_views, init_params,
)
from .evaluation.ablation import run_ablation
from .evaluation.data import load_corpus, load_sts, write_lines
from .evaluation.sts import evaluate_sts, sensitivity_probe
from .evaluation.synthetic import generate_synthetic_corpus
from .exceptions import (
    EXIT_OK, ConfigError, DataError, EsclError, NumericError, UsageError,
    exit_code_for,
)
from .losses import (
    LossConfig, cossim_loss_grad, escl_loss, info_nce_grad, rd_loss_grad,
)
from .numerics import RngStream, grad_check
from .storage import CheckpointStorage
from .training import TrainConfig, train


logger = logging.getLogger(__name__)


CORPUS_FILE = 'corpus.txt'
STS_FILE = 'sts.tsv'

GRADCHECK_TOLERANCE = 1e-4
GRADCHECK_EPS = 1e-5
GRADCHECK_TEMPERATURE = 0.1

DEFAULT_RATES = '0.35,0.40,0.45,0.50'
DEFAULT_VARIANTS = 'rd,cossim'
DEFAULT_SEEDS = '0,1'


class ArgumentParser(argparse.ArgumentParser):
    """Reports usage errors as UsageError instead of exiting."""

    def error(self, message):
        raise UsageError("%s: %s" % (self.prog, message))


def positive_int(value):
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError("%r is not an integer" % value)
    if number < 1:
        raise argparse.ArgumentTypeError("must be at least 1, got %d" % number)
    return number


def seed_value(value):
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError("%r is not an integer" % value)
    if not 0 <= number < 2 ** 64:
        raise argparse.ArgumentTypeError("seeds are 64-bit unsigned integers")
    return number


def comma_list(convert):
    def parse(value):
        try:
            items = [convert(v.strip()) for v in value.split(',') if v.strip()]
        except ValueError as e:
            raise argparse.ArgumentTypeError(str(e))
        if not items:
            raise argparse.ArgumentTypeError("empty list")
        return items
    return parse


def parse_overrides(extras):
    """Turn leftover ``--key value`` / ``--key=value`` arguments into a
    config key -> string value dict."""
    overrides = {}
    args = iter(extras)
    for arg in args:
        if not arg.startswith('--'):
            raise UsageError("Unexpected argument: %r" % arg)
        key = arg[2:]
        if '=' in key:
            key, value = key.split('=', 1)
        else:
            value = next(args, None)
            if value is None:
                raise UsageError("Missing value for --%s" % key)
        key = key.replace('-', '_')
        try:
            setting_name(key)
        except ConfigError:
            raise UsageError("Unknown option --%s (not a config key)" % key)
        overrides[key] = value
    return overrides


def build_parser():
    parser = ArgumentParser(
        prog='escl-lab', allow_abbrev=False,
        description="Equivariant self-contrastive learning of sentence "
                    "embeddings at desk scale.")
    parser.add_argument('--version', action='version',
                        version='%(prog)s ' + __version__)
    parser.add_argument('--log-level', default=None,
                        help="logging level (default: INFO)")
    commands = parser.add_subparsers(dest='command', metavar='COMMAND',
                                     parser_class=ArgumentParser)
    commands.required = True

    cmd = commands.add_parser(
        'gen-data', allow_abbrev=False,
        help="write a synthetic corpus and STS pairs")
    cmd.add_argument('--seed', type=seed_value, default=0,
                     help="generator seed (default: 0)")
    cmd.add_argument('--out-dir', required=True,
                     help="directory for %s and %s" % (CORPUS_FILE, STS_FILE))
    cmd.add_argument('--n-train', type=positive_int, default=512,
                     help="training sentences (default: 512)")
    cmd.add_argument('--n-pairs', type=positive_int, default=256,
                     help="evaluation pairs (default: 256)")
    cmd.add_argument('--vocab-size', type=positive_int, default=200,
                     help="synthetic vocabulary size, an even number of at "
                          "least 20 (default: 200)")
    cmd.add_argument('--force', action='store_true',
                     help="overwrite existing files")

    cmd = commands.add_parser(
        'train', allow_abbrev=False,
        help="train an encoder; config keys may be overridden with "
             "--key value, e.g. --loss.lambda 0")
    cmd.add_argument('--config', help="flat JSON config file")
    cmd.add_argument('--corpus', required=True,
                     help="corpus file, one sentence per line")
    cmd.add_argument('--sts', help="STS file used for periodic and final "
                                   "evaluation")
    cmd.add_argument('--resume', action='store_true',
                     help="continue from the checkpoint at checkpoint_path")

    cmd = commands.add_parser(
        'eval', allow_abbrev=False,
        help="score a checkpoint on an STS file")
    cmd.add_argument('--checkpoint', required=True, help="checkpoint path")
    cmd.add_argument('--sts', required=True, help="STS file")
    cmd.add_argument('--dataset', help="dataset name (default: file name)")
    cmd.add_argument('--probe-rates', type=comma_list(float),
                     help="also report the dropout sensitivity drift at "
                          "these comma-separated rates")
    cmd.add_argument('--probe-seed', type=seed_value, default=0,
                     help="seed of the probe masks (default: 0)")

    cmd = commands.add_parser(
        'gradcheck', allow_abbrev=False,
        help="compare analytic gradients against finite differences")
    cmd.add_argument('--trials', type=positive_int, default=3,
                     help="random instances per check (default: 3)")
    cmd.add_argument('--seed', type=seed_value, default=0,
                     help="seed of the random instances (default: 0)")

    cmd = commands.add_parser(
        'ablate', allow_abbrev=False,
        help="train one model per (r_high, variant, seed) cell")
    cmd.add_argument('--config', help="flat JSON config file")
    cmd.add_argument('--corpus', required=True,
                     help="corpus file, one sentence per line")
    cmd.add_argument('--sts', required=True, help="STS file")
    cmd.add_argument('--rates', type=comma_list(float), default=DEFAULT_RATES,
                     help="comma-separated r_high values (default: %s)"
                          % DEFAULT_RATES)
    cmd.add_argument('--variants', type=comma_list(str),
                     default=DEFAULT_VARIANTS,
                     help="comma-separated loss variants (default: %s)"
                          % DEFAULT_VARIANTS)
    cmd.add_argument('--seeds', type=comma_list(seed_value),
                     default=DEFAULT_SEEDS,
                     help="comma-separated seeds (default: %s)" % DEFAULT_SEEDS)
    cmd.add_argument('--workers', type=positive_int,
                     help="parallel cells (default: ESCL_ABLATION_WORKERS)")
    cmd.add_argument('--out', default='ablation',
                     help="report prefix; writes <out>.json and <out>.txt "
                          "(default: ablation)")
    return parser


def _makedirs(path):
    try:
        if not os.path.isdir(path):
            os.makedirs(path)
    except (IOError, OSError) as e:
        raise DataError("Cannot create directory %s: %s" % (path, e))


def emit(record):
    sys.stdout.write(json.dumps(record, sort_keys=True) + '\n')
    sys.stdout.flush()


def banner(command, config, seed):
    logger.info("escl-lab %(version)s %(command)s, seed %(seed)s, config "
                "%(config)s", {'version': __version__, 'command': command,
                               'seed': seed,
                               'config': json.dumps(config, sort_keys=True)})
    emit({'event': 'config', 'command': command, 'seed': seed,
          'config': config})


def cmd_gen_data(args, settings):
    params = {'seed': args.seed, 'n_train': args.n_train,
              'n_pairs': args.n_pairs, 'vocab_size': args.vocab_size}
    banner('gen-data', params, args.seed)
    corpus_path = os.path.join(args.out_dir, CORPUS_FILE)
    sts_path = os.path.join(args.out_dir, STS_FILE)
    if not args.force:
        for path in (corpus_path, sts_path):
            if os.path.exists(path):
                raise UsageError("%s exists; use --force to overwrite it"
                                 % path)
    data = generate_synthetic_corpus(args.seed, args.n_train, args.n_pairs,
                                     args.vocab_size)
    _makedirs(args.out_dir)
    write_lines(corpus_path, data.corpus_lines())
    write_lines(sts_path, data.sts_rows())
    for path in (corpus_path, sts_path):
        write_provenance(path, dict(params, command='gen-data'))
    emit({'event': 'result', 'command': 'gen-data', 'corpus': corpus_path,
          'sts': sts_path, 'n_train': len(data.corpus),
          'n_pairs': len(data.pairs)})
    return EXIT_OK


def _train_config(settings):
    config = TrainConfig.from_settings(settings)
    if not config.trace_path and config.checkpoint_path:
        config = config.replace(
            trace_path='%s.trace.jsonl' % config.checkpoint_path)
    return config


def cmd_train(args, settings):
    config = _train_config(settings)
    banner('train', config.to_dict(), config.seed)
    storage = CheckpointStorage.from_settings(settings)
    with storage:
        resume_from = None
        vocab = None
        if args.resume:
            resume_from = storage.retrieve_checkpoint(config.checkpoint_path)
            if resume_from is None:
                raise DataError("No checkpoint to resume from at %s"
                                % config.checkpoint_path)
            vocab = resume_from.get_vocabulary()
        vocab, corpus, report = load_corpus(args.corpus, vocab)
        pairs = load_sts(args.sts, vocab) if args.sts else None
        dataset = os.path.basename(args.sts) if args.sts else None
        checkpoint, trace = train(config, corpus, vocab, eval_pairs=pairs,
                                  storage=storage, resume_from=resume_from,
                                  dataset=dataset)
    for path in (config.checkpoint_path, config.trace_path):
        if path:
            write_resolved_config(settings, path,
                                  extra={'trace_path': config.trace_path})
    result = {'event': 'result', 'command': 'train', 'seed': config.seed,
              'step': checkpoint.step, 'checkpoint': config.checkpoint_path,
              'trace': config.trace_path, 'corpus': report.as_dict()}
    if trace.records:
        result['loss'] = trace.records[-1].breakdown.as_dict()
    if pairs:
        result['rho'] = evaluate_sts(checkpoint.params, pairs, dataset).rho
    logger.info("Finished training at step %(step)d (rho %(rho)s)",
                {'step': checkpoint.step, 'rho': result.get('rho')})
    emit(result)
    return EXIT_OK


def cmd_eval(args, settings):
    dataset = args.dataset or os.path.basename(args.sts)
    banner('eval', {'checkpoint': args.checkpoint, 'sts': args.sts,
                    'dataset': dataset}, args.probe_seed)
    with CheckpointStorage.from_settings(settings) as storage:
        checkpoint = storage.retrieve_checkpoint(args.checkpoint)
    if checkpoint is None:
        raise DataError("No checkpoint at %s" % args.checkpoint)
    pairs = load_sts(args.sts, checkpoint.get_vocabulary())
    result = evaluate_sts(checkpoint.params, pairs, dataset)
    emit(dict(result.as_dict(), event='result', command='eval',
              checkpoint=args.checkpoint, step=checkpoint.step))
    if args.probe_rates:
        sentences = [p.sentence_a for p in pairs]
        probe = sensitivity_probe(checkpoint.params, sentences,
                                  args.probe_rates,
                                  settings.getint('ESCL_PROBE_TRIALS'),
                                  RngStream(args.probe_seed))
        for row in probe:
            emit(dict(row.as_dict(), event='probe', command='eval'))
    return EXIT_OK


def _named_grads(grad_fn, names):
    def loss_fn(p):
        value, grads = grad_fn(*[p[name] for name in names])
        return value, dict(zip(names, grads))
    return loss_fn


def _escl_total(cfg):
    def grad_fn(H, H_pos, H_neg):
        breakdown, grads = escl_loss(BatchViews(H, H_pos, H_neg), cfg)
        return breakdown.total, tuple(grads)
    return grad_fn


def gradient_checks(rng):
    """Yield ``(name, loss_fn, params)`` gradient-check cases drawn from
    ``rng``."""
    gen = rng.generator()
    n, d = 4, 5
    A = gen.normal(size=(d, d))
    A = A + A.T
    yield ('quadratic', lambda x: (0.5 * x @ A @ x, A @ x),
           gen.normal(size=d))

    views = dict(zip(('H', 'H_pos', 'H_neg'), gen.normal(size=(3, n, d))))
    yield ('info_nce',
           _named_grads(functools.partial(info_nce_grad,
                                          tau=GRADCHECK_TEMPERATURE),
                        ('H', 'H_pos')),
           {'H': views['H'], 'H_pos': views['H_pos']})
    yield 'rd_loss', _named_grads(rd_loss_grad, ('H', 'H_pos', 'H_neg')), views
    yield ('cossim_loss', _named_grads(cossim_loss_grad,
                                       ('H', 'H_pos', 'H_neg')), views)
    cfg = LossConfig(temperature=GRADCHECK_TEMPERATURE, lam=0.5, variant='rd')
    yield ('escl_loss', _named_grads(_escl_total(cfg),
                                     ('H', 'H_pos', 'H_neg')), views)

    params = init_params(8, 4, 3, rng.derive(0))
    params = params.replace(projection_bias=0.1 * gen.normal(size=3))
    batch = [tuple(int(t) for t in gen.integers(0, 8, size))
             for size in (2, 3, 4)]
    mask_rng = rng.derive(1)

    def encoder_loss(p):
        current = EncoderParams(**p)
        batch_views, tape = embed_batch_views(current, batch, 0.1, 0.45,
                                              mask_rng, return_tape=True)
        breakdown, grads = escl_loss(batch_views, cfg)
        return breakdown.total, backward_views(current, tape, grads)
    yield 'encoder', encoder_loss, params.as_dict()


def cmd_gradcheck(args, settings):
    banner('gradcheck', {'trials': args.trials, 'eps': GRADCHECK_EPS,
                         'tolerance': GRADCHECK_TOLERANCE}, args.seed)
    worst = 0.0
    failed = []
    for trial in range(args.trials):
        rng = RngStream(args.seed, (trial,))
        for name, loss_fn, params in gradient_checks(rng):
            error = grad_check(loss_fn, params, eps=GRADCHECK_EPS,
                               rng=rng.derive(2))
            passed = error < GRADCHECK_TOLERANCE
            if not passed:
                failed.append('%s (trial %d)' % (name, trial))
            worst = max(worst, error)
            emit({'event': 'check', 'check': name, 'trial': trial,
                  'max_rel_error': error, 'passed': passed})
    emit({'event': 'result', 'command': 'gradcheck', 'max_rel_error': worst,
          'passed': not failed})
    if failed:
        raise NumericError("Gradient check failed for %s (max relative error "
                           "%.3g)" % (', '.join(failed), worst))
    return EXIT_OK


def cmd_ablate(args, settings):
    base = TrainConfig.from_settings(settings)
    workers = args.workers or settings.getint('ESCL_ABLATION_WORKERS')
    grid = {'rates': args.rates, 'variants': args.variants,
            'seeds': args.seeds, 'workers': workers}
    banner('ablate', dict(base.to_dict(), ablation=grid), args.seeds)
    vocab, corpus, _ = load_corpus(args.corpus)
    pairs = load_sts(args.sts, vocab)
    dataset = os.path.basename(args.sts)
    with CheckpointStorage.from_settings(settings) as storage:
        report = run_ablation(base, args.rates, args.variants, args.seeds,
                              corpus, vocab, pairs, storage=storage,
                              workers=workers, dataset=dataset,
                              checkpoint_prefix=args.out)
    json_path = '%s.json' % args.out
    table_path = '%s.txt' % args.out
    _makedirs(os.path.dirname(os.path.abspath(json_path)))
    table = report.to_table()
    write_lines(json_path, [report.to_json()])
    write_lines(table_path, table.splitlines())
    write_resolved_config(settings, json_path, extra={'ablation': grid})
    logger.info("Ablation report:\n%(table)s", {'table': table})
    for row in report.rows:
        emit(dict(row.as_dict(), event='row', command='ablate'))
    emit({'event': 'result', 'command': 'ablate', 'report': json_path,
          'table': table_path, 'runs': len(report.runs)})
    return EXIT_OK


COMMANDS = {
    'gen-data': cmd_gen_data,
    'train': cmd_train,
    'eval': cmd_eval,
    'gradcheck': cmd_gradcheck,
    'ablate': cmd_ablate,
}

ACCEPTS_OVERRIDES = ('train', 'ablate')


def _run(argv):
    parser = build_parser()
    args, extras = parser.parse_known_args(argv)
    if extras and args.command not in ACCEPTS_OVERRIDES:
        raise UsageError("%s: unrecognized arguments: %s"
                         % (args.command, ' '.join(extras)))
    overrides = parse_overrides(extras)
    extra = {'LOG_LEVEL': args.log_level} if args.log_level else None
    settings = get_settings(getattr(args, 'config', None), overrides, extra)
    configure_logging(settings)
    return COMMANDS[args.command](args, settings)


def main(argv=None):
    try:
        return _run(sys.argv[1:] if argv is None else argv)
    except EsclError as e:
        sys.stderr.write('escl-lab: error: %s\n' % e)
        return exit_code_for(e)
