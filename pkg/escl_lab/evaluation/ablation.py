"""
The ablation sweep: one training run per (r_high, variant, seed) cell, all
on the same corpus and scored on the same evaluation pairs.
"""
import dataclasses
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..exceptions import ConfigError
from ..numerics import DropoutSpec
from .sts import EvalResult, evaluate_sts


logger = logging.getLogger(__name__)


TABLE_COLUMNS = ('r_high', 'variant', 'seed_count', 'mean_rho', 'std_rho')


@dataclass(frozen=True)
class AblationRun:
    r_high: float
    variant: str
    seed: int
    rho: float
    step: int

    def as_dict(self):
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class AblationRow:
    r_high: float
    variant: str
    seed_count: int
    mean_rho: float
    std_rho: float
    median_rho: float
    per_seed_rho: tuple

    def as_dict(self):
        data = dataclasses.asdict(self)
        data['per_seed_rho'] = list(self.per_seed_rho)
        return data


class AblationReport(object):

    def __init__(self, runs, rows, dataset='dev'):
        self.runs = list(runs)
        self.rows = list(rows)
        self.dataset = dataset

    def row(self, r_high, variant):
        for row in self.rows:
            if row.r_high == r_high and row.variant == variant:
                return row
        raise KeyError((r_high, variant))

    def as_dict(self):
        return {
            'dataset': self.dataset,
            'columns': list(TABLE_COLUMNS),
            'rows': [row.as_dict() for row in self.rows],
            'runs': [run.as_dict() for run in self.runs],
        }

    def to_json(self):
        return json.dumps(self.as_dict(), sort_keys=True)

    def to_table(self):
        """Aligned plain-text table, one line per (r_high, variant) cell."""
        lines = [list(TABLE_COLUMNS)]
        for row in self.rows:
            lines.append(['%.2f' % row.r_high, row.variant,
                          '%d' % row.seed_count, '%.4f' % row.mean_rho,
                          '%.4f' % row.std_rho])
        widths = [max(len(line[i]) for line in lines)
                  for i in range(len(TABLE_COLUMNS))]
        out = []
        for line in lines:
            cells = []
            for i, cell in enumerate(line):
                # text columns left-aligned, numbers right-aligned
                if i == 1:
                    cells.append(cell.ljust(widths[i]))
                else:
                    cells.append(cell.rjust(widths[i]))
            out.append('  '.join(cells).rstrip())
        return '\n'.join(out) + '\n'


def checkpoint_name(prefix, r_high, variant, seed):
    return '%s-r%.2f-%s-s%d.npz' % (prefix, r_high, variant, seed)


def cell_config(base_config, r_high, variant, seed):
    """The training config of one grid cell."""
    loss = dataclasses.replace(base_config.loss, variant=variant)
    return base_config.replace(r_high=DropoutSpec.coerce(r_high), loss=loss,
                               seed=int(seed), checkpoint_path='',
                               trace_path='')


def _run_cell(job):
    from .. import training
    config, corpus, vocab, pairs, dataset = job
    eval_pairs = pairs if config.select_best else None
    checkpoint, _ = training.train(config, corpus, vocab,
                                   eval_pairs=eval_pairs, dataset=dataset)
    result = evaluate_sts(checkpoint.params, pairs, dataset)
    return checkpoint, result


def run_ablation(base_config, r_high_values, variants, seeds, corpus, vocab,
                 pairs, storage=None, workers=1, dataset='dev',
                 checkpoint_prefix='ablation'):
    """Train and score every (r_high, variant, seed) cell.

    With ``workers > 1`` cells run in a process pool; results are joined in
    grid order either way. Returns an AblationReport.
    """
    r_high_values = [DropoutSpec.coerce(r).rate for r in r_high_values]
    variants = [str(v).lower() for v in variants]
    seeds = [int(s) for s in seeds]
    if not r_high_values or not variants:
        raise ConfigError("The ablation grid needs at least one rate and "
                          "one variant")
    if not seeds:
        raise ConfigError("The ablation needs at least one seed")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("Ablation seeds must be distinct, got %s" % seeds)
    known = dict(base_config.loss.variants)
    for variant in variants:
        if variant not in known:
            raise ConfigError("Unknown loss.variant %r (expected one of %s)"
                              % (variant, ', '.join(sorted(known))))

    grid = [(r, v, s) for r in r_high_values for v in variants for s in seeds]
    # validates every cell before any training starts
    configs = [cell_config(base_config, r, v, s) for r, v, s in grid]
    corpus = list(corpus)
    pairs = list(pairs)
    jobs = [(config, corpus, vocab, pairs, dataset) for config in configs]
    logger.info("Running %(n)d ablation cells (%(rates)d rates x "
                "%(variants)d variants x %(seeds)d seeds) on %(workers)d "
                "worker(s)",
                {'n': len(jobs), 'rates': len(r_high_values),
                 'variants': len(variants), 'seeds': len(seeds),
                 'workers': workers})

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            outcomes = list(executor.map(_run_cell, jobs))
    else:
        outcomes = [_run_cell(job) for job in jobs]

    runs = []
    for (r_high, variant, seed), (checkpoint, result) in zip(grid, outcomes):
        runs.append(AblationRun(r_high=r_high, variant=variant, seed=seed,
                                rho=result.rho, step=checkpoint.step))
        logger.info("Cell r_high=%(r_high).2f variant=%(variant)s "
                    "seed=%(seed)d: rho %(rho).4f",
                    {'r_high': r_high, 'variant': variant, 'seed': seed,
                     'rho': result.rho})
        if storage is not None:
            storage.store_checkpoint(
                checkpoint_name(checkpoint_prefix, r_high, variant, seed),
                checkpoint)

    rows = []
    for r_high in r_high_values:
        for variant in variants:
            cell = [run for run in runs
                    if run.r_high == r_high and run.variant == variant]
            summary = EvalResult.aggregate(
                [EvalResult(dataset, run.rho, len(pairs)) for run in cell],
                seeds)
            rows.append(AblationRow(
                r_high=r_high, variant=variant, seed_count=len(cell),
                mean_rho=summary.rho, std_rho=summary.std,
                median_rho=float(np.median(summary.per_seed_rho)),
                per_seed_rho=summary.per_seed_rho))
    return AblationReport(runs, rows, dataset)
