import logging
from dataclasses import dataclass

import numpy as np
from scrapy.utils.misc import load_object

from .. import default_settings
from ..encoder import BatchViews
from ..exceptions import ConfigError
from ..numerics import check_finite, normalize_rows, row_cosine
from .infonce import info_nce_grad


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LossConfig:
    """Temperature, trade-off weight and equivariant variant of the
    combined objective."""

    temperature: float = default_settings.ESCL_LOSS_TEMPERATURE
    lam: float = default_settings.ESCL_LOSS_LAMBDA
    variant: str = default_settings.ESCL_LOSS_VARIANT
    variants: tuple = tuple(sorted(
        default_settings.ESCL_EQUIVARIANT_LOSSES.items()))

    def __post_init__(self):
        temperature = float(self.temperature)
        lam = float(self.lam)
        variant = str(self.variant).lower()
        if not (np.isfinite(temperature) and temperature > 0):
            raise ConfigError("loss.temperature must be positive, got %r"
                              % (self.temperature,))
        if not (np.isfinite(lam) and lam >= 0):
            raise ConfigError("loss.lambda must be non-negative, got %r"
                              % (self.lam,))
        variants = tuple(sorted(dict(self.variants).items()))
        if variant not in dict(variants):
            raise ConfigError("Unknown loss.variant %r (expected one of %s)"
                              % (self.variant,
                                 ', '.join(k for k, _ in variants)))
        object.__setattr__(self, 'temperature', temperature)
        object.__setattr__(self, 'lam', lam)
        object.__setattr__(self, 'variant', variant)
        object.__setattr__(self, 'variants', variants)

    @classmethod
    def from_settings(cls, settings):
        return cls(
            temperature=settings.getfloat('ESCL_LOSS_TEMPERATURE'),
            lam=settings.getfloat('ESCL_LOSS_LAMBDA'),
            variant=settings.get('ESCL_LOSS_VARIANT'),
            variants=tuple(settings.getdict('ESCL_EQUIVARIANT_LOSSES').items()),
        )

    def build_variant(self):
        return load_object(dict(self.variants)[self.variant])()


@dataclass(frozen=True)
class LossBreakdown:
    info_nce: float
    equivariant: float
    lam: float
    total: float
    dist_pos: float
    dist_neg: float

    @property
    def gap(self):
        """Dist_neg - Dist_pos."""
        return self.dist_neg - self.dist_pos

    def as_dict(self):
        return {
            'info_nce': self.info_nce,
            'equivariant': self.equivariant,
            'total': self.total,
            'dist_pos': self.dist_pos,
            'dist_neg': self.dist_neg,
        }


class EquivariantLoss(object):
    """ Abstract equivariant-task loss.
    """

    name = None

    def value_and_grad(self, views):
        """Return ``(value, (dH, dH_pos, dH_neg))``."""
        raise NotImplementedError


def view_distances(views):
    """Mean cosine distances within positive pairs and to the negative
    view (averaged over both low-dropout views)."""
    U, _ = normalize_rows(views.H, 'H')
    P, _ = normalize_rows(views.H_pos, 'H_pos')
    Q, _ = normalize_rows(views.H_neg, 'H_neg')
    dist_pos = float(np.mean(1.0 - row_cosine(U, P)))
    dist_neg = float(np.mean(1.0 - 0.5 * (row_cosine(U, Q)
                                          + row_cosine(P, Q))))
    return dist_pos, dist_neg


def escl_loss(views, cfg):
    """InfoNCE plus ``lambda`` times the configured equivariant loss.

    Returns ``(LossBreakdown, grads)`` where ``grads`` is a BatchViews of
    row gradients of the total.
    """
    nce, (dH, dH_pos) = info_nce_grad(views.H, views.H_pos, cfg.temperature)
    check_finite('info_nce term', nce)
    variant = cfg.build_variant()
    equivariant, (eH, eH_pos, eH_neg) = variant.value_and_grad(views)
    check_finite('%s term' % variant.name, equivariant)
    for name, grad in (('H', dH), ('H_pos', dH_pos)):
        check_finite('info_nce gradient w.r.t. %s' % name, grad)
    for name, grad in (('H', eH), ('H_pos', eH_pos), ('H_neg', eH_neg)):
        check_finite('%s gradient w.r.t. %s' % (variant.name, name), grad)

    lam = cfg.lam
    total = nce + lam * equivariant
    dist_pos, dist_neg = view_distances(views)
    breakdown = LossBreakdown(info_nce=nce, equivariant=equivariant, lam=lam,
                              total=total, dist_pos=dist_pos,
                              dist_neg=dist_neg)
    grads = BatchViews(dH + lam * eH, dH_pos + lam * eH_pos, lam * eH_neg)
    return breakdown, grads
