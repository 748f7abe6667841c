"""
Equivariant-task losses on the negative (high-dropout) view.
"""
import numpy as np

from ..exceptions import DimensionError
from ..numerics import normalize_rows, normalize_rows_backward, row_cosine
from .base import EquivariantLoss


def _unit_views(H, H_pos, H_neg):
    U, u_norms = normalize_rows(H, 'H')
    P, p_norms = normalize_rows(H_pos, 'H_pos')
    Q, q_norms = normalize_rows(H_neg, 'H_neg')
    if not U.shape == P.shape == Q.shape:
        raise DimensionError("Views differ in shape: %s %s %s"
                             % (U.shape, P.shape, Q.shape))
    return (U, u_norms), (P, p_norms), (Q, q_norms)


def rd_loss(H, H_pos, H_neg):
    return rd_loss_grad(H, H_pos, H_neg)[0]


def rd_loss_grad(H, H_pos, H_neg):
    """Relative Difference loss and its row gradients.

    Per sentence ``sum over h' in {h, h+} of exp(sim(h', h-) - sim(h, h+))``,
    averaged over the batch. No temperature.
    """
    (U, u_norms), (P, p_norms), (Q, q_norms) = _unit_views(H, H_pos, H_neg)
    n = U.shape[0]
    s_anchor = row_cosine(U, Q)
    s_pos = row_cosine(P, Q)
    s_pair = row_cosine(U, P)
    e_anchor = np.exp(s_anchor - s_pair)
    e_pos = np.exp(s_pos - s_pair)
    value = float(np.mean(e_anchor + e_pos))

    g_anchor = (e_anchor / n)[:, None]
    g_pos = (e_pos / n)[:, None]
    g_pair = -g_anchor - g_pos
    dU = g_anchor * Q + g_pair * P
    dP = g_pos * Q + g_pair * U
    dQ = g_anchor * U + g_pos * P
    return value, (normalize_rows_backward(dU, U, u_norms),
                   normalize_rows_backward(dP, P, p_norms),
                   normalize_rows_backward(dQ, Q, q_norms))


def cossim_loss(H, H_pos, H_neg):
    return cossim_loss_grad(H, H_pos, H_neg)[0]


def cossim_loss_grad(H, H_pos, H_neg):
    """CosSim loss: ``sum over h' in {h, h+} of exp(sim(h', h-))``, averaged
    over the batch. It ignores the positive pair."""
    (U, u_norms), (P, p_norms), (Q, q_norms) = _unit_views(H, H_pos, H_neg)
    n = U.shape[0]
    e_anchor = np.exp(row_cosine(U, Q))
    e_pos = np.exp(row_cosine(P, Q))
    value = float(np.mean(e_anchor + e_pos))

    g_anchor = (e_anchor / n)[:, None]
    g_pos = (e_pos / n)[:, None]
    return value, (normalize_rows_backward(g_anchor * Q, U, u_norms),
                   normalize_rows_backward(g_pos * Q, P, p_norms),
                   normalize_rows_backward(g_anchor * U + g_pos * P, Q,
                                           q_norms))


class RDLoss(EquivariantLoss):

    name = 'rd'

    def value_and_grad(self, views):
        return rd_loss_grad(*views)


class CosSimLoss(EquivariantLoss):

    name = 'cossim'

    def value_and_grad(self, views):
        return cossim_loss_grad(*views)


class NoEquivariantLoss(EquivariantLoss):
    """InfoNCE only; the negative view is ignored."""

    name = 'none'

    def value_and_grad(self, views):
        zeros = np.zeros(views.shape)
        return 0.0, (zeros, zeros.copy(), zeros.copy())
