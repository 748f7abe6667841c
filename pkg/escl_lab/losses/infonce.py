"""
InfoNCE over in-batch negatives, in its softmax form and in its
``log(1 + sum of ratios)`` form.
"""
import numpy as np
from scipy.special import logsumexp

from ..exceptions import ConfigError, DimensionError
from ..numerics import normalize_rows, normalize_rows_backward, pairwise_cosine


def check_temperature(tau):
    if not (np.isfinite(tau) and tau > 0):
        raise ConfigError("Temperature must be positive, got %r" % (tau,))
    return float(tau)


def _logits(H, H_pos, tau):
    tau = check_temperature(tau)
    U, u_norms = normalize_rows(H, 'H')
    P, p_norms = normalize_rows(H_pos, 'H_pos')
    if U.shape != P.shape:
        raise DimensionError("H and H_pos differ in shape: %s vs %s"
                             % (U.shape, P.shape))
    return pairwise_cosine(U, P) / tau, (U, u_norms, P, p_norms, tau)


def info_nce(H, H_pos, tau):
    """Mean over sentences of ``-log softmax_i(sim(h_i, h_j+) / tau)``."""
    logits, _ = _logits(H, H_pos, tau)
    lse = logsumexp(logits, axis=1)
    return float(np.mean(lse - np.diag(logits)))


def info_nce_alt(H, H_pos, tau):
    """InfoNCE as ``log(1 + sum_{j != i} exp((s_ij - s_ii) / tau))``."""
    logits, _ = _logits(H, H_pos, tau)
    ratios = np.exp(logits - np.diag(logits)[:, None])
    np.fill_diagonal(ratios, 0.0)
    return float(np.mean(np.log1p(ratios.sum(axis=1))))


def info_nce_grad(H, H_pos, tau):
    """Return ``(value, (dH, dH_pos))``."""
    logits, (U, u_norms, P, p_norms, tau) = _logits(H, H_pos, tau)
    n = logits.shape[0]
    lse = logsumexp(logits, axis=1)
    value = float(np.mean(lse - np.diag(logits)))
    d_cos = (np.exp(logits - lse[:, None]) - np.eye(n)) / (n * tau)
    dH = normalize_rows_backward(d_cos @ P, U, u_norms)
    dH_pos = normalize_rows_backward(d_cos.T @ U, P, p_norms)
    return value, (dH, dH_pos)
