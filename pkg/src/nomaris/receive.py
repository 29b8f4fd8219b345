"""Radar receive-filter update."""

import numpy as np

from .metrics import composite_target_matrix


class DegenerateTarget(ValueError):
    """The transmit design puts no energy on the target's echo path."""


def optimal_filter(G_l, W):
    """Unit-norm maximizer of ``|u^H (I kron G_l) vec(W)|^2 / u^H u``.

    The SNR is invariant to the scale and phase of ``u``; the returned filter is
    the echo direction itself, so ``u^H (I kron G_l) vec(W)`` is real and positive.
    """
    a = (np.asarray(G_l) @ np.asarray(W)).reshape(-1, order="F")
    nrm = np.linalg.norm(a)
    if not nrm > 0:
        raise DegenerateTarget("echo direction is zero; target is not illuminated")
    return a / nrm


def update_filters(ch, W, v):
    M, K1 = W.shape
    if ch.L == 0:
        return np.zeros((0, M * K1), dtype=complex)
    return np.stack([optimal_filter(composite_target_matrix(ch, v, l), W) for l in range(ch.L)])
