"""Matrix exponential and the Van Loan gramian."""
import logging

import numpy as np
from scipy.linalg import expm

logger = logging.getLogger(__name__)


class NonFiniteMatrixError(ValueError):
    pass


def matrix_exp(M) -> np.ndarray:
    """exp(M) by scaling and squaring with a degree 13 Pade approximant."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"matrix_exp needs a square matrix, got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NonFiniteMatrixError("matrix has non-finite entries")
    out = expm(M)
    if not np.all(np.isfinite(out)):
        raise NonFiniteMatrixError("matrix exponential overflowed")
    return out


def gramian(B, Q, t: float) -> np.ndarray:
    """int_0^t exp(sB) Q exp(sB^T) ds via exp of [[-B, Q], [0, B^T]] t."""
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    p = B.shape[0]
    if t == 0:
        return np.zeros((p, p))
    block = np.zeros((2 * p, 2 * p))
    block[:p, :p] = -B
    block[:p, p:] = Q
    block[p:, p:] = B.T
    E = matrix_exp(block * t)
    G = E[p:, p:].T @ E[:p, p:]
    return 0.5 * (G + G.T)
