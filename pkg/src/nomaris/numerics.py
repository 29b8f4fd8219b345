"""Dense complex linear-algebra helpers.

Matrices are plain 2-D numpy arrays. ``vec`` stacks columns (column-major),
which is the convention every Kronecker identity in this package relies on.
"""

import numpy as np


def herm(a):
    """Conjugate transpose."""
    return np.conj(np.asarray(a)).T


def kron(a, b):
    """Kronecker product ``a (x) b`` of two (possibly 1x1) matrices."""
    return np.kron(np.atleast_2d(a), np.atleast_2d(b))


def vec(a):
    """Stack the columns of ``a`` into a column vector (shape ``(rows*cols, 1)``)."""
    a = np.atleast_2d(a)
    return a.reshape(-1, 1, order="F")


def unvec(x, rows, cols):
    return np.asarray(x).reshape(rows, cols, order="F")


def max_eig_hermitian(a, return_vector=False):
    """Largest eigenvalue of a (nearly) Hermitian matrix.

    The input is symmetrized as ``(A + A^H) / 2`` before the decomposition so
    round-off asymmetry does not leak into the result.

    Parameters
    ----------
    a : array_like, shape (n, n)
    return_vector : bool
        Also return a unit-norm eigenvector for the returned eigenvalue.

    Raises
    ------
    ValueError
        If ``a`` is not square.
    """
    a = np.atleast_2d(np.asarray(a))
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"max_eig_hermitian needs a square matrix, got shape {a.shape}")
    sym = 0.5 * (a + herm(a))
    vals, vecs = np.linalg.eigh(sym)
    lam = float(vals[-1])
    if return_vector:
        return lam, vecs[:, -1]
    return lam


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)
