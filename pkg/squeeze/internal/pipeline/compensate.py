from typing import Callable, Tuple

import numpy as np
from scipy import linalg

from squeeze.utils.errors import ZeroPivot, DimensionMismatch


def gptq_compensate(w: np.ndarray,
                    quantize_column: Callable[[int, np.ndarray], np.ndarray],
                    hinv: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    r"""
    Quantize ``w`` one input column at a time, in ascending order, and push each
    column's error onto the columns not yet quantized.

    After column ``q`` is quantized to ``w_hat_q`` the remaining columns get
    ``w_j -= (w_q - w_hat_q) * U[q, j] / U[q, q]`` with ``U`` the upper Cholesky
    factor of ``hinv``. For the first column this is ``hinv[q, j] / hinv[q, q]``;
    later columns use ``hinv`` conditioned on the columns already fixed.

    Arguments:
        w: ``d_out × d_in`` weights, or a single row
        quantize_column: maps ``(q, current column q)`` to its quantized values
        hinv: full ``d_in × d_in`` inverse Hessian

    Returns:
        the quantized weights and the adjusted weights each column was quantized from
    """
    w = np.array(w, dtype=np.float64)
    is_row = w.ndim == 1
    if is_row:
        w = w[None, :]
    hinv = np.asarray(hinv, dtype=np.float64)
    d_in = w.shape[1]
    if hinv.shape != (d_in, d_in):
        raise DimensionMismatch(f"Inverse Hessian of shape {list(hinv.shape)} for {d_in} input columns")

    diag = np.diag(hinv)
    if np.any(diag <= 0):
        q = int(np.argmax(diag <= 0))
        raise ZeroPivot(f"Inverse Hessian pivot {q} is {diag[q]}")
    try:
        u = linalg.cholesky(hinv, lower=False)
    except linalg.LinAlgError as e:
        raise ZeroPivot(f"Inverse Hessian has no Cholesky factor: {e}") from e

    w_hat = np.empty_like(w)
    for q in range(d_in):
        column = w[:, q].copy()
        quantized = np.asarray(quantize_column(q, column), dtype=np.float64)
        w_hat[:, q] = quantized
        err = (column - quantized) / u[q, q]
        w[:, q + 1:] -= err[:, None] * u[q, q + 1:][None, :]

    if is_row:
        return w_hat[0], w[0]
    return w_hat, w


def output_error(w: np.ndarray, w_hat: np.ndarray, x: np.ndarray) -> np.ndarray:
    r"""
    Per-row ``||(w - w_hat) X^T||_2``
    """
    diff = np.asarray(w, dtype=np.float64) - np.asarray(w_hat, dtype=np.float64)
    return np.linalg.norm(diff @ np.asarray(x, dtype=np.float64).T, axis=1)
