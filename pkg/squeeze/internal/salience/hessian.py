import numpy as np
from scipy import linalg

from squeeze.utils.errors import DimensionMismatch, NotPositiveDefinite, ZeroSamples

DEFAULT_DAMPING = 0.01


class HessianState:
    r"""
    Running ``H = 2 X^T X`` over calibration tokens, ``d_in × d_in`` in float64.

    Accumulation is exclusive to one owner; shards can be accumulated
    separately and combined with :meth:`merge`.
    """
    h: np.ndarray
    n_samples: int
    damping_applied: float

    def __init__(self, *, h: np.ndarray, n_samples: int = 0, damping_applied: float = 0.):
        self.h = np.asarray(h, dtype=np.float64)
        if self.h.ndim != 2 or self.h.shape[0] != self.h.shape[1]:
            raise DimensionMismatch(f"Hessian must be square, got shape {list(self.h.shape)}")
        self.n_samples = int(n_samples)
        self.damping_applied = float(damping_applied)

    @classmethod
    def zeros(cls, d_in: int):
        return cls(h=np.zeros((d_in, d_in), dtype=np.float64))

    @property
    def d_in(self) -> int:
        return self.h.shape[0]

    def merge(self, other: 'HessianState') -> 'HessianState':
        if other.d_in != self.d_in:
            raise DimensionMismatch(f"Cannot merge Hessians of size {self.d_in} and {other.d_in}")
        return HessianState(h=self.h + other.h, n_samples=self.n_samples + other.n_samples)

    def __repr__(self):
        return f"<HessianState d_in={self.d_in} n_samples={self.n_samples}>"


def accumulate_hessian(state: HessianState, x_batch: np.ndarray) -> HessianState:
    r"""
    Returns a new state with ``h + 2 X^T X`` and ``n_samples + N``
    """
    x = np.asarray(x_batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != state.d_in:
        raise DimensionMismatch(f"Calibration batch of shape {list(x.shape)} does not match "
                                f"d_in={state.d_in}")
    return HessianState(h=state.h + 2. * (x.T @ x),
                        n_samples=state.n_samples + x.shape[0],
                        damping_applied=state.damping_applied)


class HessianInverse:
    r"""
    ``(H + δI)^{-1}`` with its diagonal and the damping ``δ`` used
    """

    def __init__(self, *, inverse: np.ndarray, damping: float):
        self.inverse = inverse
        self.damping = damping

    @property
    def diag(self) -> np.ndarray:
        return np.diag(self.inverse).copy()


def invert_hessian(state: HessianState, damping_fraction: float = DEFAULT_DAMPING) -> HessianInverse:
    r"""
    Invert the damped Hessian through a Cholesky factorization, with
    ``δ = damping_fraction * mean(diag(H))``.

    Raises:
        ZeroSamples: nothing was accumulated
        NotPositiveDefinite: ``H + δI`` has no Cholesky factor
    """
    if state.n_samples <= 0:
        raise ZeroSamples('Hessian has no accumulated samples')
    if damping_fraction < 0:
        raise ValueError(f"Damping fraction must be non-negative, got {damping_fraction}")

    damping = float(damping_fraction * np.mean(np.diag(state.h)))
    h = state.h + damping * np.eye(state.d_in)
    try:
        factor = linalg.cho_factor(h, lower=True, check_finite=True)
    except linalg.LinAlgError as e:
        raise NotPositiveDefinite(f"Hessian (d_in={state.d_in}, damping={damping:g}) is not "
                                  f"positive definite: {e}") from e

    inverse = linalg.cho_solve(factor, np.eye(state.d_in))
    inverse = (inverse + inverse.T) / 2.
    state.damping_applied = damping
    return HessianInverse(inverse=inverse, damping=damping)
