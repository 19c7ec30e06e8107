"""Causal ARMA field synthesis driven by seeded Gaussian white noise."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from armafield.core import ArmaParams, ModelOrder
from armafield.errors import UnstableParametersError

RNG_ALGORITHM = "numpy.PCG64"
OVERFLOW_GUARD = 1e12


@dataclass(frozen=True)
class SynthesisConfig:
    order: ModelOrder
    params: ArmaParams
    N1: int
    N2: int
    burn_in: int = 64
    seed: int = 0

    def __post_init__(self):
        self.params.check_order(self.order)
        if self.N1 < 1 or self.N2 < 1:
            raise ValueError(f"output size must be positive, got {self.N1}x{self.N2}")
        if self.burn_in < max(self.order.arma):
            raise ValueError(f"burn_in={self.burn_in} is shorter than the model memory {max(self.order.arma)}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def grid_shape(self):
        return (self.N1 + self.burn_in, self.N2 + self.burn_in)


def _lag_arrays(coeffs, lags):
    ii = np.array([i for i, _ in lags], dtype=np.int64)
    jj = np.array([j for _, j in lags], dtype=np.int64)
    cc = np.array([coeffs.get(lag, 0.0) for lag in lags], dtype=np.float64)
    return ii, jj, cc


@numba.njit(cache=True)
def _arma_recursion(w, ai, aj, ac, bi, bj, bc):
    # x[n,m] = w[n,m] + sum b w[n-i,m-j] - sum a x[n-i,m-j], zero outside the grid;
    # accumulation follows lag_order for reproducible rounding
    n1, n2 = w.shape
    x = np.zeros((n1, n2))
    for n in range(n1):
        for m in range(n2):
            acc = w[n, m]
            for t in range(bc.shape[0]):
                i = n - bi[t]
                j = m - bj[t]
                if i >= 0 and j >= 0:
                    acc += bc[t] * w[i, j]
            for t in range(ac.shape[0]):
                i = n - ai[t]
                j = m - aj[t]
                if i >= 0 and j >= 0:
                    acc -= ac[t] * x[i, j]
            x[n, m] = acc
    return x


def arma_filter(w, order: ModelOrder, params: ArmaParams) -> np.ndarray:
    """Run the causal recursion ``A x = B w`` over ``w`` with zero initial conditions."""
    w = np.ascontiguousarray(w, dtype=np.float64)
    ai, aj, ac = _lag_arrays(params.a, order.ar_lags)
    bi, bj, bc = _lag_arrays(params.b, order.ma_lags)
    return _arma_recursion(w, ai, aj, ac, bi, bj, bc)


def draw_innovations(config: SynthesisConfig) -> np.ndarray:
    """The full ``(N1 + burn_in, N2 + burn_in)`` noise grid used by :func:`synthesize`."""
    rng = np.random.Generator(np.random.PCG64(config.seed))
    return rng.standard_normal(config.grid_shape) * np.sqrt(config.params.sigma2)


def synthesize(config: SynthesisConfig) -> np.ndarray:
    """Generate an ``N1 x N2`` ARMA field.

    The recursion runs on a grid padded by ``burn_in`` rows and columns, then
    the padding (first rows/columns) is dropped.

    Raises
    ------
    UnstableParametersError
        If the recursion exceeds the overflow guard.
    """
    w = draw_innovations(config)
    x = arma_filter(w, config.order, config.params)
    peak = np.max(np.abs(x))
    if not np.isfinite(peak) or peak > OVERFLOW_GUARD:
        raise UnstableParametersError(
            f"unstable parameters: field magnitude reached {peak:.3g} (guard {OVERFLOW_GUARD:g})"
        )
    b = config.burn_in
    return np.ascontiguousarray(x[b:, b:])


def stability_check(order: ModelOrder, params: ArmaParams, size: int = 64, tol: float = 1e-6) -> bool:
    """Decide stability of ``1/A`` from the decay of its impulse response.

    The response is computed on a ``size x size`` grid; the parameters count as
    stable when the energy outside the leading ``size/2`` quadrant is below
    ``tol`` of the total.
    """
    impulse = np.zeros((size, size))
    impulse[0, 0] = 1.0
    ar_only = ModelOrder(order.p1, order.p2, 0, 0, order.K1, order.K2)
    with np.errstate(over="ignore", invalid="ignore"):
        h = arma_filter(impulse, ar_only, ArmaParams(a=params.a, sigma2=params.sigma2))
        energy = h * h
        total = energy.sum()
        half = size // 2
        tail = energy[half:, :].sum() + energy[:half, half:].sum()
    if not np.isfinite(total) or not np.isfinite(tail):
        return False
    return bool(tail < tol * total)
