"""Long-AR approximation by the 2D Yule-Walker equations (stage one).

The inverse filter ``A/B`` is truncated to a quarter-plane AR(K1, K2) model
whose coefficients solve, for every ``(k, l)`` in the ``[0..K1] x [0..K2]`` box
except the origin::

    sum_{(i,j)} alpha[i,j] r[k-i, l-j] = -r[k, l]

Filtering the field with the fitted model yields the innovation estimate used
as the noise proxy in stage two.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from armafield.autocorr import LagGrid, estimate_lags
from armafield.core import Lag, as_field, lag_order
from armafield.errors import DegenerateFieldError, EstimationError

COND_LIMIT = 1e10
RIDGE_SCALE = 1e-8


@dataclass(frozen=True)
class ArFit:
    """Stage-one result.

    ``residual`` covers ``[K1..N1-1] x [K2..N2-1]`` of the input field.
    """

    alpha: Dict[Lag, float]
    sigma2_hat: float
    residual: np.ndarray
    K1: int
    K2: int
    regularized: bool = False


def build_yw_system(lags: LagGrid, K1: int, K2: int) -> Tuple[np.ndarray, np.ndarray, List[Lag]]:
    """Coefficient matrix ``R``, right-hand side ``r0`` and the unknown layout.

    Row and column order both follow ``lag_order(K1, K2)``;
    ``R[row(k,l), col(i,j)] = r[k-i, l-j]`` and ``r0[row(k,l)] = r[k, l]``.
    """
    if lags.kmax < K1 or lags.lmax < K2:
        raise ValueError(
            f"lag window ±({lags.kmax}, {lags.lmax}) does not cover the AR({K1}, {K2}) system"
        )
    layout = lag_order(K1, K2)
    R = np.array([[lags[k - i, l - j] for (i, j) in layout] for (k, l) in layout])
    r0 = np.array([lags[k, l] for (k, l) in layout])
    return R, r0, layout


def _ridge(matrix, dim):
    return RIDGE_SCALE * np.trace(matrix) / dim


def solve_yw(R, r0, return_flag: bool = False):
    """Solve ``R alpha = -r0``.

    When the condition number of ``R`` exceeds ``1e10`` the system is re-solved
    with ``1e-8 * trace(R) / dim`` added to the diagonal. With
    ``return_flag=True`` the result is ``(alpha, regularized)``.
    """
    R = np.asarray(R, dtype=float)
    r0 = np.asarray(r0, dtype=float)
    dim = R.shape[0]
    if R.shape != (dim, dim) or r0.shape != (dim,):
        raise ValueError(f"expected a square system, got R {R.shape} and r0 {r0.shape}")
    regularized = False
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(R)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        R = R + _ridge(R, dim) * np.eye(dim)
        regularized = True
    try:
        alpha = np.linalg.solve(R, -r0)
    except np.linalg.LinAlgError as exc:
        raise EstimationError("Yule-Walker system is singular even after ridge regularization") from exc
    if not np.all(np.isfinite(alpha)):
        raise EstimationError("Yule-Walker solve produced non-finite coefficients")
    return (alpha, regularized) if return_flag else alpha


def noise_variance(lags: LagGrid, alpha, layout=None) -> float:
    """``r[0,0] + sum alpha[i,j] r[-i,-j]``; the YW equation at the origin.

    ``layout`` defaults to the lag box spanned by the window of ``lags``.
    """
    alpha = np.asarray(alpha, dtype=float)
    if layout is None:
        layout = lag_order(lags.kmax, lags.lmax)
    if len(layout) != alpha.size:
        raise ValueError(f"alpha has {alpha.size} entries but the layout has {len(layout)}")
    s2 = float(lags[0, 0] + sum(a * lags[-i, -j] for a, (i, j) in zip(alpha, layout)))
    if not s2 > 0:
        raise DegenerateFieldError(f"innovation variance estimate {s2:.3g} is not positive")
    return s2


def filter_residual(field, alpha, K1: int, K2: int) -> np.ndarray:
    """Apply ``x[n,m] + sum alpha[i,j] x[n-i,m-j]`` on the fully overlapping region.

    ``alpha`` is a vector in ``lag_order(K1, K2)`` layout or a lag mapping.
    The output has shape ``(N1-K1, N2-K2)``; entry ``[0, 0]`` corresponds to
    ``x[K1, K2]``.
    """
    x = as_field(field)
    n1, n2 = x.shape
    if n1 <= K1 or n2 <= K2:
        raise ValueError(f"a {n1}x{n2} field is too small to filter with AR({K1}, {K2})")
    layout = lag_order(K1, K2)
    if isinstance(alpha, dict):
        coeffs = [alpha.get(lag, 0.0) for lag in layout]
    else:
        coeffs = np.asarray(alpha, dtype=float)
        if coeffs.shape != (len(layout),):
            raise ValueError(f"alpha has {coeffs.size} entries, AR({K1}, {K2}) needs {len(layout)}")
    w = x[K1:, K2:].copy()
    for c, (i, j) in zip(coeffs, layout):
        if c != 0.0:
            w += c * x[K1 - i: n1 - i, K2 - j: n2 - j]
    return w


def fit_ar(field, K1: int, K2: int) -> ArFit:
    """Stage one: Yule-Walker AR(K1, K2) fit plus the innovation estimate."""
    x = as_field(field)
    lags = estimate_lags(x, K1, K2)
    if not lags[0, 0] > np.finfo(float).tiny:
        raise DegenerateFieldError("zero sample variance")
    R, r0, layout = build_yw_system(lags, K1, K2)
    alpha, regularized = solve_yw(R, r0, return_flag=True)
    s2 = noise_variance(lags, alpha, layout)
    residual = filter_residual(x, alpha, K1, K2)
    return ArFit(
        alpha=dict(zip(layout, alpha.tolist())),
        sigma2_hat=s2,
        residual=residual,
        K1=K1,
        K2=K2,
        regularized=regularized,
    )
