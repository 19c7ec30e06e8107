"""Two-stage Yule-Walker least-squares ARMA estimation.

Stage one (:func:`armafield.ar_yw.fit_ar`) estimates the innovations with a
long AR filter. Stage two regresses each pixel on its AR lags and on the
negated innovation estimates at the MA lags::

    x[n,m] + phi[n,m] . theta = w[n,m]

and takes the least-squares ``theta``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from armafield.ar_yw import COND_LIMIT, RIDGE_SCALE, ArFit, fit_ar
from armafield.core import ArmaParams, ModelOrder, as_field, theta_unpack
from armafield.errors import DegenerateFieldError, EstimationError


@dataclass(frozen=True)
class ArmaFit:
    """Result of :func:`estimate`.

    ``noise`` is the stage-one innovation estimate on ``[K1..N1-1] x [K2..N2-1]``;
    ``residual`` is the final ARMA residual ``x + Phi theta`` on the regression
    region ``[L+1..N1-1] x [M+1..N2-1]``.
    """

    params: ArmaParams
    theta: np.ndarray
    regression_rows: int
    regularized: bool
    sigma2_hat: float
    order: ModelOrder
    noise: np.ndarray
    residual: np.ndarray
    ar_fit: ArFit

    def to_dict(self) -> dict:
        """JSON-ready summary with a fixed key set."""
        return {
            "order": self.order.to_dict(),
            "theta": [float(v) for v in self.theta],
            "a": {f"{i},{j}": self.params.a[(i, j)] for (i, j) in self.order.ar_lags},
            "b": {f"{i},{j}": self.params.b[(i, j)] for (i, j) in self.order.ma_lags},
            "sigma2": float(self.sigma2_hat),
            "regularized": bool(self.regularized),
            "regression_rows": int(self.regression_rows),
        }


def build_phi(field, noise, order: ModelOrder):
    """Regression matrix and target for stage two.

    One row per ``(n, m)`` with ``n`` in ``[L+1..N1-1]`` and ``m`` in
    ``[M+1..N2-1]``, ``n`` outer. Columns hold ``x`` at the AR lags then ``-w`` at
    the MA lags. ``noise[0, 0]`` is ``w[K1, K2]`` in field coordinates.

    Returns
    -------
    Phi : ndarray, shape (rows, n_theta)
    x : ndarray, shape (rows,)
    """
    x = as_field(field)
    n1, n2 = x.shape
    K1, K2 = order.K1, order.K2
    L, M = order.margins
    if L + 1 >= n1 or M + 1 >= n2:
        raise ValueError(f"a {n1}x{n2} field is too small for regression margins L={L}, M={M}")
    noise = np.asarray(noise, dtype=float)
    if noise.shape != (n1 - K1, n2 - K2):
        raise ValueError(f"noise shape {noise.shape} is not aligned with field {x.shape} at offset ({K1}, {K2})")
    cols = []
    for i, j in order.ar_lags:
        cols.append(x[L + 1 - i: n1 - i, M + 1 - j: n2 - j].ravel())
    for i, j in order.ma_lags:
        cols.append(-noise[L + 1 - i - K1: n1 - i - K1, M + 1 - j - K2: n2 - j - K2].ravel())
    rows = (n1 - 1 - L) * (n2 - 1 - M)
    Phi = np.column_stack(cols) if cols else np.empty((rows, 0))
    return Phi, x[L + 1:, M + 1:].ravel().copy()


def solve_theta(Phi, x, return_flag: bool = False):
    """Least-squares ``theta = -(Phi^T Phi)^{-1} Phi^T x`` via Householder QR.

    If ``cond(Phi^T Phi)`` exceeds ``1e10`` a ridge ``1e-8 * trace(Phi^T Phi) / dim``
    is added (as augmented rows). With ``return_flag=True`` the result is
    ``(theta, regularized)``.
    """
    Phi = np.asarray(Phi, dtype=float)
    x = np.asarray(x, dtype=float)
    rows, dim = Phi.shape
    if x.shape != (rows,):
        raise ValueError(f"target has shape {x.shape}, expected ({rows},)")
    if dim == 0 or rows < dim:
        raise ValueError(f"need at least as many rows as unknowns, got {rows}x{dim}")
    Q, R = np.linalg.qr(Phi)
    sv = np.linalg.svd(R, compute_uv=False)
    regularized = False
    if sv[-1] == 0 or (sv[0] / sv[-1]) ** 2 > COND_LIMIT:
        lam = RIDGE_SCALE * np.sum(Phi * Phi) / dim
        if not lam > 0:
            raise EstimationError("regression matrix is rank deficient even after ridge regularization")
        Q, R = np.linalg.qr(np.vstack([Phi, np.sqrt(lam) * np.eye(dim)]))
        x = np.concatenate([x, np.zeros(dim)])
        regularized = True
    diag = np.abs(np.diag(R))
    if diag.min() <= np.finfo(float).eps * diag.max() * max(rows, dim):
        raise EstimationError("regression matrix is rank deficient even after ridge regularization")
    theta = -scipy.linalg.solve_triangular(R, Q.T @ x)
    return (theta, regularized) if return_flag else theta


def estimate(field, order: ModelOrder) -> ArmaFit:
    """Fit ARMA(p1, p2, q1, q2) to a zero-mean field.

    Raises
    ------
    DegenerateFieldError
        For a constant field or a non-positive variance estimate.
    EstimationError
        If a linear system stays singular after regularization.
    """
    x = as_field(field)
    if order.n_theta == 0:
        raise ValueError("ARMA(0,0,0,0) has no parameters to estimate")
    need = order.min_size
    if x.shape[0] < need[0] or x.shape[1] < need[1]:
        raise ValueError(f"a {x.shape[0]}x{x.shape[1]} field is below the {need[0]}x{need[1]} minimum for {order}")
    ar = fit_ar(x, order.K1, order.K2)
    Phi, target = build_phi(x, ar.residual, order)
    theta, regularized = solve_theta(Phi, target, return_flag=True)
    resid = target + Phi @ theta
    sigma2 = float(np.var(resid))
    if not sigma2 > 0:
        raise DegenerateFieldError("final residual has zero variance")
    L, M = order.margins
    return ArmaFit(
        params=theta_unpack(theta, order, sigma2),
        theta=theta,
        regression_rows=Phi.shape[0],
        regularized=regularized or ar.regularized,
        sigma2_hat=sigma2,
        order=order,
        noise=ar.residual,
        residual=resid.reshape(x.shape[0] - 1 - L, x.shape[1] - 1 - M),
        ar_fit=ar,
    )
