"""Grid and parameter types shared by every stage of the pipeline.

A field is a plain 2D ``float64`` numpy array indexed ``x[n, m]`` (row ``n``,
column ``m``). Coefficients live on quarter-plane lag boxes; the implicit
leading coefficients ``a00 = b00 = 1`` are never stored.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

Lag = Tuple[int, int]


def lag_order(p1: int, p2: int) -> List[Lag]:
    """All lags of the ``[0..p1] x [0..p2]`` box except ``(0, 0)``, row-major.

    >>> lag_order(2, 1)
    [(0, 1), (1, 0), (1, 1), (2, 0), (2, 1)]
    """
    if p1 < 0 or p2 < 0:
        raise ValueError(f"lag box sizes must be non-negative, got ({p1}, {p2})")
    return [(i, j) for i in range(p1 + 1) for j in range(p2 + 1) if (i, j) != (0, 0)]


def default_ar_order(p1: int, p2: int, q1: int, q2: int) -> int:
    return 2 * max(p1 + q1, p2 + q2) + 2


@dataclass(frozen=True)
class ModelOrder:
    """ARMA(p1, p2, q1, q2) support plus the long-AR truncation (K1, K2).

    ``K1``/``K2`` default to ``2 * max(p1 + q1, p2 + q2) + 2``.
    """

    p1: int
    p2: int
    q1: int
    q2: int
    K1: Optional[int] = None
    K2: Optional[int] = None

    def __post_init__(self):
        for name in ("p1", "p2", "q1", "q2"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        k = default_ar_order(self.p1, self.p2, self.q1, self.q2)
        if self.K1 is None:
            object.__setattr__(self, "K1", k)
        if self.K2 is None:
            object.__setattr__(self, "K2", k)
        object.__setattr__(self, "K1", int(self.K1))
        object.__setattr__(self, "K2", int(self.K2))
        if self.K1 <= max(self.p1, self.q1) or self.K2 <= max(self.p2, self.q2):
            raise ValueError(
                f"AR approximation order ({self.K1}, {self.K2}) must exceed "
                f"max(p1, q1) = {max(self.p1, self.q1)} and max(p2, q2) = {max(self.p2, self.q2)}"
            )

    @property
    def arma(self) -> Tuple[int, int, int, int]:
        return (self.p1, self.p2, self.q1, self.q2)

    @property
    def ar_lags(self) -> List[Lag]:
        return lag_order(self.p1, self.p2)

    @property
    def ma_lags(self) -> List[Lag]:
        return lag_order(self.q1, self.q2)

    @property
    def n_ar(self) -> int:
        return (self.p1 + 1) * (self.p2 + 1) - 1

    @property
    def n_ma(self) -> int:
        return (self.q1 + 1) * (self.q2 + 1) - 1

    @property
    def n_theta(self) -> int:
        return self.n_ar + self.n_ma

    @property
    def margins(self) -> Tuple[int, int]:
        """Regression margins ``(L, M) = (K1 + q1, K2 + q2)``."""
        return (self.K1 + self.q1, self.K2 + self.q2)

    @property
    def min_size(self) -> Tuple[int, int]:
        """Smallest field shape the two-stage estimator accepts."""
        return (self.K1 + self.q1 + self.p1 + 2, self.K2 + self.q2 + self.p2 + 2)

    def to_dict(self) -> dict:
        return {"p1": self.p1, "p2": self.p2, "q1": self.q1, "q2": self.q2,
                "K1": self.K1, "K2": self.K2}


@dataclass(frozen=True)
class ArmaParams:
    """Coefficients ``a[(i, j)]``, ``b[(i, j)]`` and innovation variance ``sigma2``.

    Missing lags in ``a`` or ``b`` are zero when packed against an order.
    """

    a: Dict[Lag, float] = field(default_factory=dict)
    b: Dict[Lag, float] = field(default_factory=dict)
    sigma2: float = 1.0

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2!r}")
        for name in ("a", "b"):
            coeffs = {(int(i), int(j)): float(v) for (i, j), v in getattr(self, name).items()}
            if (0, 0) in coeffs:
                raise ValueError(f"{name}[(0, 0)] is fixed at 1 and must not be given")
            if any(i < 0 or j < 0 for i, j in coeffs):
                raise ValueError(f"{name} has a lag outside the quarter plane")
            object.__setattr__(self, name, coeffs)

    def check_order(self, order: ModelOrder) -> None:
        for name, (r1, r2) in (("a", (order.p1, order.p2)), ("b", (order.q1, order.q2))):
            for i, j in getattr(self, name):
                if i > r1 or j > r2:
                    raise ValueError(
                        f"{name}[{i},{j}] lies outside the ({r1}, {r2}) lag box of {order.arma}"
                    )

    def a_array(self, order: ModelOrder) -> np.ndarray:
        """Dense ``(p1+1, p2+1)`` array of the AR polynomial, ``[0, 0] = 1``."""
        return _dense(self.a, order.p1, order.p2)

    def b_array(self, order: ModelOrder) -> np.ndarray:
        return _dense(self.b, order.q1, order.q2)


def _dense(coeffs, r1, r2):
    out = np.zeros((r1 + 1, r2 + 1))
    out[0, 0] = 1.0
    for (i, j), v in coeffs.items():
        out[i, j] = v
    return out


def theta_pack(params: ArmaParams, order: ModelOrder) -> np.ndarray:
    """AR block then MA block, each in :func:`lag_order` sequence."""
    params.check_order(order)
    a = [params.a.get(lag, 0.0) for lag in order.ar_lags]
    b = [params.b.get(lag, 0.0) for lag in order.ma_lags]
    return np.array(a + b, dtype=float)


def theta_unpack(theta, order: ModelOrder, sigma2: float = 1.0) -> ArmaParams:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (order.n_theta,):
        raise ValueError(f"theta has shape {theta.shape}, order {order.arma} needs ({order.n_theta},)")
    a = dict(zip(order.ar_lags, theta[: order.n_ar].tolist()))
    b = dict(zip(order.ma_lags, theta[order.n_ar:].tolist()))
    return ArmaParams(a=a, b=b, sigma2=sigma2)


def as_field(values) -> np.ndarray:
    """Validate and convert to a C-contiguous 2D ``float64`` array."""
    x = np.ascontiguousarray(values, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise ValueError(f"a field must be a non-empty 2D grid, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("field contains NaN or Inf")
    return x


def zero_mean(values) -> Tuple[np.ndarray, float]:
    """Subtract the sample mean; returns ``(centred_field, mean)``."""
    x = as_field(values)
    mean = float(x.mean())
    out = x - mean
    # second pass removes the rounding left by the first on large-offset data
    drift = float(out.mean())
    if drift != 0.0:
        out -= drift
        mean += drift
    return out, mean
