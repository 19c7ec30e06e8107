"""Sample autocorrelation of a zero-mean field over a signed lag window."""

from __future__ import annotations

import numpy as np

from armafield.core import as_field


class LagGrid:
    """Autocorrelation estimates ``r[k, l]`` for ``|k| <= kmax``, ``|l| <= lmax``.

    Index with a lag tuple: ``lags[k, l]``. Values are held in a dense
    ``(2*kmax+1, 2*lmax+1)`` array centred on lag ``(0, 0)``.
    """

    def __init__(self, values: np.ndarray, kmax: int, lmax: int):
        if values.shape != (2 * kmax + 1, 2 * lmax + 1):
            raise ValueError(f"lag array shape {values.shape} does not match kmax={kmax}, lmax={lmax}")
        self.values = values
        self.kmax = kmax
        self.lmax = lmax
        self.values.setflags(write=False)

    def __getitem__(self, lag):
        k, l = lag
        if abs(k) > self.kmax or abs(l) > self.lmax:
            raise KeyError(f"lag ({k}, {l}) outside the estimated window ±({self.kmax}, {self.lmax})")
        return self.values[k + self.kmax, l + self.lmax]

    def scaled(self, c: float) -> "LagGrid":
        return LagGrid(self.values * c, self.kmax, self.lmax)

    def normalized(self) -> "LagGrid":
        return self.scaled(1.0 / self[0, 0])

    def __repr__(self):
        return f"LagGrid(kmax={self.kmax}, lmax={self.lmax}, r00={self[0, 0]:.6g})"


def estimate_lags(field, kmax: int, lmax: int) -> LagGrid:
    """Estimate ``r[k, l]`` with the unbiased normalisation ``1/((N1-k)(N2-|l|))``.

    For ``k >= 0`` and ``l >= 0``::

        r[k, l]  = sum x[i, j] x[i+k, j+l]   / ((N1-k)(N2-l))
        r[k, -l] = sum x[i, j+l] x[i+k, j]   / ((N1-k)(N2-l))

    and the remaining half of the window follows from ``r[-k, -l] = r[k, l]``.
    The field is expected to be zero-mean already.
    """
    x = as_field(field)
    n1, n2 = x.shape
    if not (0 <= kmax < n1 and 0 <= lmax < n2):
        raise ValueError(f"lag window ±({kmax}, {lmax}) does not fit a {n1}x{n2} field")
    out = np.zeros((2 * kmax + 1, 2 * lmax + 1))
    for k in range(kmax + 1):
        for l in range(-lmax, lmax + 1):
            if k == 0 and l < 0:
                continue
            if l >= 0:
                s = np.sum(x[: n1 - k, : n2 - l] * x[k:, l:])
            else:
                s = np.sum(x[: n1 - k, -l:] * x[k:, : n2 + l])
            r = s / ((n1 - k) * (n2 - abs(l)))
            out[kmax + k, lmax + l] = r
            out[kmax - k, lmax - l] = r
    return LagGrid(out, kmax, lmax)
