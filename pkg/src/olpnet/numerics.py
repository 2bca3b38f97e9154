"""Dense linear algebra helpers and a seeded PRNG.

Matrices are plain ``numpy.ndarray`` objects of dtype float64. Vectors may be
passed either 1-D or as single-column matrices; the helpers here do not care.
"""

from __future__ import annotations

import numpy as np

from olpnet.errors import ArgumentError, SingularMatrixError

PIVOT_TOL = 1e-12

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def as_mat(x, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ArgumentError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ArgumentError(f"{name} contains non-finite entries")
    return arr


def matmul(a, b) -> np.ndarray:
    """Shape-checked matrix product ``a @ b``."""
    a = as_mat(a, "a")
    b = as_mat(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ArgumentError(
            f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}"
        )
    return a @ b


def solve_linear(a, b) -> np.ndarray:
    """Solve ``a @ X = b`` by Gaussian elimination with partial pivoting.

    Raises SingularMatrixError when a pivot falls below ``PIVOT_TOL`` in
    magnitude. ``b`` may be a vector or a matrix of right-hand sides; the
    result has the same layout.
    """
    b_in = np.asarray(b, dtype=np.float64)
    a = as_mat(a, "a").copy()
    rhs = as_mat(b_in, "b").copy()
    n = a.shape[0]
    if a.shape[1] != n:
        raise ArgumentError(f"coefficient matrix must be square, got {a.shape}")
    if rhs.shape[0] != n:
        raise ArgumentError(f"right-hand side has {rhs.shape[0]} rows, expected {n}")

    for col in range(n):
        piv = col + int(np.argmax(np.abs(a[col:, col])))
        if abs(a[piv, col]) < PIVOT_TOL:
            raise SingularMatrixError(
                f"matrix is singular to working precision (pivot {a[piv, col]:.3e} at column {col})"
            )
        if piv != col:
            a[[col, piv]] = a[[piv, col]]
            rhs[[col, piv]] = rhs[[piv, col]]
        factors = a[col + 1 :, col] / a[col, col]
        a[col + 1 :, col:] -= np.outer(factors, a[col, col:])
        rhs[col + 1 :] -= np.outer(factors, rhs[col])

    x = np.empty_like(rhs)
    for row in range(n - 1, -1, -1):
        x[row] = (rhs[row] - a[row, row + 1 :] @ x[row + 1 :]) / a[row, row]

    return x.reshape(b_in.shape) if b_in.ndim == 1 else x


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


class Prng:
    """SplitMix64 generator.

    The state is a 64-bit counter advanced by the golden-ratio increment
    ``0x9E3779B97F4A7C15``; each output is the counter passed through the
    SplitMix64 finalizer::

        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB
        z =  z ^ (z >> 31)

    Doubles take the top 53 bits: ``(z >> 11) * 2**-53`` in [0, 1). Because
    the state is a plain counter, a batch of draws can be computed in one
    vectorized pass and yields exactly the sequence of repeated scalar draws.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._state = self.seed

    def _next_u64(self, count: int) -> np.ndarray:
        with np.errstate(over="ignore"):
            steps = np.arange(1, count + 1, dtype=np.uint64)
            states = np.uint64(self._state) + steps * np.uint64(_GAMMA)
            out = _mix64(states)
        self._state = (self._state + count * _GAMMA) & _MASK64
        return out

    def next_u64(self) -> int:
        return int(self._next_u64(1)[0])

    def uniform_array(self, lo: float, hi: float, size) -> np.ndarray:
        """Draw ``size`` values in [lo, hi); ``size`` may be an int or a shape."""
        if not lo < hi:
            raise ArgumentError(f"need lo < hi, got lo={lo}, hi={hi}")
        shape = (size,) if np.isscalar(size) else tuple(size)
        count = int(np.prod(shape, dtype=np.int64))
        unit = (self._next_u64(count) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        vals = lo + (hi - lo) * unit
        # lo + (hi - lo) * u can round up to hi
        np.minimum(vals, np.nextafter(hi, lo), out=vals)
        return vals.reshape(shape)

    def next_uniform(self, lo: float, hi: float) -> float:
        return float(self.uniform_array(lo, hi, 1)[0])

    def permutation(self, n: int) -> np.ndarray:
        """Seeded random ordering of ``range(n)``."""
        if n == 0:
            return np.zeros(0, dtype=np.int64)
        return np.argsort(self.uniform_array(0.0, 1.0, n), kind="stable")


def next_uniform(rng: Prng, lo: float, hi: float) -> float:
    return rng.next_uniform(lo, hi)
