"""Online pseudoinverse (OLP) learner.

The learner keeps output weights ``w`` (N x M) and an M x M inhibition matrix
``theta`` and folds in one (activation, target) pair at a time::

    u     = theta @ a
    denom = 1 + a @ u
    b     = u / denom
    w     = w + outer(y - w @ a, b)
    theta = theta - outer(u, b)

Starting from ``theta = I / M`` and ``w = 0`` this recursion reproduces, after
k samples, the ridge solution ``w.T = (M I + A.T A)^-1 A.T Y`` with
``theta = (M I + A.T A)^-1``. The adaptive variant adds
``I * (1 - exp(-|E|)) / M`` to ``theta`` after each step, where
``E = (y - w @ a) / denom`` and ``|E|`` is the Euclidean norm. An all-zero
activation is a no-op in both modes (only the counter advances).

All update functions modify the state in place and return it. Use
``state.copy()`` first if the previous state must be kept.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import blas

from olpnet.errors import ArgumentError, DataFormatError, NumericOverflowError

OVERFLOW_LIMIT = 1e12

_HEADER = struct.Struct("<4sQQQQ")
_MAGIC = b"OLP1"


class Mode(str, enum.Enum):
    STATIC = "static"
    ADAPTIVE = "adaptive"


@dataclass
class OlpState:
    m: int
    n: int
    w: np.ndarray
    theta: np.ndarray
    mode: Mode = Mode.STATIC
    k: int = 0

    def copy(self) -> "OlpState":
        return OlpState(self.m, self.n, self.w.copy(), self.theta.copy(), self.mode, self.k)

    @property
    def footprint(self) -> int:
        """Number of reals held by the state (excluding the O(1) header)."""
        return int(self.w.size + self.theta.size)


def olp_init(m: int, n: int, mode: Mode | str = Mode.STATIC) -> OlpState:
    if int(m) < 1 or int(n) < 1:
        raise ArgumentError(f"hidden and output sizes must be positive, got m={m}, n={n}")
    m, n = int(m), int(n)
    try:
        mode = Mode(mode)
    except ValueError:
        raise ArgumentError(f"unknown mode {mode!r}") from None
    theta = np.eye(m) / m
    return OlpState(m=m, n=n, w=np.zeros((n, m)), theta=theta, mode=mode, k=0)


def _activation(state: OlpState, a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    if a.shape[0] != state.m:
        raise ArgumentError(f"activation has length {a.shape[0]}, expected {state.m}")
    if not np.all(np.isfinite(a)):
        raise ArgumentError("activation contains non-finite entries")
    return a


def _target(state: OlpState, y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != state.n:
        raise ArgumentError(f"target has length {y.shape[0]}, expected {state.n}")
    if not np.all(np.isfinite(y)):
        raise ArgumentError("target contains non-finite entries")
    return y


def olp_gain(state: OlpState, a) -> tuple[np.ndarray, float]:
    """Return the gain row ``b`` and its denominator ``1 + a' theta a``."""
    a = _activation(state, a)
    u = state.theta @ a
    denom = 1.0 + float(a @ u)
    return u / denom, denom


def olp_predict(state: OlpState, a) -> np.ndarray:
    return state.w @ _activation(state, a)


def olp_normalized_error(state: OlpState, a, y) -> np.ndarray:
    a = _activation(state, a)
    y = _target(state, y)
    denom = 1.0 + float(a @ (state.theta @ a))
    return (y - state.w @ a) / denom


def _check_bounded(w_new: np.ndarray, diag_new: np.ndarray) -> None:
    # theta stays positive semi-definite, so |theta_ij| <= max_i theta_ii
    # and the diagonal bounds every entry.
    for name, arr in (("output weights", w_new), ("inhibition matrix", diag_new)):
        if not np.all(np.isfinite(arr)):
            raise NumericOverflowError(f"{name} became non-finite")
        peak = float(np.max(np.abs(arr))) if arr.size else 0.0
        if peak > OVERFLOW_LIMIT:
            raise NumericOverflowError(f"{name} magnitude {peak:.3e} exceeds {OVERFLOW_LIMIT:.0e}")


def _rank_one_downdate(theta: np.ndarray, u: np.ndarray, b: np.ndarray) -> None:
    """theta -= outer(u, b), in place."""
    if theta.flags.c_contiguous:
        # theta.T is Fortran-ordered, so dger writes straight into our buffer
        blas.dger(-1.0, b, u, a=theta.T, overwrite_a=True)
    else:
        theta -= np.outer(u, b)


def _step(state: OlpState, a, y, adaptive: bool) -> OlpState:
    a = _activation(state, a)
    y = _target(state, y)
    theta = state.theta
    if not a.any():
        # zero gain: nothing is learned, and forgetting is not applied either
        state.k += 1
        return state

    u = theta @ a
    denom = 1.0 + float(a @ u)
    b = u / denom
    err = y - state.w @ a

    forget = 0.0
    if adaptive:
        e_norm = float(np.linalg.norm(err / denom))
        forget = -np.expm1(-e_norm) / state.m

    w_new = state.w + np.outer(err, b)
    _check_bounded(w_new, np.diagonal(theta) - u * b + forget)

    state.w = w_new
    _rank_one_downdate(theta, u, b)
    if forget:
        theta[np.diag_indices_from(theta)] += forget
    state.k += 1
    return state


def olp_update_static(state: OlpState, a, y) -> OlpState:
    if state.mode is not Mode.STATIC:
        raise ArgumentError("olp_update_static called on an adaptive-mode state")
    return _step(state, a, y, adaptive=False)


def olp_update_adaptive(state: OlpState, a, y) -> OlpState:
    if state.mode is not Mode.ADAPTIVE:
        raise ArgumentError("olp_update_adaptive called on a static-mode state")
    return _step(state, a, y, adaptive=True)


def olp_update(state: OlpState, a, y) -> OlpState:
    """Apply the update matching ``state.mode``."""
    return _step(state, a, y, adaptive=state.mode is Mode.ADAPTIVE)


def olp_update_block(state: OlpState, a_rows, y_rows) -> OlpState:
    """Fold in K samples at once (static mode only).

    Algebraically identical to K successive ``olp_update_static`` calls: the
    K rank-one downdates collapse into one rank-K Woodbury downdate::

        P     = theta @ A.T
        S     = I + A @ P
        w     = w + (S^-1 (Y - A w.T)).T @ P.T
        theta = theta - P @ S^-1 @ P.T

    Cost is O(M^2 K) in matrix-matrix products instead of K matrix-vector
    passes, which matters once theta no longer fits in cache.
    """
    if state.mode is not Mode.STATIC:
        raise ArgumentError("block updates are only exact in static mode")
    a_rows = np.asarray(a_rows, dtype=np.float64)
    y_rows = np.asarray(y_rows, dtype=np.float64)
    if a_rows.ndim != 2 or a_rows.shape[1] != state.m:
        raise ArgumentError(f"activation block must be K x {state.m}, got {a_rows.shape}")
    if y_rows.ndim != 2 or y_rows.shape != (a_rows.shape[0], state.n):
        raise ArgumentError(f"target block must be {a_rows.shape[0]} x {state.n}, got {y_rows.shape}")
    if a_rows.shape[0] == 0:
        return state
    if not (np.all(np.isfinite(a_rows)) and np.all(np.isfinite(y_rows))):
        raise ArgumentError("block contains non-finite entries")

    theta = state.theta
    p = theta @ a_rows.T
    s = a_rows @ p
    s[np.diag_indices_from(s)] += 1.0
    s = 0.5 * (s + s.T)
    resid = y_rows - a_rows @ state.w.T
    gain_t = np.linalg.solve(s, p.T)  # S^-1 P.T, K x M
    w_new = state.w + np.linalg.solve(s, resid).T @ p.T
    _check_bounded(w_new, np.diagonal(theta) - np.einsum("ik,ki->i", p, gain_t))

    state.w = w_new
    if theta.flags.c_contiguous:
        # theta.T -= gain_t.T @ p.T, written in place through the Fortran view
        blas.dgemm(-1.0, gain_t, p, beta=1.0, c=theta.T, trans_a=True, trans_b=True, overwrite_c=True)
    else:
        theta -= p @ gain_t
    state.k += a_rows.shape[0]
    return state


def save_state(state: OlpState, path) -> None:
    """Write a checkpoint.

    Layout (little-endian): magic ``OLP1``, then m, n, mode (0 static,
    1 adaptive), k as uint64, then w row-major, then theta row-major, both as
    float64.
    """
    mode_code = 0 if state.mode is Mode.STATIC else 1
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, state.m, state.n, mode_code, state.k))
        fh.write(np.ascontiguousarray(state.w, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(state.theta, dtype="<f8").tobytes())


def load_state(path) -> OlpState:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DataFormatError("checkpoint shorter than its header")
    magic, m, n, mode_code, k = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise DataFormatError(f"bad checkpoint magic {magic!r}")
    if mode_code not in (0, 1) or m < 1 or n < 1:
        raise DataFormatError("corrupt checkpoint header")
    expected = _HEADER.size + 8 * (n * m + m * m)
    if len(raw) != expected:
        raise DataFormatError(f"checkpoint has {len(raw)} bytes, expected {expected}")
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).astype(np.float64)
    w = body[: n * m].reshape(n, m).copy()
    theta = body[n * m :].reshape(m, m).copy()
    return OlpState(m, n, w, theta, Mode.STATIC if mode_code == 0 else Mode.ADAPTIVE, k)
