"""Random-projection network: frozen sigmoid hidden layer plus linear readout."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from olpnet.errors import ArgumentError, SingularMatrixError
from olpnet.numerics import Prng, solve_linear
from olpnet.olp import OlpState, olp_predict


@dataclass(frozen=True)
class RandomLayer:
    d: int
    m: int
    w_in: np.ndarray
    bias: np.ndarray
    activation: str = "sigmoid"


def layer_init(d: int, m: int, seed: int, scale: float = 1.0, bias: bool = True) -> RandomLayer:
    """Draw input weights (M x d), then biases (M), uniform on [-scale, scale).

    With ``bias=False`` the bias vector is all zeros and the hidden layer is
    the plain ``g(W_in x)`` form.
    """
    if int(d) < 1 or int(m) < 1:
        raise ArgumentError(f"layer dimensions must be positive, got d={d}, m={m}")
    if not np.isfinite(scale) or scale < 0:
        raise ArgumentError(f"scale must be a non-negative finite number, got {scale}")
    d, m = int(d), int(m)
    if m <= d:
        warnings.warn(f"hidden layer ({m}) is not wider than the input ({d})", stacklevel=2)

    rng = Prng(seed)
    if scale == 0:
        w_in, b = np.zeros((m, d)), np.zeros(m)
    else:
        w_in = rng.uniform_array(-scale, scale, (m, d))
        b = rng.uniform_array(-scale, scale, m) if bias else np.zeros(m)
    w_in.flags.writeable = False
    b.flags.writeable = False
    return RandomLayer(d=d, m=m, w_in=w_in, bias=b)


def sigmoid(z) -> np.ndarray:
    """Logistic function, evaluated without overflow for any finite z."""
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def hidden(layer: RandomLayer, x) -> np.ndarray:
    """Hidden activations for one input (d,) or a batch (K, d)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != layer.d or x.ndim not in (1, 2):
        raise ArgumentError(f"input has shape {x.shape}, expected (..., {layer.d})")
    if not np.all(np.isfinite(x)):
        raise ArgumentError("input contains non-finite entries")
    return sigmoid(x @ layer.w_in.T + layer.bias)


def forward(layer: RandomLayer, state: OlpState, x) -> np.ndarray:
    if layer.m != state.m:
        raise ArgumentError(f"layer has {layer.m} hidden units but learner expects {state.m}")
    return olp_predict(state, hidden(layer, x))


def batch_solve(a_rows, y_rows, lam: float | None = None) -> np.ndarray:
    """Closed-form regularized least squares, returned as an N x M weight matrix.

    Solves ``(lam I + A.T A) X = A.T Y`` and returns ``X.T``. The default
    ``lam = M`` is the exact fixed point of the static OLP recursion started
    from ``theta = I / M``; ``lam = 0`` gives the plain least-squares
    (pseudoinverse) solution when ``A`` has full column rank.
    """
    a_rows = np.asarray(a_rows, dtype=np.float64)
    y_rows = np.asarray(y_rows, dtype=np.float64)
    if y_rows.ndim == 1:
        y_rows = y_rows.reshape(-1, 1)
    if a_rows.ndim != 2 or a_rows.shape[0] < 1:
        raise ArgumentError(f"design matrix must be K x M with K >= 1, got {a_rows.shape}")
    if y_rows.shape[0] != a_rows.shape[0]:
        raise ArgumentError(f"{a_rows.shape[0]} design rows but {y_rows.shape[0]} target rows")
    m = a_rows.shape[1]
    lam = float(m if lam is None else lam)
    if lam < 0:
        raise ArgumentError(f"regularization must be non-negative, got {lam}")

    normal = a_rows.T @ a_rows
    normal[np.diag_indices_from(normal)] += lam
    try:
        x = solve_linear(normal, a_rows.T @ y_rows)
    except SingularMatrixError as exc:
        if lam == 0:
            raise SingularMatrixError(f"{exc}; A.T A is rank deficient, use lam > 0") from None
        raise
    return x.T
