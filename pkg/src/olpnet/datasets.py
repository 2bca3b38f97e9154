"""MNIST IDX ingestion and Mackey-Glass series generation."""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from olpnet.errors import ArgumentError, DataFormatError, NumericOverflowError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

CROP = slice(2, 26)
DEFAULT_TAPS = (1, 34, 67, 100)
DEFAULT_HORIZON = 10
MG_TRANSIENT = 2000
MG_DIVERGENCE = 10.0


def _read_bytes(source) -> bytes:
    if isinstance(source, (bytes, bytearray, memoryview)):
        return bytes(source)
    if isinstance(source, (str, Path)):
        return Path(source).read_bytes()
    return source.read()


def _idx_header(raw: bytes, magic: int, ndims: int, what: str) -> tuple[int, ...]:
    hdr = 4 * (1 + ndims)
    if len(raw) < 4:
        raise DataFormatError(f"{what} file truncated inside its header ({len(raw)} bytes)")
    got = struct.unpack_from(">I", raw)[0]
    if got != magic:
        raise DataFormatError(f"{what} file has magic 0x{got:08X}, expected 0x{magic:08X}")
    if len(raw) < hdr:
        raise DataFormatError(f"{what} file truncated inside its header ({len(raw)} bytes)")
    dims = struct.unpack_from(f">{ndims}I", raw, 4)
    need = hdr + int(np.prod(dims, dtype=np.int64))
    if len(raw) < need:
        raise DataFormatError(f"{what} payload truncated: {len(raw)} bytes, need {need}")
    return dims


def load_idx_images(source) -> np.ndarray:
    """Parse an IDX image file into a (count, rows, cols) uint8 array."""
    raw = _read_bytes(source)
    count, rows, cols = _idx_header(raw, IDX_IMAGES_MAGIC, 3, "image")
    return np.frombuffer(raw, dtype=np.uint8, count=count * rows * cols, offset=16).reshape(count, rows, cols).copy()


def load_idx_labels(source) -> np.ndarray:
    raw = _read_bytes(source)
    (count,) = _idx_header(raw, IDX_LABELS_MAGIC, 1, "label")
    labels = np.frombuffer(raw, dtype=np.uint8, count=count, offset=8).copy()
    if labels.size and labels.max() > 9:
        bad = int(np.argmax(labels > 9))
        raise DataFormatError(f"label {labels[bad]} at position {bad} is outside 0-9")
    return labels


def dump_idx_images(images) -> bytes:
    images = np.asarray(images, dtype=np.uint8)
    count, rows, cols = images.shape
    return struct.pack(">4I", IDX_IMAGES_MAGIC, count, rows, cols) + images.tobytes()


def dump_idx_labels(labels) -> bytes:
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">2I", IDX_LABELS_MAGIC, labels.size) + labels.tobytes()


def preprocess(image28) -> np.ndarray:
    """Drop the 2-pixel border of a 28x28 digit and scale to [0, 1]."""
    img = np.asarray(image28)
    if img.shape != (28, 28):
        raise ArgumentError(f"expected a 28x28 image, got shape {img.shape}")
    return img[CROP, CROP].astype(np.float64) / 255.0


def preprocess_batch(images) -> np.ndarray:
    """Vectorized ``preprocess`` over (K, 28, 28); returns flattened (K, 576) rows."""
    images = np.asarray(images)
    if images.ndim != 3 or images.shape[1:] != (28, 28):
        raise ArgumentError(f"expected (K, 28, 28) images, got shape {images.shape}")
    return images[:, CROP, CROP].reshape(len(images), -1).astype(np.float64) / 255.0


def one_hot(label: int, n_classes: int = 10) -> np.ndarray:
    if not 0 <= int(label) < n_classes or int(label) != label:
        raise ArgumentError(f"label {label} outside 0..{n_classes - 1}")
    out = np.zeros(n_classes)
    out[int(label)] = 1.0
    return out


@dataclass
class MnistSet:
    images: np.ndarray  # (K, 24, 24) float64 in [0, 1]
    labels: np.ndarray  # (K,) integers 0-9

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise DataFormatError(f"{len(self.images)} images but {len(self.labels)} labels")

    @property
    def count(self) -> int:
        return len(self.labels)

    def inputs(self) -> np.ndarray:
        return self.images.reshape(self.count, -1)

    def targets(self) -> np.ndarray:
        return np.eye(10)[self.labels]


def load_mnist(images_path, labels_path) -> MnistSet:
    raw = load_idx_images(images_path)
    if raw.shape[1:] != (28, 28):
        raise DataFormatError(f"MNIST images must be 28x28, file holds {raw.shape[1]}x{raw.shape[2]}")
    flat = preprocess_batch(raw)
    return MnistSet(images=flat.reshape(-1, 24, 24), labels=load_idx_labels(labels_path).astype(np.int64))


@dataclass
class MgSeries:
    values: np.ndarray
    dt: float = 0.1
    params: dict = field(default_factory=lambda: {"a": 0.2, "b": 0.1, "tau": 17.0})
    history_init: float = 1.2

    def __len__(self) -> int:
        return len(self.values)

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.values)) * self.dt


def mackey_glass(
    n_steps: int,
    dt: float = 0.1,
    a: float = 0.2,
    b: float = 0.1,
    tau: float = 17.0,
    x0: float = 1.2,
    interp: str = "hermite",
) -> MgSeries:
    """Integrate dx/dt = a x(t-tau) / (1 + x(t-tau)^10) - b x(t) with classical RK4.

    The history is x(t) = x0 for t <= 0. Delayed values that fall between
    grid points (the RK4 half-steps) are interpolated from the stored
    trajectory: ``"hermite"`` uses the cubic Hermite midpoint built from the
    two neighbouring values and their stored derivatives, keeping the scheme
    fourth order; ``"linear"`` averages the two neighbours, which is only
    second order accurate. Returns ``n_steps + 1`` samples starting at t = 0.
    """
    if int(n_steps) < 1:
        raise ArgumentError(f"n_steps must be positive, got {n_steps}")
    if not dt > 0:
        raise ArgumentError(f"dt must be positive, got {dt}")
    if not tau > 0:
        raise ArgumentError(f"tau must be positive, got {tau}")
    ratio = tau / dt
    lag = int(round(ratio))
    if abs(ratio - lag) > 1e-9 * max(1.0, ratio):
        raise ArgumentError(f"tau/dt must be an integer, got {ratio}")
    if interp not in ("hermite", "linear"):
        raise ArgumentError(f"unknown interpolation {interp!r}")
    n_steps = int(n_steps)
    hermite = interp == "hermite"

    xs = [0.0] * (n_steps + 1)
    fs = [0.0] * (n_steps + 1)  # dx/dt at grid points, for Hermite interpolation
    xs[0] = float(x0)

    def rhs(x, xd):
        return a * xd / (1.0 + xd**10) - b * x

    def past(j):
        # x and dx/dt at grid index j (history is flat for j < 0)
        return (xs[j], fs[j]) if j >= 0 else (x0, 0.0)

    h = dt
    for n in range(n_steps):
        j = n - lag
        x = xs[n]
        x_lo, f_lo = past(j)
        k1 = rhs(x, x_lo)
        fs[n] = k1
        if j + 1 <= 0:
            # delayed interval lies in the flat history, derivative 0 at both ends
            x_hi, f_hi = past(j + 1)[0], 0.0
        else:
            x_hi, f_hi = past(j + 1)
        mid = 0.5 * (x_lo + x_hi)
        if hermite:
            mid += h / 8.0 * (f_lo - f_hi)

        k2 = rhs(x + 0.5 * h * k1, mid)
        k3 = rhs(x + 0.5 * h * k2, mid)
        k4 = rhs(x + h * k3, x_hi)
        x_next = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not abs(x_next) <= MG_DIVERGENCE:
            raise NumericOverflowError(f"Mackey-Glass integration diverged at step {n + 1} (x={x_next})")
        xs[n + 1] = x_next
    return MgSeries(
        values=np.asarray(xs),
        dt=float(dt),
        params={"a": float(a), "b": float(b), "tau": float(tau)},
        history_init=float(x0),
    )


def write_mg_csv(series: MgSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["step", "t", "x"])
        for i, x in enumerate(series.values):
            out.writerow([i, repr(i * series.dt), repr(float(x))])


class EmbeddedSample(NamedTuple):
    input: np.ndarray
    target: np.ndarray
    index: int


@dataclass
class Embedding:
    inputs: np.ndarray  # (S, T) lagged values, one column per tap
    targets: np.ndarray  # (S, 1)
    index: np.ndarray  # (S,) position t in the source series

    def __len__(self) -> int:
        return len(self.index)

    def __getitem__(self, i) -> EmbeddedSample:
        return EmbeddedSample(self.inputs[i], self.targets[i], int(self.index[i]))


def delay_embed(series, taps=DEFAULT_TAPS, horizon: int = DEFAULT_HORIZON) -> Embedding:
    """Build (x[t - tap_1], ..., x[t - tap_T]) -> x[t + horizon] pairs."""
    values = np.asarray(series.values if isinstance(series, MgSeries) else series, dtype=np.float64)
    taps = [int(t) for t in taps]
    if not taps or any(t < 1 for t in taps) or any(b <= a for a, b in zip(taps, taps[1:])):
        raise ArgumentError(f"taps must be strictly ascending positive integers, got {taps}")
    if int(horizon) < 1:
        raise ArgumentError(f"horizon must be at least 1, got {horizon}")
    horizon = int(horizon)
    max_tap = taps[-1]
    count = len(values) - max_tap - horizon
    if count < 1:
        raise ArgumentError(
            f"series of length {len(values)} too short for max tap {max_tap} and horizon {horizon}"
        )
    index = np.arange(max_tap, max_tap + count)
    inputs = np.stack([values[index - t] for t in taps], axis=1)
    targets = values[index + horizon].reshape(-1, 1)
    return Embedding(inputs=inputs, targets=targets, index=index)
