"""Experiment runners behind the CLI: MNIST, Mackey-Glass, oracle check, bench."""

from __future__ import annotations

import csv
import itertools
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from olpnet.datasets import (
    DEFAULT_HORIZON,
    DEFAULT_TAPS,
    MG_TRANSIENT,
    delay_embed,
    load_mnist,
    mackey_glass,
)
from olpnet.elm import batch_solve, hidden, layer_init
from olpnet.errors import ArgumentError
from olpnet.numerics import Prng, solve_linear
from olpnet.olp import Mode, olp_init, olp_update, olp_update_block, olp_update_static

log = logging.getLogger(__name__)

COMMANDS = ("mnist", "mg", "verify", "bench")
MNIST_SCALE = 3.0
MG_WARMUP = 500
BLOCK = 1000
VERIFY_TOL = 1e-7


@dataclass
class RunConfig:
    command: str
    seed: int = 0
    hidden: tuple[int, ...] = ()
    mode: str = "static"
    images: Path | None = None
    labels: Path | None = None
    test_images: Path | None = None
    test_labels: Path | None = None
    taps: tuple[int, ...] = DEFAULT_TAPS
    horizon: int = DEFAULT_HORIZON
    steps: int = 10000
    limit: tuple[int, ...] = ()
    out: Path | None = None
    scale: float | None = None
    bias: bool = True
    x0: float = 1.2

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ArgumentError(f"unknown command {self.command!r}, expected one of {COMMANDS}")
        defaults = {"mnist": ((5760,), None), "mg": ((100,), None), "verify": ((), None), "bench": ((250, 500, 1000, 2000), (1000, 100000))}
        if not self.hidden:
            self.hidden = defaults[self.command][0]
        if not self.limit and defaults[self.command][1]:
            self.limit = defaults[self.command][1]
        if self.scale is None:
            self.scale = MNIST_SCALE if self.command == "mnist" else 1.0

    def validate(self) -> "RunConfig":
        if self.mode not in ("static", "adaptive"):
            raise ArgumentError(f"mode must be static or adaptive, got {self.mode!r}")
        if any(int(m) < 1 for m in self.hidden):
            raise ArgumentError(f"hidden sizes must be positive, got {self.hidden}")
        if any(int(k) < 0 for k in self.limit):
            raise ArgumentError(f"sample limits must be non-negative, got {self.limit}")
        if self.seed < 0:
            raise ArgumentError("seed must be non-negative")
        if not self.scale >= 0:
            raise ArgumentError(f"scale must be non-negative, got {self.scale}")
        if self.command == "mnist":
            if self.images is None or self.labels is None:
                raise ArgumentError("mnist needs --images and --labels")
            for p in (self.images, self.labels, self.test_images_path, self.test_labels_path):
                if not Path(p).is_file():
                    raise FileNotFoundError(f"no such data file: {p}")
        if self.command == "mg":
            if self.horizon < 1:
                raise ArgumentError(f"horizon must be at least 1, got {self.horizon}")
            if self.steps < 1:
                raise ArgumentError(f"steps must be positive, got {self.steps}")
            taps = list(self.taps)
            if not taps or taps[0] < 1 or any(b <= a for a, b in zip(taps, taps[1:])):
                raise ArgumentError(f"taps must be strictly ascending positive integers, got {taps}")
        return self

    @property
    def test_images_path(self) -> Path:
        return Path(self.test_images) if self.test_images else Path(self.images).with_name("t10k-images-idx3-ubyte")

    @property
    def test_labels_path(self) -> Path:
        return Path(self.test_labels) if self.test_labels else Path(self.labels).with_name("t10k-labels-idx1-ubyte")


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        out.writerows(rows)


def _fmt(x: float) -> str:
    return f"{x:.10g}"


# --- MNIST -------------------------------------------------------------------


@dataclass
class LearningCurve:
    samples_seen: list[int] = field(default_factory=list)
    error_rate: list[float] = field(default_factory=list)
    per_class_error: list[np.ndarray] = field(default_factory=list)

    def add(self, seen: int, err: float, per_class: np.ndarray) -> None:
        if self.samples_seen and seen <= self.samples_seen[-1]:
            raise ArgumentError("learning-curve checkpoints must be strictly increasing")
        self.samples_seen.append(int(seen))
        self.error_rate.append(float(err))
        self.per_class_error.append(np.asarray(per_class, dtype=np.float64))

    def __len__(self) -> int:
        return len(self.samples_seen)

    def rows(self):
        for seen, err, pc in zip(self.samples_seen, self.error_rate, self.per_class_error):
            yield [seen, _fmt(err), *(_fmt(v) for v in pc)]

    def write_csv(self, path) -> None:
        _write_csv(path, ["samples_seen", "test_error_rate", *(f"error_{c}" for c in range(10))], self.rows())


@dataclass
class MnistResult:
    hidden: int
    curve: LearningCurve

    @property
    def final_error(self) -> float:
        return self.curve.error_rate[-1]


def log_checkpoints(total: int) -> list[int]:
    """0 plus 1, 2, 5, 10, 20, 50, ... up to and including ``total``."""
    points = [0]
    for decade in itertools.count():
        for mult in (1, 2, 5):
            p = mult * 10**decade
            if p >= total:
                if total > 0:
                    points.append(total)
                return points
            points.append(p)


def classify(outputs: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. the lowest class index on ties
    return np.argmax(outputs, axis=1)


def error_rates(pred: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    wrong = pred != labels
    per_class = np.array([wrong[labels == c].mean() if np.any(labels == c) else 0.0 for c in range(10)])
    return float(wrong.mean()), per_class


def _hidden_chunked(layer, x: np.ndarray, chunk: int = 2000) -> np.ndarray:
    out = np.empty((len(x), layer.m))
    for i in range(0, len(x), chunk):
        out[i : i + chunk] = hidden(layer, x[i : i + chunk])
    return out


def train_mnist(
    train_x: np.ndarray,
    train_y: np.ndarray,
    test_x: np.ndarray,
    test_y: np.ndarray,
    m: int,
    *,
    seed: int = 0,
    mode: str = "static",
    limit: int | None = None,
    scale: float = MNIST_SCALE,
    bias: bool = True,
    checkpoints: list[int] | None = None,
) -> MnistResult:
    """Stream shuffled training digits through an OLP learner, scoring the test set at checkpoints.

    ``train_x``/``test_x`` are flattened, preprocessed rows (K x 576) and the
    ``_y`` arrays hold integer labels. Static-mode learners consume the
    stream in blocks (exactly equivalent to per-digit updates); adaptive
    learners go one digit at a time.
    """
    n_avail = len(train_x)
    limit = n_avail if limit is None else int(limit)
    if not 0 <= limit <= n_avail:
        raise ArgumentError(f"limit {limit} outside 0..{n_avail}")
    order = Prng(seed + 1).permutation(n_avail)[:limit]
    layer = layer_init(train_x.shape[1], m, seed, scale=scale, bias=bias)
    state = olp_init(m, 10, mode)
    test_h = _hidden_chunked(layer, test_x)
    targets = np.eye(10)

    curve = LearningCurve()
    seen = 0
    for stop in checkpoints or log_checkpoints(limit):
        while seen < stop:
            idx = order[seen : min(stop, seen + BLOCK)]
            h = hidden(layer, train_x[idx])
            y = targets[train_y[idx]]
            if state.mode is Mode.STATIC:
                olp_update_block(state, h, y)
            else:
                for a_row, y_row in zip(h, y):
                    olp_update(state, a_row, y_row)
            seen += len(idx)
        err, per_class = error_rates(classify(test_h @ state.w.T), test_y)
        curve.add(seen, err, per_class)
        log.info("M=%d seen=%d test error=%.4f", m, seen, err)
    return MnistResult(hidden=m, curve=curve)


def fit_log_slope(ms, errors) -> float:
    """Least-squares slope of log(error) against log(M)."""
    return float(np.polyfit(np.log(np.asarray(ms, float)), np.log(np.asarray(errors, float)), 1)[0])


def run_mnist(config: RunConfig) -> list[MnistResult]:
    """One learning curve per hidden size. With several sizes, also a scaling table."""
    config.validate()
    train = load_mnist(config.images, config.labels)
    test = load_mnist(config.test_images_path, config.test_labels_path)
    limit = config.limit[0] if config.limit else None
    results = [
        train_mnist(
            train.inputs(), train.labels, test.inputs(), test.labels, m,
            seed=config.seed, mode=config.mode, limit=limit, scale=config.scale, bias=config.bias,
        )
        for m in config.hidden
    ]
    if config.out:
        out = Path(config.out)
        if len(results) == 1:
            results[0].curve.write_csv(out)
        else:
            for r in results:
                r.curve.write_csv(out.with_name(f"{out.stem}_M{r.hidden}{out.suffix}"))
            _write_csv(out, ["hidden", "test_error_rate"], [[r.hidden, _fmt(r.final_error)] for r in results])
    return results


# --- Mackey-Glass --------------------------------------------------------------


def nrmse(pred: np.ndarray, truth: np.ndarray) -> float:
    """RMSE divided by the standard deviation of ``truth``; plain RMSE if that is zero."""
    rmse = float(np.sqrt(np.mean((pred - truth) ** 2)))
    spread = float(np.std(truth))
    return rmse / spread if spread > 0 else rmse


@dataclass
class MgResult:
    step: np.ndarray
    truth: np.ndarray
    pred_static: np.ndarray
    pred_adaptive: np.ndarray
    dt: float
    nrmse_static: float
    nrmse_adaptive: float

    def write_csv(self, path) -> None:
        rows = (
            [int(s), _fmt(s * self.dt), _fmt(t), _fmt(ps), _fmt(pa)]
            for s, t, ps, pa in zip(self.step, self.truth, self.pred_static, self.pred_adaptive)
        )
        _write_csv(path, ["step", "t", "truth", "pred_static", "pred_adaptive"], rows)


def run_mg(config: RunConfig, warmup: int = MG_WARMUP) -> MgResult:
    """Predict the series ``horizon`` steps ahead with static and adaptive learners side by side.

    Each embedded sample is first predicted, then used for the update. Both
    learners share one random layer. NRMSE is computed after ``warmup``
    samples.
    """
    config.validate()
    m = config.hidden[0]
    series = mackey_glass(config.steps + MG_TRANSIENT, x0=config.x0)
    values = series.values[MG_TRANSIENT:]
    emb = delay_embed(values, config.taps, config.horizon)
    if len(emb) <= warmup:
        raise ArgumentError(f"only {len(emb)} embedded samples, need more than the {warmup}-sample warm-up")

    layer = layer_init(len(config.taps), m, config.seed, scale=config.scale, bias=config.bias)
    acts = hidden(layer, emb.inputs)
    truth = emb.targets[:, 0]
    preds = {}
    for mode in (Mode.STATIC, Mode.ADAPTIVE):
        state = olp_init(m, 1, mode)
        p = np.empty(len(emb))
        for i, (a, y) in enumerate(zip(acts, emb.targets)):
            p[i] = float(state.w[0] @ a)
            olp_update(state, a, y)
        preds[mode] = p

    window = slice(warmup, None)
    result = MgResult(
        step=emb.index + config.horizon + MG_TRANSIENT,
        truth=truth,
        pred_static=preds[Mode.STATIC],
        pred_adaptive=preds[Mode.ADAPTIVE],
        dt=series.dt,
        nrmse_static=nrmse(preds[Mode.STATIC][window], truth[window]),
        nrmse_adaptive=nrmse(preds[Mode.ADAPTIVE][window], truth[window]),
    )
    if config.out:
        result.write_csv(config.out)
    return result


# --- oracle verification --------------------------------------------------------


@dataclass
class VerifyReport:
    rows: list[tuple[int, int, int, int, float, float]]
    hand_case_ok: bool = True
    tolerance: float = VERIFY_TOL

    @property
    def max_deviation(self) -> float:
        return max(max(r[4], r[5]) for r in self.rows)

    @property
    def passed(self) -> bool:
        return self.hand_case_ok and self.max_deviation < self.tolerance

    def write_csv(self, path) -> None:
        _write_csv(
            path,
            ["m", "n", "k", "seed", "max_dev_w", "max_dev_theta"],
            ([m, n, k, s, _fmt(dw), _fmt(dt)] for m, n, k, s, dw, dt in self.rows),
        )


def oracle_deviation(m: int, n: int, k: int, seed: int) -> tuple[float, float]:
    """Max-abs gap between the static recursion and the ridge closed form (lam = M)."""
    rng = Prng(seed)
    a_rows = rng.uniform_array(-1.0, 1.0, (k, m))
    y_rows = rng.uniform_array(-1.0, 1.0, (k, n))
    state = olp_init(m, n, Mode.STATIC)
    for a, y in zip(a_rows, y_rows):
        olp_update_static(state, a, y)
    w_ref = batch_solve(a_rows, y_rows, lam=m)
    normal = a_rows.T @ a_rows + m * np.eye(m)
    theta_ref = solve_linear(normal, np.eye(m))
    return float(np.max(np.abs(state.w - w_ref))), float(np.max(np.abs(state.theta - theta_ref)))


def run_verify(
    config: RunConfig | None = None,
    ms=(1, 5, 20),
    ns=(1, 3),
    ks=(10, 100, 500),
    seeds=(0, 1, 2, 3, 4),
) -> VerifyReport:
    if config is not None:
        config.validate()
        base = config.seed
        seeds = tuple(base + s for s in seeds)
    grid = list(itertools.product(ms, ns, ks, seeds))
    if not grid:
        raise ArgumentError("verification grid is empty")
    rows = [(m, n, k, s, *oracle_deviation(m, n, k, s)) for m, n, k, s in grid]
    # M = N = 1, theta0 = 1, a = 1, y = 2 must give w = 1, theta = 0.5
    hand = olp_update_static(olp_init(1, 1), [1.0], [2.0])
    report = VerifyReport(rows, hand_case_ok=bool(hand.w[0, 0] == 1.0 and hand.theta[0, 0] == 0.5))
    if config is not None and config.out:
        report.write_csv(config.out)
    return report


# --- memory / time bench ---------------------------------------------------------


@dataclass
class BenchRow:
    m: int
    n: int
    k: int
    olp_reals: int
    batch_reals: int
    streamed: bool
    sec_per_update: float


def time_per_update(m: int, n: int = 10, updates: int = 20, seed: int = 0) -> float:
    """Median wall time of single static updates at hidden size ``m``."""
    rng = Prng(seed)
    state = olp_init(m, n)
    acts = rng.uniform_array(0.0, 1.0, (updates + 2, m))
    ys = rng.uniform_array(0.0, 1.0, (updates + 2, n))
    olp_update_static(state, acts[0], ys[0])
    olp_update_static(state, acts[1], ys[1])
    times = []
    for a, y in zip(acts[2:], ys[2:]):
        t0 = time.perf_counter()
        olp_update_static(state, a, y)
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def run_bench(
    config: RunConfig | None = None,
    ms=(250, 500, 1000, 2000),
    ks=(1000, 100000),
    n: int = 10,
    stream_budget: float = 2e10,
    timing_updates: int = 20,
) -> list[BenchRow]:
    """State footprint versus stream length, plus per-update wall time.

    For every (M, K) the learner's real count is read off the live state. When
    ``M^2 K`` is within ``stream_budget`` the K samples are actually streamed
    through the learner first; otherwise the count comes from a fresh state,
    which holds the same arrays.
    """
    if config is not None:
        config.validate()
        ms, ks = config.hidden, config.limit
    seed = config.seed if config is not None else 0
    rows = []
    for m in ms:
        per_update = time_per_update(m, n, timing_updates, seed)
        for k in ks:
            state = olp_init(m, n)
            streamed = m * m * k <= stream_budget
            if streamed:
                rng = Prng(seed + k)
                for start in range(0, k, BLOCK):
                    size = min(BLOCK, k - start)
                    olp_update_block(state, rng.uniform_array(0.0, 1.0, (size, m)), rng.uniform_array(0.0, 1.0, (size, n)))
            rows.append(BenchRow(m, n, k, state.footprint, m * k, streamed, per_update))
    if config is not None and config.out:
        _write_csv(
            config.out,
            ["m", "n", "k", "olp_reals", "batch_reals", "streamed", "sec_per_update"],
            ([r.m, r.n, r.k, r.olp_reals, r.batch_reals, int(r.streamed), f"{r.sec_per_update:.6g}"] for r in rows),
        )
    return rows
