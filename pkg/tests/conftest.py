import os
from pathlib import Path

import numpy as np
import pytest

from olpnet.datasets import load_mnist

MNIST_DIR = Path(os.environ.get("OLP_MNIST_DIR", Path(__file__).resolve().parents[1] / "data" / "mnist"))
MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


def mnist_paths() -> dict[str, Path]:
    return {k: MNIST_DIR / v for k, v in MNIST_FILES.items()}


@pytest.fixture(scope="session")
def mnist():
    paths = mnist_paths()
    if not all(p.is_file() for p in paths.values()):
        pytest.skip(f"MNIST IDX files not found in {MNIST_DIR} (set OLP_MNIST_DIR)")
    train = load_mnist(paths["train_images"], paths["train_labels"])
    test = load_mnist(paths["test_images"], paths["test_labels"])
    return train, test


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


CRITERIA: dict[int, tuple[str, str]] = {}


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion(number, passed, detail)."""

    def record(number: int, passed: bool, detail: str) -> bool:
        CRITERIA[number] = ("PASS" if passed else "FAIL", detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        status, detail = CRITERIA[number]
        terminalreporter.write_line(f"[{status}] criterion {number}: {detail}")
