from pathlib import Path

import numpy as np
import pytest


def central_diff(fn, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Numerical gradient of scalar ``fn()`` w.r.t. the array ``x`` (mutated in place, restored)."""
    flat = x.reshape(-1)
    out = np.empty(flat.size)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = fn()
        flat[i] = orig - h
        down = fn()
        flat[i] = orig
        out[i] = (up - down) / (2 * h)
    return out.reshape(x.shape)


def rel_err(a, b, floor=1e-6):
    a, b = np.asarray(a), np.asarray(b)
    return float((np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)).max(initial=0.0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


SYNTHETIC = Path(__file__).resolve().parents[1] / "src" / "grgcn" / "data" / "synthetic"


@pytest.fixture(scope="session")
def synthetic():
    from grgcn.dataset import load_dataset
    from grgcn.kb import load_triples

    return load_triples(SYNTHETIC / "kb.tsv"), load_dataset(SYNTHETIC / "dataset.txt")
