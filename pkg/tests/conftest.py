from pathlib import Path

import numpy as np
import pytest

from mixed_gfmm import CategoryCounter, Column, FeatureSchema, HyperParams, MixedPattern

ROOT = Path(__file__).resolve().parents[1]
DATASETS = ROOT / "datasets"
DATA = Path(__file__).resolve().parent / "data"


def make_schema(n, r):
    cols = [Column(f"x{j}", "continuous") for j in range(n)]
    cols += [Column(f"c{j}", "categorical") for j in range(r)]
    cols.append(Column("y", "class"))
    return FeatureSchema(tuple(cols))


def random_counter(rng, max_total=50, max_alphabet=10):
    alphabet = [f"v{k}" for k in range(rng.integers(1, max_alphabet + 1))]
    total = int(rng.integers(1, max_total + 1))
    return CategoryCounter(rng.choice(alphabet, size=total).tolist()), alphabet


def random_stream(rng, n, r, size, n_classes=3, n_values=4, intervals=False):
    """Random labeled patterns in the unit cube; a few categorical values per attribute."""
    out = []
    for _ in range(size):
        lo = rng.random(n)
        hi = lo + (rng.random(n) * 0.1 if intervals else 0.0)
        hi = np.minimum(hi, 1.0)
        cats = tuple(f"a{rng.integers(n_values)}" for _ in range(r))
        out.append(MixedPattern(lo, hi, cats, f"k{rng.integers(n_classes)}"))
    return out


def random_params(rng, n, r, variant=None):
    return HyperParams(
        theta=float(rng.choice([0.1, 0.3, 0.5, 1.0])),
        delta=float(rng.choice([0.1, 0.3, 0.7, 1.0])),
        alpha=float(rng.uniform(0.05, 1.0)) if n and r else (1.0 if r == 0 else 0.0),
        gamma=1.0,
        variant=variant or str(rng.choice(["v1", "v2"])),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def apple_counter():
    return CategoryCounter(apple=5, orange=1)
