import itertools
import sys

import numpy as np
import pytest

from texhop import HopSpec, Image, TrainConfig, train


def pytest_terminal_summary(terminalreporter):
    """Print the acceptance-criteria tally once the run (and capture) ends."""
    mod = sys.modules.get("test_acceptance")
    if mod is not None and getattr(mod, "VERDICTS", None):
        terminalreporter.section("acceptance criteria")
        for line in mod.VERDICTS:
            terminalreporter.write_line(line)


def enumerate_best_path(E):
    """Exhaustive seam oracle: minimal-cost monotone path, lexicographically smallest.

    Enumerates every column trajectory whose steps stay within {-1, 0, +1},
    so it is independent of the dynamic program it is used to check.
    """
    h, w = E.shape
    if h == 1:
        j = int(np.argmin(E[0]))
        return np.array([j], dtype=np.int64), float(E[0, j])
    moves = np.array(list(itertools.product((-1, 0, 1), repeat=h - 1)))
    steps = np.concatenate([np.zeros((len(moves), 1), dtype=int), np.cumsum(moves, axis=1)], axis=1)
    pos = (np.arange(w)[:, None, None] + steps[None]).reshape(-1, h)
    pos = pos[((pos >= 0) & (pos < w)).all(axis=1)]
    costs = E[np.arange(h)[None, :], pos].sum(axis=1)
    minimal = pos[costs == costs.min()]
    order = np.lexsort(minimal.T[::-1])  # lexicographic by column 0 first
    return minimal[order[0]].astype(np.int64), float(costs.min())


def make_texture(height, width, seed=0, channels=3, noise=6.0):
    """Deterministic synthetic texture: crossed sinusoids plus seeded noise."""
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:height, 0:width]
    base = (
        128.0
        + 55.0 * np.sin(2 * np.pi * x / 16) * np.cos(2 * np.pi * y / 12)
        + 25.0 * np.sin(2 * np.pi * (x + y) / 24)
    )
    if channels == 3:
        arr = np.stack([base, np.roll(base, 3, axis=0), np.roll(base, 5, axis=1)], axis=-1)
    else:
        arr = base[:, :, None]
    arr = arr + rng.normal(0.0, noise, arr.shape)
    return Image(np.clip(arr, 0, 255).astype(np.uint8))


LEAN_CONFIG = TrainConfig(
    patch_size=32,
    patch_stride=8,
    hops=(HopSpec(channels=8), HopSpec(channels=20)),
    n_clusters=5,
    codebook_size=25,
    seed=13,
)


@pytest.fixture(scope="session")
def exemplar96():
    return make_texture(96, 96, seed=1)


@pytest.fixture(scope="session")
def lean_config():
    return LEAN_CONFIG


@pytest.fixture(scope="session")
def small_model(exemplar96, lean_config):
    return train(exemplar96, lean_config)
