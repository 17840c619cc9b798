from __future__ import annotations

import numpy as np
import pytest

from fraudsift import BipartiteGraph, RatingScale


@pytest.fixture
def make_graph():
    """Factory for random attribute-complete graphs used across suites."""

    def build(n_users=50, n_objects=40, n_events=400, seed=0,
              timestamps=True, ratings=True, scale=None):
        rng = np.random.default_rng(seed)
        us = rng.integers(0, n_users, n_events)
        vs = rng.integers(0, n_objects, n_events)
        ts = rng.integers(0, 100_000, n_events) if timestamps else None
        rats = None
        if ratings:
            scale = scale or RatingScale.from_range(1, 5, 1)
            rats = rng.choice(np.asarray(scale.values), n_events)
        return BipartiteGraph(
            [f"u{i}" for i in range(n_users)],
            [f"o{j}" for j in range(n_objects)],
            us, vs, ts, rats, scale=scale if ratings else None)

    return build
