"""Shared fixtures for the test suite."""

import numpy as np

from multivaw.hierarchy import HierarchySpec


def two_level_tree() -> HierarchySpec:
    """Eight nodes, five leaves: a root whose children aggregate 3 and 2 leaves."""
    return HierarchySpec(
        nodes=["total", "left", "right", "l1", "l2", "l3", "r1", "r2"],
        edges=[
            ["total", "left"],
            ["total", "right"],
            ["left", "l1"],
            ["left", "l2"],
            ["left", "l3"],
            ["right", "r1"],
            ["right", "r2"],
        ],
    )


TWO_LEVEL_S = np.array(
    [
        [1.0, 1.0, 1.0, 1.0, 1.0],
        [1.0, 1.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0, 1.0],
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 1.0],
    ]
)


def random_spd(rng, d, shift=1.0):
    M = rng.standard_normal((d, d))
    return M.T @ M + shift * np.eye(d)
