"""Counter-based random streams for reproducible parallel ensembles.

Every stochastic object in the package is drawn from a Philox generator
keyed by (global seed, purpose tag) with the 256-bit counter block holding
(realization index, block index). Distinct paths therefore own disjoint
counter ranges and the same path always reproduces the same stream,
bit for bit, regardless of execution order or batching.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

# Purpose tags keep streams for different consumers disjoint even when
# (seed, realization, block) coincide.
PURPOSE_BLOCK = 1      # paraxial medium blocks
PURPOSE_SCREEN = 2     # Ito Brownian screens
PURPOSE_SYNTH = 3      # generic synthetic-data streams (tests, calibration)


class SeedPath(NamedTuple):
    """Addressing triple for one stochastic object."""

    seed: int
    realization: int = 0
    block: int = 0


def generator(path: SeedPath, purpose: int) -> np.random.Generator:
    """Return the Philox generator owned by ``path`` under ``purpose``.

    The counter layout is [0, 0, realization, block]; a single stream may
    draw up to 2**128 values before colliding with a neighbour, which is
    unreachable in practice.
    """
    seed, realization, block = path
    if seed < 0 or realization < 0 or block < 0:
        raise ValueError("seed path components must be nonnegative")
    key = np.array([seed, purpose], dtype=np.uint64)
    counter = np.array([0, 0, realization, block], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def complex_standard_normal(gen: np.random.Generator, shape) -> np.ndarray:
    """Circular complex Gaussian with E|z|^2 = 1 and E[z^2] = 0.

    Real and imaginary parts are drawn in one call so the stream layout
    is fixed.
    """
    parts = gen.standard_normal(size=(2,) + tuple(shape))
    return (parts[0] + 1j * parts[1]) / np.sqrt(2.0)
