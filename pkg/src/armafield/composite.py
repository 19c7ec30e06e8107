"""Synthetic multi-texture test images with block-level ground truth."""

from __future__ import annotations

import numpy as np

from armafield.core import ArmaParams, ModelOrder
from armafield.synthesis import SynthesisConfig, synthesize

WHITE = (ModelOrder(0, 0, 0, 0, 1, 1), ArmaParams())
SEPARABLE_AR = (
    ModelOrder(1, 1, 0, 0),
    ArmaParams(a={(1, 0): -0.5, (0, 1): -0.5, (1, 1): 0.25}),
)
SEPARABLE_ARMA = (
    ModelOrder(1, 1, 1, 1),
    ArmaParams(
        a={(1, 0): -0.5, (0, 1): -0.4, (1, 1): 0.2},
        b={(1, 0): 0.3, (0, 1): 0.3, (1, 1): 0.09},
    ),
)
REFERENCE_TEXTURES = (WHITE, SEPARABLE_AR, SEPARABLE_ARMA)


def texture_seeds(seed: int, count: int):
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count, dtype=np.uint64)]


def make_composite(size: int = 256, block_size: int = 16, seed: int = 0, textures=REFERENCE_TEXTURES,
                   burn_in: int = 64):
    """Vertical bands of independently synthesized textures.

    Band edges fall on block boundaries (block columns are split as evenly as
    possible, leftmost bands widest). Returns ``(field, truth)`` where
    ``truth`` is the ``(size // block_size, size // block_size)`` grid of
    texture indices.
    """
    n_blocks = size // block_size
    if n_blocks < len(textures):
        raise ValueError(f"{n_blocks} block columns cannot hold {len(textures)} bands")
    bands = np.array_split(np.arange(n_blocks), len(textures))
    field = np.zeros((size, size))
    truth = np.zeros((n_blocks, n_blocks), dtype=np.int64)
    for label, ((order, params), band, s) in enumerate(zip(textures, bands, texture_seeds(seed, len(textures)))):
        tex = synthesize(SynthesisConfig(order, params, size, size, burn_in, s))
        c0 = band[0] * block_size
        c1 = size if label == len(textures) - 1 else (band[-1] + 1) * block_size
        field[:, c0:c1] = tex[:, c0:c1]
        truth[:, band] = label
    return field, truth
