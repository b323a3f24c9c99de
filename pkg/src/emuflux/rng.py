"""Deterministic, portable random-number plumbing.

All randomness in the package flows through counter-based Philox generators
keyed by 64-bit seeds, so results are bit-identical across platforms and
parallelism degrees. Named substreams (member init, epoch shuffles,
per-sample simulator noise) get independent keys through a splitmix64 chain,
which is documented here and recorded in checkpoints so a reader can rebuild
any stream from the manifest alone.
"""

import numpy as np

# Identifier stored in checkpoint manifests.
RNG_ALGORITHM = "numpy-philox4x64"
SEED_DERIVATION = "splitmix64-chain-v1"

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One splitmix64 output step (Steele, Lea & Flood 2014)."""
    x = (x + _GAMMA) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(base_seed: int, *indices: int) -> int:
    """Fold integer indices into a base seed, one splitmix64 step each.

    derive_seed(s) == s; derive_seed(s, a, b) != derive_seed(s, b, a) in
    general, which is what keeps substreams independent.
    """
    state = base_seed & _MASK64
    for ix in indices:
        state = splitmix64(state ^ (ix & _MASK64))
    return state


def make_generator(seed: int) -> np.random.Generator:
    """Philox generator keyed directly by a 64-bit seed (no SeedSequence)."""
    return np.random.Generator(np.random.Philox(key=seed & _MASK64))
