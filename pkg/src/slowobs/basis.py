"""Zero-magnetization sector of an L-site spin-1/2 chain.

Configurations are L-bit words (bit set = spin up), site 1 is the least
significant bit.  The sector contains the C(L, L/2) balanced words,
ordered by ascending word value.  Rank/unrank use the combinatorial
number system so index lookups cost O(L) and no hashing is needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

# Hard cap on the enumerated dimension; beyond this the config table alone
# would not fit in desk-scale memory.
MAX_DIM = 200_000_000


class SectorError(ValueError):
    """Sector is undefined for the requested parameters."""


class CapacityError(ValueError):
    """Requested dimension exceeds the configured capacity."""


@dataclass(frozen=True)
class SectorBasis:
    """Enumerated zero-magnetization configurations with index maps."""

    L: int
    configs: np.ndarray  # uint64 words, ascending

    def __post_init__(self):
        object.__setattr__(self, "dim", len(self.configs))

    dim: int = field(init=False)

    def index_of(self, config: int) -> int:
        """Rank of a balanced L-bit word within the ordered sector."""
        return _rank(int(config), self.L)

    def flip_all(self, config: int) -> int:
        return flip_all(int(config), self.L)

    def flip_permutation(self) -> np.ndarray:
        """Index permutation induced by flipping every spin."""
        mask = (1 << self.L) - 1
        flipped = np.bitwise_xor(self.configs, np.uint64(mask))
        return np.array([_rank(int(c), self.L) for c in flipped], dtype=np.int64)

    def spins(self) -> np.ndarray:
        """(dim, L) array of z-projections in {+1, -1}, site 1 first."""
        sites = np.arange(self.L, dtype=np.uint64)
        bits = (self.configs[:, None] >> sites[None, :]) & np.uint64(1)
        return 2.0 * bits.astype(np.float64) - 1.0


def build_basis(L: int) -> SectorBasis:
    """Enumerate the zero-magnetization sector of an even-L chain."""
    if L < 2 or L % 2 != 0:
        raise SectorError(f"zero-magnetization sector needs even L >= 2, got {L}")
    D = comb(L, L // 2)
    if D > MAX_DIM:
        raise CapacityError(f"sector dimension {D} exceeds capacity {MAX_DIM}")
    configs = np.empty(D, dtype=np.uint64)
    c = (1 << (L // 2)) - 1  # smallest balanced word
    for i in range(D):
        configs[i] = c
        c = _next_same_popcount(c)
    return SectorBasis(L=L, configs=configs)


def flip_all(config: int, L: int) -> int:
    """Complement all L bits; maps the sector onto itself."""
    return config ^ ((1 << L) - 1)


def _next_same_popcount(x: int) -> int:
    # Gosper's hack: next larger integer with the same population count.
    lowest = x & -x
    ripple = x + lowest
    ones = ((x ^ ripple) >> 2) // lowest
    return ripple | ones


def _rank(config: int, L: int) -> int:
    """Position of a balanced word in the ascending sector ordering.

    Combinatorial ranking: counts balanced words smaller than `config` by
    walking bits from the most significant end.
    """
    n_up = L // 2
    if config.bit_count() != n_up:
        raise SectorError(f"word {config:#x} is not in the L={L} sector")
    rank = 0
    remaining = n_up
    for pos in range(L - 1, -1, -1):
        if remaining == 0:
            break
        if (config >> pos) & 1:
            # All words with a 0 here and the remaining ups in lower bits
            # come first.
            rank += comb(pos, remaining)
            remaining -= 1
    return rank


def unrank(i: int, L: int) -> int:
    """Inverse of `_rank`: i-th balanced word in ascending order."""
    D = comb(L, L // 2)
    if not 0 <= i < D:
        raise IndexError(f"index {i} out of range for dimension {D}")
    config = 0
    remaining = L // 2
    for pos in range(L - 1, -1, -1):
        if remaining == 0:
            break
        below = comb(pos, remaining)
        if i >= below:
            config |= 1 << pos
            i -= below
            remaining -= 1
    return config
