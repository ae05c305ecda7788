"""Seeded index streams: cyclic, permuted, randomized, and weighted access.

The random orderings are driven by a fixed, versioned counter-based
generator so that an implementation in any language can reproduce the
exact index sequence from (seed, draw counter):

    rng-v1 (splitmix64): the t-th 64-bit draw (t = 0, 1, ...) is
        state = (seed + (t + 1) * 0x9E3779B97F4A7C15) mod 2^64
        z = state;  z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9  (mod 2^64)
        z ^= z >> 27;  z *= 0x94D049BB133111EB  (mod 2^64)
        output = z ^ (z >> 31)

    uniform double in [0, 1):  (output >> 11) * 2^-53
    integer below n:           (output * n) >> 64   (fixed-point multiply;
                               bias < n / 2^64, deliberate and documented)
    permutation:               Fisher-Yates from the back of the epoch
                               buffer using `integer below i+1` draws.

All indices emitted by `next_index` are 1-based.
"""

from __future__ import annotations

import numpy as np

RNG_VERSION = "rng-v1"

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

KINDS = ("cyclic", "permuted", "randomized", "weighted")


def splitmix64(state: int) -> int:
    z = state & _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


class CounterRng:
    """Counter-mode splitmix64; the t-th draw depends only on (seed, t)."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK
        self.t = 0

    def next_u64(self) -> int:
        self.t += 1
        return splitmix64((self.seed + self.t * _GOLDEN) & _MASK)

    def next_uniform(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def next_below(self, n: int) -> int:
        return (self.next_u64() * n) >> 64

    def shuffle(self, buf: list) -> None:
        for i in range(len(buf) - 1, 0, -1):
            j = self.next_below(i + 1)
            buf[i], buf[j] = buf[j], buf[i]


class Ordering:
    """One index stream for one solver run; do not share across runs.

    kind:
      cyclic      j = 1 + (k mod n) at global step k
      permuted    each epoch is an independent uniform permutation of 1..n
      randomized  i.i.d. uniform over 1..n
      weighted    i.i.d. with the given probabilities p_i
    """

    def __init__(self, kind: str, n: int, seed: int = 0, weights=None):
        if kind not in KINDS:
            raise ValueError(f"unknown ordering kind {kind!r}")
        if n < 1:
            raise ValueError("n must be >= 1")
        self.kind = kind
        self.n = int(n)
        self.seed = int(seed)
        self.k = 0
        self._rng = CounterRng(seed)
        self._buf: list = []
        if kind == "weighted":
            if weights is None:
                raise ValueError("weighted ordering needs probabilities")
            p = np.asarray(weights, dtype=float)
            if p.shape != (self.n,) or np.any(p <= 0):
                raise ValueError("weights must be n positive probabilities")
            p = p / p.sum()
            self._cum = np.cumsum(p)
            self._cum[-1] = 1.0
        else:
            self._cum = None

    def next_index(self) -> int:
        """Emit the next 1-based term index and advance the stream."""
        k = self.k
        self.k += 1
        if self.kind == "cyclic":
            return 1 + (k % self.n)
        if self.kind == "randomized":
            return 1 + self._rng.next_below(self.n)
        if self.kind == "weighted":
            u = self._rng.next_uniform()
            return 1 + int(np.searchsorted(self._cum, u, side="right"))
        if not self._buf:
            buf = list(range(1, self.n + 1))
            self._rng.shuffle(buf)
            self._buf = buf[::-1]  # pop from the end in permuted order
        return self._buf.pop()

    def epoch_indices(self) -> np.ndarray:
        """The next n indices as an array (consumes them from the stream)."""
        return np.array([self.next_index() for _ in range(self.n)], dtype=np.int64)


def weights_from_lipschitz(mu: float, n: int, lipschitz) -> np.ndarray:
    """Sampling weights p_i = c_i / sum(c), c_i = (mu n + L_i - mu) / mu.

    The normalizer sums to n (mu n + mean(L) - mu) / mu.
    """
    if mu <= 0:
        raise ValueError("weights need mu > 0")
    L_i = np.asarray(lipschitz, dtype=float)
    if L_i.shape != (n,):
        raise ValueError("need one Lipschitz constant per term")
    c = (mu * n + L_i - mu) / mu
    return c / c.sum()
