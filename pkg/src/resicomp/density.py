"""Discretized Gaussian-mixture densities over the token alphabet.

Probability models are evaluated by integrating each mixture component
over unit-width bins centered on the integer symbols, with out-of-range
tail mass folded into the boundary symbols.  The normal CDF uses a
pinned rational approximation so encoder and decoder build identical
integer frequency tables regardless of libm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIGMA_FLOOR = 0.11
FREQ_TOTAL = 1 << 16

# Abramowitz & Stegun 7.1.26 erf approximation, |error| < 1.5e-7.
# Constants and evaluation order are fixed: Horner over t = 1/(1 + p*x).
_AS_P = 0.3275911
_AS_A1 = 0.254829592
_AS_A2 = -0.284496736
_AS_A3 = 1.421413741
_AS_A4 = -1.453152027
_AS_A5 = 1.061405429
_SQRT1_2 = 0.7071067811865476


def _erf_approx(x):
    x = np.asarray(x, dtype=np.float64)
    sign = np.where(x < 0.0, -1.0, 1.0)
    ax = np.abs(x)
    t = 1.0 / (1.0 + _AS_P * ax)
    poly = ((((_AS_A5 * t + _AS_A4) * t + _AS_A3) * t + _AS_A2) * t + _AS_A1) * t
    y = 1.0 - poly * np.exp(-ax * ax)
    return sign * y


def normal_cdf(x):
    """Standard normal CDF via the pinned erf approximation."""
    return 0.5 * (1.0 + _erf_approx(np.asarray(x, dtype=np.float64) * _SQRT1_2))


@dataclass(frozen=True)
class GmmParams:
    """Parameters of a K-component scalar Gaussian mixture."""

    weights: tuple
    means: tuple
    sigmas: tuple

    def __post_init__(self):
        if not (len(self.weights) == len(self.means) == len(self.sigmas)):
            raise ValueError("weights, means, sigmas must have equal length")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError("mixture weights must sum to 1")
        if any(w < 0.0 for w in self.weights):
            raise ValueError("mixture weights must be nonnegative")
        if any(s < SIGMA_FLOOR for s in self.sigmas):
            raise ValueError(f"sigmas must be >= {SIGMA_FLOOR}")

    @property
    def k(self):
        return len(self.weights)


@dataclass(frozen=True)
class Pmf:
    """Probability mass function over consecutive integers [lo, lo+n)."""

    lo: int
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if np.any(p < 0.0):
            raise ValueError("probabilities must be nonnegative")
        if abs(float(p.sum()) - 1.0) > 1e-9:
            raise ValueError("probabilities must sum to 1")
        object.__setattr__(self, "probs", p)

    @property
    def hi(self):
        return self.lo + len(self.probs) - 1

    def prob(self, symbol):
        return float(self.probs[symbol - self.lo])


@dataclass(frozen=True)
class FreqTable:
    """Integer frequencies summing to FREQ_TOTAL, each count >= 1."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if np.any(c < 1):
            raise ValueError("every count must be >= 1")
        if int(c.sum()) != FREQ_TOTAL:
            raise ValueError(f"counts must sum to {FREQ_TOTAL}")
        object.__setattr__(self, "counts", c)
        object.__setattr__(self, "_cum", np.concatenate(([0], np.cumsum(c))))

    @classmethod
    def batch(cls, counts):
        """Build one table per row of an (N, S) count matrix.

        Equivalent to [FreqTable(c) for c in counts] but validates and
        accumulates all rows in single array passes.
        """
        counts = np.asarray(counts, dtype=np.int64)
        if np.any(counts < 1):
            raise ValueError("every count must be >= 1")
        if np.any(counts.sum(axis=1) != FREQ_TOTAL):
            raise ValueError(f"counts must sum to {FREQ_TOTAL}")
        n, s = counts.shape
        cums = np.zeros((n, s + 1), dtype=np.int64)
        np.cumsum(counts, axis=1, out=cums[:, 1:])
        tables = []
        for row, cum in zip(counts, cums):
            table = cls.__new__(cls)
            object.__setattr__(table, "counts", row)
            object.__setattr__(table, "_cum", cum)
            tables.append(table)
        return tables

    @property
    def total(self):
        return FREQ_TOTAL

    def low_high(self, index):
        return int(self._cum[index]), int(self._cum[index + 1])

    def find(self, value):
        """Index of the symbol whose cumulative span contains value."""
        return int(np.searchsorted(self._cum, value, side="right")) - 1


def discretize_batch(weights, means, sigmas, v):
    """Bin-integrated mixture probabilities for a batch of GMMs.

    weights/means/sigmas have shape (..., K); returns probabilities of
    shape (..., 2v+1) over symbols -v..v with tail mass folded into the
    boundary symbols.
    """
    weights = np.asarray(weights, dtype=np.float64)
    means = np.asarray(means, dtype=np.float64)
    sigmas = np.asarray(sigmas, dtype=np.float64)
    symbols = np.arange(-v, v + 1, dtype=np.float64)
    # Upper bin edges; the lowest edge is -inf and the highest +inf.
    edges = symbols + 0.5  # (S,)
    z = (edges[:, None] - means[..., None, :]) / sigmas[..., None, :]
    cdf = normal_cdf(z)  # (..., S, K)
    upper = np.concatenate([cdf[..., :-1, :], np.ones_like(cdf[..., :1, :])], axis=-2)
    lower = np.concatenate([np.zeros_like(cdf[..., :1, :]), cdf[..., :-1, :]], axis=-2)
    per_comp = upper - lower
    probs = np.einsum("...k,...sk->...s", weights, per_comp)
    np.clip(probs, 0.0, None, out=probs)
    totals = probs.sum(axis=-1, keepdims=True)
    probs /= totals
    return probs


def discretize(gmm: GmmParams, v: int) -> Pmf:
    """Pmf over -v..v obtained by integrating the mixture over unit bins."""
    probs = discretize_batch(
        np.array(gmm.weights), np.array(gmm.means), np.array(gmm.sigmas), v
    )
    return Pmf(lo=-v, probs=probs)


def quantize_probs(probs):
    """Largest-remainder quantization of probabilities to integer counts.

    Accepts shape (S,) or (N, S); returns int64 counts of the same shape
    summing to FREQ_TOTAL along the last axis, every count >= 1.  Ties
    are broken toward lower symbol indices, so the result is a pure
    function of the input floats.
    """
    p = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    n, s = p.shape
    if s > FREQ_TOTAL:
        raise ValueError("alphabet larger than frequency total")
    scaled = p * FREQ_TOTAL
    base = np.floor(scaled).astype(np.int64)
    counts = np.maximum(base, 1)
    remainder = scaled - base
    # Rank symbols by descending remainder, ties toward lower index.
    order = np.lexsort((np.broadcast_to(np.arange(s), (n, s)), -remainder), axis=1)
    rank = np.empty_like(order)
    np.put_along_axis(rank, order, np.broadcast_to(np.arange(s), (n, s)).copy(), axis=1)
    deficit = FREQ_TOTAL - counts.sum(axis=1)
    add = deficit > 0
    if np.any(add):
        counts[add] += rank[add] < deficit[add, None]
    excess = np.maximum(counts.sum(axis=1) - FREQ_TOTAL, 0)
    if np.any(excess > 0):
        # Remove surplus from shrinkable symbols, lowest remainder first.
        rev = order[:, ::-1]
        room = np.take_along_axis(counts, rev, axis=1) - 1
        cum = np.cumsum(room, axis=1)
        if np.any(cum[:, -1] < excess):
            raise ValueError("cannot satisfy count floor")
        take = np.clip(excess[:, None] - (cum - room), 0, room)
        np.put_along_axis(
            counts, rev, np.take_along_axis(counts, rev, axis=1) - take, axis=1
        )
    return counts if np.asarray(probs).ndim > 1 else counts[0]


def to_freq_table(pmf: Pmf) -> FreqTable:
    return FreqTable(counts=quantize_probs(pmf.probs))


def bits_of(pmf: Pmf, symbol: int) -> float:
    """Ideal code length -log2 p(symbol)."""
    p = pmf.prob(symbol)
    if p <= 0.0:
        return float("inf")
    return -float(np.log2(p))


def entropy_bits(probs):
    """Shannon entropy in bits of a probability vector (0 log 0 := 0)."""
    p = np.asarray(probs, dtype=np.float64)
    nz = p > 0.0
    return float(-(p[nz] * np.log2(p[nz])).sum())
