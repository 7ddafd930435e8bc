"""Dual-head statistical context model.

Given a partially masked token grid, produce for every masked position
and channel (a) a 3-component Gaussian mixture for conditional entropy
coding and (b) an integer value prediction for loss concealment.  The
first component summarizes the known neighborhood inside a fixed window
(inverse-distance weighting); the remaining components fall back to a
global per-channel prior shipped in the model file, so encoder and
decoder reproduce identical distributions with zero side information.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve

from .context_modes import ContextMode
from .density import SIGMA_FLOOR
from .partition import SlicePlan
from .token_codec import TokenGrid

MODEL_MAGIC = b"RCPM"
MODEL_VERSION = 1
DEFAULT_WINDOW = 11
DEFAULT_LOGITS = (3.0, 0.0, 0.0)
MIXTURES = 3


class SynchronizationError(Exception):
    """A required context packet is missing; the slice is undecodable."""

    def __init__(self, slice_index, missing_context):
        self.slice_index = slice_index
        self.missing_context = missing_context
        super().__init__(
            f"slice {slice_index} needs context slice {missing_context}"
        )


@dataclass(frozen=True)
class PriorModel:
    """Global per-channel fallback distribution plus fixed predictor knobs."""

    means: np.ndarray  # (C,)
    stds: np.ndarray  # (C,)
    window: int = DEFAULT_WINDOW
    logits: tuple = DEFAULT_LOGITS

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64)
        stds = np.asarray(self.stds, dtype=np.float64)
        if means.shape != stds.shape or means.ndim != 1:
            raise ValueError("means and stds must be matching 1-D arrays")
        if np.any(stds < SIGMA_FLOOR):
            raise ValueError(f"prior stds must be >= {SIGMA_FLOOR}")
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError("window must be odd and positive")
        if len(self.logits) != MIXTURES:
            raise ValueError(f"need {MIXTURES} logits")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)
        object.__setattr__(self, "logits", tuple(float(x) for x in self.logits))

    @property
    def channels(self):
        return len(self.means)


def default_prior(channels: int, clamp: int = 127) -> PriorModel:
    """Uninformed prior: zero mean, wide first channel, narrowing tail."""
    z = np.arange(channels)
    stds = np.maximum(SIGMA_FLOOR, clamp / 2.0 / (1.0 + z))
    return PriorModel(means=np.zeros(channels), stds=stds)


def fit_prior(grids, window: int = DEFAULT_WINDOW,
              logits=DEFAULT_LOGITS) -> PriorModel:
    """Fit per-channel mean/std over a corpus of fully known TokenGrids."""
    stacked = np.concatenate(
        [g.values.reshape(-1, g.channels).astype(np.float64) for g in grids]
    )
    means = stacked.mean(axis=0)
    stds = np.maximum(SIGMA_FLOOR, stacked.std(axis=0))
    return PriorModel(means=means, stds=stds, window=window, logits=logits)


def save_prior(path, prior: PriorModel):
    with open(path, "wb") as f:
        f.write(MODEL_MAGIC)
        f.write(struct.pack("<BHHB", MODEL_VERSION, prior.channels,
                            prior.window, MIXTURES))
        f.write(struct.pack(f"<{MIXTURES}d", *prior.logits))
        f.write(struct.pack(f"<{prior.channels}d", *prior.means))
        f.write(struct.pack(f"<{prior.channels}d", *prior.stds))


def load_prior(path) -> PriorModel:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MODEL_MAGIC:
            raise ValueError(f"bad model magic {magic!r}")
        version, channels, window, k = struct.unpack("<BHHB", f.read(6))
        if version != MODEL_VERSION:
            raise ValueError(f"unsupported model version {version}")
        if k != MIXTURES:
            raise ValueError(f"unsupported mixture count {k}")
        logits = struct.unpack(f"<{k}d", f.read(8 * k))
        means = np.array(struct.unpack(f"<{channels}d", f.read(8 * channels)))
        stds = np.array(struct.unpack(f"<{channels}d", f.read(8 * channels)))
    return PriorModel(means=means, stds=stds, window=window, logits=logits)


@dataclass
class PredictorOutput:
    """Mixture parameters and value predictions for the masked positions.

    Arrays cover the full grid for convenience; `mask` marks the
    positions (h, w) the output is defined on, i.e. the masked ones.
    """

    mask: np.ndarray  # (h, w) bool, True where predictions apply
    weights: np.ndarray  # (h, w, C, K)
    means: np.ndarray  # (h, w, C, K)
    sigmas: np.ndarray  # (h, w, C, K)
    values: np.ndarray  # (h, w, C) int16


def collect_context(index: int, mode: ContextMode, flags, plan: SlicePlan,
                    grid: TokenGrid) -> TokenGrid:
    """Masked grid containing exactly slice `index`'s context slices.

    flags[j-1] truthy means packet j is available.  Raises
    SynchronizationError when a required context packet is missing.
    """
    ctx = TokenGrid(np.zeros_like(grid.values), np.zeros((grid.h, grid.w), bool))
    for j in mode.contexts_of(index):
        if not flags[j - 1]:
            raise SynchronizationError(index, j)
        for r, c in plan.slice_positions(j):
            ctx.values[r, c] = grid.values[r, c]
            ctx.known[r, c] = True
    return ctx


def _window_kernel(window: int) -> np.ndarray:
    radius = window // 2
    dy, dx = np.mgrid[-radius:radius + 1, -radius:radius + 1]
    dist = np.sqrt(dy * dy + dx * dx)
    kernel = np.zeros_like(dist)
    nonzero = dist > 0
    kernel[nonzero] = 1.0 / dist[nonzero]
    return kernel


def _softmax(logits):
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def predict(grid: TokenGrid, prior: PriorModel) -> PredictorOutput:
    """Density head and concealment head in one pass.

    The dominant component is the inverse-distance-weighted local
    estimate where any window neighbor is known; elsewhere all
    components collapse to the prior.  The value head is the rounded
    mean of the dominant component, so both heads agree by construction.
    """
    h, w, channels = grid.values.shape
    if prior.channels != channels:
        raise ValueError("prior channel count does not match grid")
    kernel = _window_kernel(prior.window)
    known = grid.known.astype(np.float64)
    sum_w = convolve(known, kernel, mode="constant", cval=0.0)
    has_neighbors = sum_w > 0.0
    vals = grid.values.astype(np.float64) * known[:, :, None]
    safe_w = np.where(has_neighbors, sum_w, 1.0)[:, :, None]
    kernel3 = kernel[:, :, None]
    sv = convolve(vals, kernel3, mode="constant", cval=0.0)
    sv2 = convolve(vals * vals, kernel3, mode="constant", cval=0.0)
    local_mean = sv / safe_w
    local_var = np.maximum(sv2 / safe_w - local_mean * local_mean, 0.0)
    local_sigma = np.maximum(SIGMA_FLOOR, np.sqrt(local_var))

    prior_mean = np.broadcast_to(prior.means, (h, w, channels))
    prior_std = np.broadcast_to(prior.stds, (h, w, channels))
    neighbor_sel = has_neighbors[:, :, None]
    mean1 = np.where(neighbor_sel, local_mean, prior_mean)
    sigma1 = np.where(neighbor_sel, local_sigma, prior_std)

    means = np.stack([mean1, prior_mean, prior_mean], axis=-1)
    sigmas = np.stack([sigma1, prior_std, prior_std], axis=-1)
    ctx_weights = _softmax(prior.logits)
    uniform = np.full(MIXTURES, 1.0 / MIXTURES)
    weights = np.where(
        neighbor_sel[..., None],
        ctx_weights.reshape(1, 1, 1, MIXTURES),
        uniform.reshape(1, 1, 1, MIXTURES),
    )
    weights = np.broadcast_to(weights, means.shape).copy()
    values = np.rint(mean1).astype(np.int16)
    return PredictorOutput(
        mask=~grid.known,
        weights=np.ascontiguousarray(weights),
        means=means,
        sigmas=sigmas,
        values=values,
    )


def conceal(grid: TokenGrid, output: PredictorOutput) -> TokenGrid:
    """Fill masked positions with predicted values; pass the rest through."""
    if not np.array_equal(output.mask, ~grid.known):
        raise ValueError("output does not cover exactly the masked positions")
    filled = np.where(grid.known[:, :, None], grid.values, output.values)
    return TokenGrid(
        values=filled.astype(np.int16),
        known=np.ones_like(grid.known),
        clamp_count=grid.clamp_count,
    )
