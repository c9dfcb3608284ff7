"""Weighted squared distances and distance-rank matrices.

Squared distances are the canonical representation throughout the package:
they are monotone in the Euclidean distance, so ranks are unchanged, and the
softmax coefficients of the DII are written in terms of them directly.

Pairs of frames closer in time than an exclusion half-width are *masked*:
they never enter a rank list. The diagonal is always masked.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InputError, TooFewAdmissiblePairs


@dataclass(frozen=True)
class DistanceSpec:
    weights: np.ndarray
    exclusion_half_width: int = 0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1:
            raise DimensionMismatch("weights must be a 1-D vector")
        if self.exclusion_half_width < 0:
            raise InputError("exclusion_half_width must be >= 0")
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class RankMatrix:
    """Per-row distance ranks; ``ranks[i, j] == 0`` wherever ``mask[i, j]`` is False."""

    ranks: np.ndarray
    mask: np.ndarray

    @property
    def n(self):
        return self.ranks.shape[0]

    @property
    def admissible_counts(self):
        return self.mask.sum(axis=1)


def exclusion_mask(n, half_width=0, times=None):
    """Boolean (n, n) matrix of admissible pairs.

    ``times`` gives the frame index of every point (defaults to ``0..n-1``);
    pairs with ``|t_i - t_j| <= half_width`` are inadmissible, as is the
    diagonal.
    """
    t = np.arange(n) if times is None else np.asarray(times)
    if t.shape != (n,):
        raise DimensionMismatch(f"times has shape {t.shape}, expected ({n},)")
    mask = np.abs(t[:, None] - t[None, :]) > half_width
    np.fill_diagonal(mask, False)
    return mask


def pairwise_sq_distances(points, spec):
    """Entry (i, j) is ``sum_k w_k**2 * (x_ik - x_jk)**2``."""
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DimensionMismatch("points must be an (N, D) matrix")
    if x.shape[0] < 3:
        raise InputError(f"need at least 3 points, got {x.shape[0]}")
    if spec.weights.shape[0] != x.shape[1]:
        raise DimensionMismatch(
            f"{spec.weights.shape[0]} weights for {x.shape[1]} columns"
        )
    d2 = np.zeros((x.shape[0], x.shape[0]))
    for k, wk in enumerate(spec.weights):
        diff = x[:, k, None] - x[None, :, k]
        d2 += (wk * wk) * (diff * diff)
    return d2


def rank_matrix(sq_distances, exclusion_half_width=0, mask=None):
    """Rank every admissible column of each row by ascending distance.

    Ties are broken by ascending column index. If ``mask`` is given it is
    used as is (and ``exclusion_half_width`` ignored).
    """
    d2 = np.asarray(sq_distances, dtype=float)
    n = d2.shape[0]
    if d2.ndim != 2 or d2.shape[1] != n:
        raise DimensionMismatch("distance matrix must be square")
    if mask is None:
        mask = exclusion_mask(n, exclusion_half_width)
    else:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != d2.shape:
            raise DimensionMismatch("mask shape does not match distances")
    counts = mask.sum(axis=1)
    if np.any(counts < 2):
        row = int(np.argmax(counts < 2))
        raise TooFewAdmissiblePairs(
            f"row {row} has {int(counts[row])} admissible pairs (need >= 2)"
        )
    keyed = np.where(mask, d2, np.inf)
    order = np.argsort(keyed, axis=1, kind="stable")
    ranks = np.empty((n, n), dtype=np.int64)
    rows = np.arange(n)[:, None]
    ranks[rows, order] = np.arange(1, n + 1)[None, :]
    ranks[~mask] = 0
    return RankMatrix(ranks=ranks, mask=mask)


def target_ranks(target, exclusion_half_width=0, times=None):
    """Rank matrix of a (possibly multi-column) target in plain Euclidean distance."""
    z = np.asarray(target, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    d2 = pairwise_sq_distances(z, DistanceSpec(np.ones(z.shape[1])))
    mask = exclusion_mask(z.shape[0], exclusion_half_width, times)
    return rank_matrix(d2, mask=mask)
