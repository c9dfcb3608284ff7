"""Information Imbalance, its differentiable relaxation, and weight optimisation.

Normalisation under masking
---------------------------
With no masked pairs the imbalance carries the prefactor ``2 / N**2``. When a
temporal exclusion window removes pairs, row ``i`` is normalised by
``2 / (N * (n_i + 1))`` where ``n_i`` is its number of admissible partners.
This reduces exactly to ``2 / N**2`` without masking, keeps the perfect
prediction value at ``mean_i 2 / (n_i + 1)`` and the no-information value at 1.

The functions :func:`softmax_coefficients`, :func:`dii_value` and
:func:`dii_gradient` are dense numpy implementations intended for small
problems and testing. :func:`optimize_weights` and :func:`final_dii` run the
same mathematics through compiled kernels.
"""

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import _kernels
from .errors import (
    DegenerateScale,
    DimensionMismatch,
    InputError,
    InsufficientData,
    MaskMismatch,
    NonFiniteLoss,
)
from .neighbors import DistanceSpec, RankMatrix, pairwise_sq_distances, target_ranks

log = logging.getLogger(__name__)


class WeightInit(str, Enum):
    ONES = "ones"
    INVERSE_STD = "inverse_std"


@dataclass(frozen=True)
class DiiConfig:
    """Hyperparameters of a DII optimisation; defaults follow the published recipe."""

    lambda_prefactor: float = 0.1
    neighbor_fraction: float = 0.05
    epochs: int = 2000
    initial_learning_rate: float = 1e-3
    batch_size: int = 100
    batches_per_epoch: int = 28
    exclusion_half_width: int = 0
    seed: int = 0
    weight_init: WeightInit = WeightInit.ONES
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if not self.lambda_prefactor > 0:
            raise InputError("lambda_prefactor must be > 0")
        if not 0 < self.neighbor_fraction < 1:
            raise InputError("neighbor_fraction must lie in (0, 1)")
        if self.batch_size < 10:
            raise InputError("batch_size must be >= 10")
        if self.epochs < 1:
            raise InputError("epochs must be >= 1")
        if self.batches_per_epoch < 1:
            raise InputError("batches_per_epoch must be >= 1")
        if self.exclusion_half_width < 0:
            raise InputError("exclusion_half_width must be >= 0")
        object.__setattr__(self, "weight_init", WeightInit(self.weight_init))

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass
class DiiState:
    weights: np.ndarray
    first_moment: np.ndarray
    second_moment: np.ndarray
    epoch: int = 0
    loss_trace: list = field(default_factory=list)
    weight_trace: list = field(default_factory=list)

    @property
    def abs_weights(self):
        """Weights as reported: only ``w**2`` enters distances, so the sign is arbitrary."""
        return np.abs(self.weights)

    def write_trace_csv(self, path, names=None):
        """Write ``epoch, dii, w_...`` rows; epoch 0 is the initialisation."""
        d = len(self.weights)
        names = list(names) if names is not None else [f"w{a}" for a in range(d)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "dii", *names])
            losses = [float("nan"), *self.loss_trace]
            for epoch, (loss, w) in enumerate(zip(losses, self.weight_trace)):
                writer.writerow([epoch, repr(float(loss)), *(repr(float(v)) for v in w)])


@dataclass(frozen=True)
class SoftmaxCoefficients:
    c: np.ndarray
    lambdas: np.ndarray


def neighbor_order(fraction, count):
    """Rank of the neighbour that sets the adaptive scale, ``max(1, round(f * count))``."""
    return max(1, int(math.floor(fraction * count + 0.5)))


def _row_norms(mask):
    n = mask.shape[0]
    return 2.0 / (n * (mask.sum(axis=1) + 1.0))


def information_imbalance(source, target):
    """Standard (hard nearest-neighbour) imbalance from ``source`` to ``target``."""
    if source.ranks.shape != target.ranks.shape or not np.array_equal(
        source.mask, target.mask
    ):
        raise MaskMismatch("source and target rank matrices must share N and mask")
    nn = (source.ranks == 1) & source.mask
    per_row = np.where(nn, target.ranks, 0).sum(axis=1)
    # sum integer ranks per normalisation group, then divide once per group,
    # so an unmasked perfect prediction returns exactly 2/N
    n = source.ranks.shape[0]
    counts = source.mask.sum(axis=1)
    total = 0.0
    for c in np.unique(counts):
        s = int(per_row[counts == c].sum())
        total += (2 * s) / (n * (int(c) + 1))
    return total


def adaptive_lambdas(sq_distances, mask, prefactor, neighbor_fraction, k=None):
    """Per-row scale ``prefactor * d2`` of the k-th admissible neighbour.

    A zero k-th distance falls back to the smallest positive distance in the
    row; :class:`DegenerateScale` is raised if there is none.
    """
    counts = mask.sum(axis=1)
    if k is None:
        ks = np.array([neighbor_order(neighbor_fraction, c) for c in counts])
    else:
        ks = np.minimum(int(k), counts)
    srt = np.sort(np.where(mask, sq_distances, np.inf), axis=1)
    kth = srt[np.arange(len(ks)), ks - 1]
    if np.any(kth <= 0):
        smallest_pos = np.where(srt > 0, srt, np.inf).min(axis=1)
        bad = (kth <= 0) & ~np.isfinite(smallest_pos)
        if np.any(bad):
            raise DegenerateScale(
                f"row {int(np.argmax(bad))} has all admissible distances equal to zero"
            )
        kth = np.where(kth > 0, kth, smallest_pos)
    return prefactor * kth


def softmax_coefficients(sq_distances, mask, config, k=None, lambdas=None):
    d2 = np.asarray(sq_distances, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if lambdas is None:
        lambdas = adaptive_lambdas(
            d2, mask, config.lambda_prefactor, config.neighbor_fraction, k
        )
    lambdas = np.asarray(lambdas, dtype=float)
    keyed = np.where(mask, d2, np.inf)
    dmin = keyed.min(axis=1, keepdims=True)
    e = np.where(mask, np.exp(-(keyed - dmin) / lambdas[:, None]), 0.0)
    c = e / e.sum(axis=1, keepdims=True)
    return SoftmaxCoefficients(c=c, lambdas=lambdas)


def _check_points(points, ranks, weights):
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    w = np.asarray(weights, dtype=float)
    if x.shape[0] != ranks.n:
        raise DimensionMismatch(f"{x.shape[0]} points but {ranks.n}x{ranks.n} ranks")
    if w.shape != (x.shape[1],):
        raise DimensionMismatch(f"{w.shape[0]} weights for {x.shape[1]} columns")
    return x, w


def dii_value(points, target_ranks, weights, config, lambdas=None):
    """Differentiable imbalance of the weighted ``points`` towards the target ranks.

    ``lambdas`` freezes the per-row scales (used by finite-difference checks).
    """
    x, w = _check_points(points, target_ranks, weights)
    d2 = pairwise_sq_distances(x, DistanceSpec(w))
    coef = softmax_coefficients(d2, target_ranks.mask, config, lambdas=lambdas)
    per_row = np.sum(coef.c * target_ranks.ranks, axis=1)
    return float(np.sum(_row_norms(target_ranks.mask) * per_row))


def dii_gradient(points, target_ranks, weights, config):
    """Analytic gradient of :func:`dii_value` with the scales held fixed."""
    x, w = _check_points(points, target_ranks, weights)
    mask = target_ranks.mask
    d2 = pairwise_sq_distances(x, DistanceSpec(w))
    coef = softmax_coefficients(d2, mask, config)
    c, lam = coef.c, coef.lambdas
    sqdiff = (x[:, None, :] - x[None, :, :]) ** 2  # (N, N, D)
    dd = 2.0 * w[None, None, :] * sqdiff  # derivative of d2_ij wrt w_a
    mean_dd = np.einsum("ij,ija->ia", c, dd)
    dc = c[:, :, None] * (mean_dd[:, None, :] - dd) / lam[:, None, None]
    weighted = (_row_norms(mask)[:, None] * target_ranks.ranks)[:, :, None]
    return np.sum(weighted * dc, axis=(0, 1))


def _as_2d(a):
    a = np.asarray(a, dtype=float)
    return a[:, None] if a.ndim == 1 else a


def initial_weights(points, config):
    x = _as_2d(points)
    if config.weight_init is WeightInit.INVERSE_STD:
        sd = x.std(axis=0, ddof=1)
        if np.any(sd == 0):
            raise InputError("cannot initialise inverse-std weights on a constant column")
        return 1.0 / sd
    return np.ones(x.shape[1])


def cosine_learning_rate(config, epoch):
    return config.initial_learning_rate * 0.5 * (1.0 + math.cos(math.pi * epoch / config.epochs))


def optimize_weights(points, target, config, times=None, init=None):
    """Minimise the DII of ``points`` towards ``target`` by mini-batch Adam.

    Every epoch shuffles the frames (seeded) into disjoint batches of
    ``batch_size``; each batch recomputes target ranks, the admissibility
    mask and the adaptive scales before one Adam update. The learning rate
    follows a cosine decay over epochs.
    """
    x = np.ascontiguousarray(_as_2d(points))
    z = np.ascontiguousarray(_as_2d(target))
    n = x.shape[0]
    if z.shape[0] != n:
        raise DimensionMismatch(f"{n} points but {z.shape[0]} target rows")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
        raise InputError("points and target must be finite")
    bs = config.batch_size
    if n < 2 * bs:
        raise InsufficientData(f"need at least {2 * bs} frames, got {n}")
    n_batches = min(config.batches_per_epoch, n // bs)
    t = np.arange(n, dtype=np.int64) if times is None else np.asarray(times, dtype=np.int64)
    if t.shape != (n,):
        raise DimensionMismatch("times must have one entry per frame")
    k = neighbor_order(config.neighbor_fraction, bs)

    w = initial_weights(x, config) if init is None else np.array(init, dtype=float)
    if w.shape != (x.shape[1],):
        raise DimensionMismatch("initial weights do not match the number of columns")
    state = DiiState(
        weights=w,
        first_moment=np.zeros_like(w),
        second_moment=np.zeros_like(w),
        weight_trace=[np.abs(w).copy()],
    )
    rng = np.random.default_rng(config.seed)
    step = 0
    for epoch in range(config.epochs):
        perm = rng.permutation(n).astype(np.int64)
        loss, step, bad = _kernels.train_epoch(
            x, z, t, perm, n_batches, bs,
            state.weights, state.first_moment, state.second_moment, step,
            cosine_learning_rate(config, epoch),
            config.beta1, config.beta2, config.adam_eps,
            config.exclusion_half_width, k, config.lambda_prefactor,
        )
        if bad >= 0:
            raise DegenerateScale(f"epoch {epoch}: batch row {bad} has only zero distances")
        if not (math.isfinite(loss) and np.all(np.isfinite(state.weights))):
            raise NonFiniteLoss(epoch)
        state.loss_trace.append(float(loss))
        state.weight_trace.append(np.abs(state.weights).copy())
        state.epoch = epoch + 1
    return state


def final_dii(points, target, weights, config):
    """DII over all frames with the exclusion window, scales set per row.

    ``target`` may be a :class:`RankMatrix` (reused across calls) or raw
    target values.
    """
    x = np.ascontiguousarray(_as_2d(points))
    if not isinstance(target, RankMatrix):
        target = target_ranks(target, config.exclusion_half_width)
    x, w = _check_points(x, target, weights)
    counts = target.mask.sum(axis=1)
    kvec = np.array([neighbor_order(config.neighbor_fraction, c) for c in counts], dtype=np.int64)
    val, _, bad = _kernels.dii_rows(
        x, w, target.ranks, target.mask, kvec, config.lambda_prefactor, False
    )
    if bad >= 0:
        raise DegenerateScale(f"row {bad} has all admissible distances equal to zero")
    return float(val)
