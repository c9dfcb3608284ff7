"""Imbalance Gain: does adding a candidate's present improve prediction of the target's future?

For target ``z`` and lag ``tau`` the predictor space at frame ``t`` is
``(z_t, x1_t, ..., xD_t)`` and the predicted space is ``z_{t+tau}``. The DII
is minimised over weights on the full predictor space and on the space with
candidate ``x_a`` removed (``z_t`` is always kept). With the minima measured
on all frames under the exclusion window,

    IG(x_a -> z) = 1 - DII_full / DII_reduced,

which is positive exactly when including ``x_a`` lowers the imbalance.
"""

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dii import DiiConfig, final_dii, optimize_weights
from .errors import InputError, SeriesTooShort
from .neighbors import target_ranks


@dataclass(frozen=True)
class IgConfig:
    target: str
    tau: int = 1
    dii_config: DiiConfig = field(default_factory=DiiConfig)
    null_permutations: int = 0
    null_seed: int = 0

    def __post_init__(self):
        if self.tau < 1:
            raise InputError("tau must be >= 1")
        if self.null_permutations < 0:
            raise InputError("null_permutations must be >= 0")


@dataclass
class VariableGain:
    ig: float
    dii_full: float
    dii_reduced: float
    optimal_weight_full: float
    null: list = None

    @property
    def null_q95(self):
        return None if not self.null else float(np.quantile(self.null, 0.95))


@dataclass
class IgResult:
    target: str
    tau: int
    predictor_names: tuple  # (target, *candidates), order of full_weights
    full_weights: np.ndarray
    dii_full: float
    per_variable: dict

    def to_records(self):
        out = []
        for name, g in self.per_variable.items():
            rec = {
                "variable": name,
                "ig": g.ig,
                "dii_full": g.dii_full,
                "dii_reduced": g.dii_reduced,
                "weight": g.optimal_weight_full,
            }
            if g.null is not None:
                rec["null_q95"] = g.null_q95
                rec["null"] = list(g.null)
            out.append(rec)
        return out

    def to_json(self, **kw):
        return json.dumps(
            {
                "target": self.target,
                "tau": self.tau,
                "target_weight": float(self.full_weights[0]),
                "candidates": self.to_records(),
            },
            **kw,
        )


def build_lagged_pair(panel, target, tau=1):
    """Predictor frames ``(z_t, x_t...)`` and the target's value ``tau`` steps later.

    Returns ``(predictors, future, names)`` with ``N = T - tau`` rows; the
    target is moved to column 0, the other variables keep panel order.
    """
    zi = panel.index(target)
    t = panel.shape[0]
    if tau < 1:
        raise InputError("tau must be >= 1")
    if t <= tau + 1:
        raise SeriesTooShort(f"need more than {tau + 1} rows for lag {tau}, got {t}")
    order = [zi] + [i for i in range(panel.shape[1]) if i != zi]
    v = panel.values
    predictors = v[: t - tau][:, order]
    future = v[tau:, zi][:, None]
    names = tuple(panel.names[i] for i in order)
    return np.ascontiguousarray(predictors), np.ascontiguousarray(future), names


# Worker-side cache of the full-frame target ranks, built once per process.
_TARGET = {}


def _init_target(future, half_width):
    _TARGET["ranks"] = target_ranks(future, half_width)
    _TARGET["future"] = future


def _fit_and_score(job):
    """Optimise weights on ``points`` and score them on all frames."""
    points, cfg = job
    state = optimize_weights(points, _TARGET["future"], cfg)
    dii = final_dii(points, _TARGET["ranks"], state.weights, cfg)
    return dii, state.abs_weights


class _Runner:
    """Runs independent optimisations serially or on a process pool.

    Results come back in submission order, so output does not depend on the
    number of workers.
    """

    def __init__(self, future, config, workers=1):
        self.future = future
        self.config = config
        self.workers = workers
        self._pool = None

    def __enter__(self):
        if self.workers > 1:
            self._pool = ProcessPoolExecutor(
                max_workers=self.workers,
                initializer=_init_target,
                initargs=(self.future, self.config.exclusion_half_width),
            )
        else:
            _init_target(self.future, self.config.exclusion_half_width)
        return self

    def __exit__(self, *exc):
        if self._pool is not None:
            self._pool.shutdown()
        _TARGET.clear()

    def map(self, point_sets):
        jobs = [(np.ascontiguousarray(p), self.config) for p in point_sets]
        if self._pool is None:
            return [_fit_and_score(j) for j in jobs]
        return list(self._pool.map(_fit_and_score, jobs))


def _shuffled(predictors, col, rng):
    out = predictors.copy()
    out[:, col] = predictors[rng.permutation(len(predictors)), col]
    return out


def _null_rng(config, col):
    return np.random.default_rng([config.null_seed, col])


def imbalance_gain(panel, config, candidates=None, workers=1):
    """Imbalance Gain of every candidate (default: all non-target variables).

    With ``config.null_permutations > 0`` each candidate also receives a
    permutation null: the candidate column is shuffled in time and only the
    full-space optimisation is redone (the reduced space does not contain
    the candidate).
    """
    predictors, future, names = build_lagged_pair(panel, config.target, config.tau)
    n = predictors.shape[0]
    cfg = config.dii_config
    if n < 2 * cfg.batch_size:
        raise SeriesTooShort(f"{n} lagged frames; need at least {2 * cfg.batch_size}")
    if candidates is None:
        candidates = names[1:]
    cols = []
    for c in candidates:
        if c == config.target:
            raise InputError("the target cannot be its own candidate")
        cols.append(names.index(c) if c in names else panel.index(c))

    point_sets = [predictors]
    point_sets += [np.delete(predictors, col, axis=1) for col in cols]
    b = config.null_permutations
    for col in cols:
        rng = _null_rng(config, col)
        point_sets += [_shuffled(predictors, col, rng) for _ in range(b)]

    with _Runner(future, cfg, workers) as runner:
        results = runner.map(point_sets)

    dii_full, w_full = results[0]
    per_var = {}
    for i, (name, col) in enumerate(zip(candidates, cols)):
        dii_red = results[1 + i][0]
        null = None
        if b:
            start = 1 + len(cols) + i * b
            null = [1.0 - d / dii_red for d, _ in results[start:start + b]]
        per_var[name] = VariableGain(
            ig=1.0 - dii_full / dii_red,
            dii_full=dii_full,
            dii_reduced=dii_red,
            optimal_weight_full=float(w_full[col]),
            null=null,
        )
    return IgResult(
        target=config.target,
        tau=config.tau,
        predictor_names=names,
        full_weights=w_full,
        dii_full=dii_full,
        per_variable=per_var,
    )


def permutation_null(panel, config, candidate, workers=1, dii_reduced=None):
    """IG values with ``candidate`` shuffled in time, ``config.null_permutations`` of them.

    ``dii_reduced`` may be passed to skip re-optimising the reduced space.
    """
    if config.null_permutations < 1:
        raise InputError("null_permutations must be >= 1")
    predictors, future, names = build_lagged_pair(panel, config.target, config.tau)
    col = names.index(candidate) if candidate in names else panel.index(candidate)
    if col == 0:
        raise InputError("the target cannot be its own candidate")
    rng = _null_rng(config, col)
    point_sets = [_shuffled(predictors, col, rng) for _ in range(config.null_permutations)]
    if dii_reduced is None:
        point_sets.insert(0, np.delete(predictors, col, axis=1))
    with _Runner(future, config.dii_config, workers) as runner:
        results = runner.map(point_sets)
    if dii_reduced is None:
        dii_reduced = results.pop(0)[0]
    return [1.0 - d / dii_reduced for d, _ in results]
