"""Benchmark stochastic processes with known causal structure.

Random numbers come from numpy's PCG64 generator. A master
``SeedSequence(seed)`` is split with ``spawn`` into one child stream for the
initial state followed by one child stream per variable, in output column
order; each variable's innovations are drawn from its own stream, so the
noise sequences are independent and adding burn-in or length only extends
each stream.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .data import TimeSeriesPanel
from .errors import InputError

COLUMNS = ("z", "x1", "x2")


class Process(str, Enum):
    FALSE_NEGATIVE = "false-negative"
    FALSE_POSITIVE = "false-positive"
    LINEAR_VAR = "linear-var"


@dataclass(frozen=True)
class SyntheticSpec:
    process: Process = Process.FALSE_NEGATIVE
    length: int = 2800
    burn_in: int = 5000
    seed: int = 0
    # LinearVar only: list of (K, K) lag matrices and per-variable noise scales
    coefficients: tuple = field(default=())
    noise_scales: tuple = field(default=())
    names: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "process", Process(self.process))
        if self.burn_in < 0:
            raise InputError("burn_in must be >= 0")
        if self.length < 100:
            raise InputError("length must be >= 100")
        if self.process is Process.LINEAR_VAR:
            coefs = tuple(np.asarray(a, dtype=float) for a in self.coefficients)
            if not coefs:
                raise InputError("linear-var needs at least one coefficient matrix")
            k = coefs[0].shape[0]
            if any(a.shape != (k, k) for a in coefs):
                raise InputError("coefficient matrices must all be K x K")
            scales = tuple(self.noise_scales) or (1.0,) * k
            if len(scales) != k:
                raise InputError("need one noise scale per variable")
            names = tuple(self.names) or tuple(f"v{i}" for i in range(k))
            object.__setattr__(self, "coefficients", coefs)
            object.__setattr__(self, "noise_scales", tuple(float(s) for s in scales))
            object.__setattr__(self, "names", names)
        else:
            object.__setattr__(self, "names", COLUMNS)


def _streams(seed, n_vars):
    children = np.random.SeedSequence(seed).spawn(n_vars + 1)
    return [np.random.Generator(np.random.PCG64(s)) for s in children]


def _noise(spec, n_steps):
    """Initial state and innovations, shape (n_steps, K), per the stream layout."""
    k = len(spec.names)
    streams = _streams(spec.seed, k)
    init = streams[0].standard_normal(k)
    u = np.column_stack([g.standard_normal(n_steps) for g in streams[1:]])
    return init, u


def generate(spec):
    """Simulate ``burn_in + length`` steps from a Gaussian initial state and keep the last ``length``."""
    n_steps = spec.burn_in + spec.length
    init, u = _noise(spec, n_steps)
    out = np.empty((n_steps + 1, len(spec.names)))
    out[0] = init
    if spec.process is Process.FALSE_NEGATIVE:
        for t in range(1, n_steps + 1):
            z, x1, x2 = out[t - 1]
            out[t, 0] = 0.5 * z + x1 + x2 * x2 + u[t - 1, 0]
            out[t, 1] = u[t - 1, 1]
            out[t, 2] = u[t - 1, 2]
    elif spec.process is Process.FALSE_POSITIVE:
        u = u * np.array([1.0, 0.2, 0.5])
        for t in range(1, n_steps + 1):
            z, x1, x2 = out[t - 1]
            sq = x2 * x2
            out[t, 0] = 0.5 * z + sq + u[t - 1, 0]
            out[t, 1] = 0.1 * x1 + sq + u[t - 1, 1]
            out[t, 2] = 0.7 * x2 + u[t - 1, 2]
    else:
        u = u * np.asarray(spec.noise_scales)
        coefs = spec.coefficients
        for t in range(1, n_steps + 1):
            acc = u[t - 1].copy()
            for i, a in enumerate(coefs, start=1):
                if t - i >= 0:
                    acc += a @ out[t - i]
            out[t] = acc
    return TimeSeriesPanel(spec.names, out[spec.burn_in + 1:])


def regression_ground_truth(spec):
    """Directed edges ``(cause, effect)`` of the generating process."""
    if spec.process is Process.FALSE_NEGATIVE:
        return {("x1", "z"), ("x2", "z")}
    if spec.process is Process.FALSE_POSITIVE:
        return {("x2", "z"), ("x2", "x1")}
    names = spec.names
    edges = set()
    for a in spec.coefficients:
        for i, j in zip(*np.nonzero(np.abs(a) > 0)):
            if i != j:
                edges.add((names[j], names[i]))
    return edges


def edges_to_json(edges):
    return [{"source": s, "target": t} for s, t in sorted(edges)]
