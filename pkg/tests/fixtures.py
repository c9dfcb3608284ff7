"""Small synthetic datasets shared by several test modules."""

import numpy as np


def spiral(n=600, noise=0.0, seed=0):
    """Archimedean spiral: ``x = (t cos t, t sin t)`` and target ``z = t``.

    ``noise`` adds Gaussian jitter to the second coordinate only, blurring
    its relation to the target while the first coordinate stays exact.
    """
    rng = np.random.default_rng(seed)
    t = rng.uniform(1.0, 4.0 * np.pi, n)
    x1 = t * np.cos(t)
    x2 = t * np.sin(t) + noise * rng.standard_normal(n)
    return np.column_stack([x1, x2]), t[:, None]


def informative_plus_noise(n=600, seed=0):
    """Three informative columns followed by three pure-noise columns."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 6))
    z = np.column_stack([x[:, 0], 0.8 * x[:, 1], np.sin(2 * x[:, 2])])
    return x, z
