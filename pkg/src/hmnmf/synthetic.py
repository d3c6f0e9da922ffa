"""Synthetic data with a known two-level feature hierarchy."""
import numpy as np


def hierarchical_data(rng, m=20, n=50, parents=4, children=2, noise=0.01, return_labels=False):
    """``X = W1 W2 H2 + noise`` where each of ``parents`` top features
    spreads over ``children`` features of the layer below.

    Parameters
    ----------
    rng : numpy.random.Generator
    m, n : int
        Rows (input dimension) and columns (samples) of ``X``.
    parents, children : int
    noise : float
        Uniform noise amplitude relative to the mean of the clean product.
    return_labels : bool
        Also return each sample's dominant parent as its class label.
    """
    k1 = parents * children
    w1 = rng.uniform(0.0, 1.0, (m, k1)) ** 3
    w2 = np.zeros((k1, parents))
    for p in range(parents):
        w2[p * children:(p + 1) * children, p] = rng.uniform(0.5, 1.0, children)
    h2 = rng.uniform(0.0, 1.0, (parents, n)) ** 2
    x = w1 @ w2 @ h2
    x = x + noise * rng.uniform(0.0, 1.0, x.shape) * x.mean()
    if return_labels:
        return x, np.argmax(h2, axis=0).astype(np.int64)
    return x
