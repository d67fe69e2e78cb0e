import numpy as np


def crandn(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with the given variance."""
    x = rng.standard_normal(tuple(np.atleast_1d(shape)) + (2,))
    return np.sqrt(variance / 2.0) * (x[..., 0] + 1j * x[..., 1])
