import numpy as np
import pytest

from sparselmi.model import CONTINUOUS, NoiseChannel, StochasticSystem


def random_system(rng: np.random.Generator, domain: str,
                  n: int | None = None, m: int | None = None,
                  max_channels: int = 2, max_intensity: float = 0.5,
                  sigma0: str = "identity") -> StochasticSystem:
    """Random test system with n <= 5, m <= 3, <= 2 channels."""
    n = n or int(rng.integers(1, 6))
    m = m or int(rng.integers(1, 4))
    if domain == CONTINUOUS:
        a0 = rng.standard_normal((n, n)) / np.sqrt(n)
    else:
        a0 = rng.standard_normal((n, n)) / np.sqrt(n)
        rho = max(np.abs(np.linalg.eigvals(a0)))
        if rho > 0:
            a0 = a0 * (rng.uniform(0.6, 1.1) / rho)
    b0 = rng.standard_normal((n, m))
    channels = []
    for _ in range(int(rng.integers(0, max_channels + 1))):
        c = float(rng.uniform(0.05, max_intensity))
        which = rng.integers(0, 3)
        a_i = rng.standard_normal((n, n)) / np.sqrt(n) if which != 1 else None
        b_i = rng.standard_normal((n, m)) / np.sqrt(n) if which != 0 else None
        channels.append(NoiseChannel(c, a_i, b_i))
    if sigma0 == "identity":
        s0 = np.eye(n)
    else:
        root = rng.standard_normal((n, n)) / np.sqrt(n)
        s0 = root @ root.T + 0.1 * np.eye(n)
    return StochasticSystem(domain, a0, b0, tuple(channels), s0)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240811)
