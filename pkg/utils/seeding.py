import numpy as np


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def spawn(seed, n: int) -> list[np.random.SeedSequence]:
    """Sementes filhas independentes, na mesma ordem a cada execução."""
    return as_seed_sequence(seed).spawn(n)
