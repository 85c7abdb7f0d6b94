"""Counter-based random streams.

Each stream is a Philox generator keyed by ``(seed, domain, index)``; the
t-th draw of a stream is the uniform for epoch t. Streams therefore do not
depend on the order in which sweeps are executed.
"""
import numpy as np

TRAIN = 0
VALIDATE = 1
RESAMPLE = 2


def stream(seed: int, domain: int, index: int, *extra: int) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed), int(domain), int(index), *map(int, extra)])
    return np.random.Generator(np.random.Philox(ss))


def epoch_uniforms(seed: int, domain: int, index: int, horizon: int) -> np.ndarray:
    return stream(seed, domain, index).random(horizon)
