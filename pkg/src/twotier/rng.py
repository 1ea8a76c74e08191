"""Counter-based random streams keyed by (seed, block, role)."""

import zlib

import numpy as np


def role_id(role) -> int:
    if isinstance(role, (int, np.integer)):
        return int(role)
    return zlib.crc32(str(role).encode())


def stream(seed: int, *key) -> np.random.Generator:
    """Independent Philox stream for ``seed`` and an arbitrary key path.

    Streams depend only on their key, so blocks of replications can be run
    in any order or on any worker and still reproduce bit-for-bit.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(role_id(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def zt_poisson(lam: float, size, rng: np.random.Generator) -> np.ndarray:
    """Zero-truncated Poisson draws, i.e. ``X | X >= 1`` for ``X ~ Poisson(lam)``.

    ``lam == 0`` is the limit law (always 1).
    """
    if lam <= 0:
        return np.ones(size, dtype=np.int64)
    if lam > 3.0:
        # rejection is cheap once P(X = 0) < 5%
        out = rng.poisson(lam, size)
        bad = np.flatnonzero(out == 0)
        while bad.size:
            out[bad] = rng.poisson(lam, bad.size)
            bad = bad[out[bad] == 0]
        return out.astype(np.int64)
    # inversion against a tabulated cdf
    kmax = int(lam + 12.0 * np.sqrt(lam) + 30)
    k = np.arange(kmax + 1)
    logpmf = k * np.log(lam) - lam - np.cumsum(np.log(np.maximum(k, 1)))
    cdf = np.cumsum(np.exp(logpmf))
    v = rng.uniform(cdf[0], cdf[-1], size)
    return np.maximum(np.searchsorted(cdf, v, side="right"), 1).astype(np.int64)
