import zlib

import numpy as np


def _tag(name):
    return zlib.crc32(name.encode()) & 0xFFFFFFFF


def stream(seed, tag="", replica=0):
    """Generator for (seed, module tag, replica index).

    Streams for different replicas are independent, so adding replicas never
    changes the draws of existing ones.
    """
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=(_tag(tag), int(replica)))
    return np.random.Generator(np.random.PCG64(ss))


def int_seed(rng):
    # 32-bit seed for numba kernels, drawn from a numpy stream
    return int(rng.integers(0, 2**31 - 1))
