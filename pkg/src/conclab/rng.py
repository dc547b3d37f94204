"""Counter-based random streams.

Every sampler in the package draws from a Philox generator keyed by
``(seed, stream, block)``.  The key determines the whole stream, so a given
(seed, stream-id) pair produces the same samples regardless of scheduling,
thread count, or how the sample budget is split into blocks.  Monte Carlo
loops always consume fixed 4096-sample blocks and reduce block results in
block order.
"""

import numpy as np

BLOCK_SIZE = 4096

# Stream identifiers; one per independent sampling purpose.
STREAM_SPHERE = 1
STREAM_GAUSSIAN = 2
STREAM_LAPLACE = 3
STREAM_UNIFORM_CUBE = 4
STREAM_CUBE_SUBSET = 5
STREAM_ROTATION = 6
STREAM_UNIT_PAIRS = 7
STREAM_CALCULUS = 8
STREAM_PERTURBATION = 9
STREAM_GL = 10

_MASK64 = (1 << 64) - 1


def block_generator(seed, stream, block=0):
    """Generator for one (seed, stream, block) cell.

    Distinct cells get distinct Philox keys and are therefore independent
    streams; identical cells are bit-identical reproductions.
    """
    if seed < 0:
        raise ValueError("seed must be a nonnegative 64-bit integer")
    key = np.array(
        [np.uint64(seed & _MASK64), np.uint64(((stream << 32) ^ block) & _MASK64)],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


def blocks(total):
    """Yield (block_index, start, length) covering ``total`` samples."""
    if total < 0:
        raise ValueError("total must be nonnegative")
    index = 0
    start = 0
    while start < total:
        length = min(BLOCK_SIZE, total - start)
        yield index, start, length
        index += 1
        start += length


def sphere_blocks(seed, n, total, stream=STREAM_SPHERE):
    """Yield (start, theta_block) of uniform unit vectors in blocks."""
    for index, start, length in blocks(total):
        g = block_generator(seed, stream, index)
        z = g.standard_normal((length, n))
        norms = np.linalg.norm(z, axis=1)
        norms[norms < 1e-300] = 1.0
        yield start, z / norms[:, None]


def sample_sphere(seed, n, total, stream=STREAM_SPHERE):
    """Uniform unit vectors of shape (total, n), assembled block by block."""
    out = np.empty((total, n))
    for start, theta in sphere_blocks(seed, n, total, stream=stream):
        out[start : start + theta.shape[0]] = theta
    return out


def haar_orthogonal(generator, n):
    """Haar-distributed orthogonal matrix via sign-corrected QR."""
    q, r = np.linalg.qr(generator.standard_normal((n, n)))
    return q * np.sign(np.diag(r))
