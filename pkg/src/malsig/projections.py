"""Seeded Gaussian random projections of zero-padded byte signals.

A projection maps signal space (dimension M, one coordinate per byte) down
to dimension D with a matrix of i.i.d. N(0, 1/D) entries.  The 1/D
variance makes projected Euclidean distances unbiased estimates of the
original distances, so nearest-neighbor structure survives the reduction.

Rows are generated independently from a counter-based PRNG keyed by
(seed, row), which makes the matrix fully reproducible from its seed and,
because rows never depend on each other, lets projections stream row
blocks instead of materializing D x M entries (M can reach ~10^6 for a
1 MB binary).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidDim, SizeMismatch

PRNG_NAME = "numpy-philox4x64/row-keyed/standard-normal"

# Cap on the float64 buffer a single generated row block may occupy.
_BLOCK_BUDGET_BYTES = 64 * 1024 * 1024


@dataclass(frozen=True)
class ProjectionMatrix:
    """Deterministic D x M Gaussian projection, variance 1/D.

    The matrix is defined by ``(seed, dim_out, dim_in)`` alone; ``rows``
    regenerates any row block bit-identically on demand.
    """

    dim_out: int
    dim_in: int
    seed: int
    prng: str = PRNG_NAME

    def rows(self, start: int, stop: int) -> np.ndarray:
        """Generate rows [start, stop) as a float64 array."""
        if not 0 <= start <= stop <= self.dim_out:
            raise InvalidDim(f"row range [{start}, {stop}) outside 0..{self.dim_out}")
        scale = 1.0 / np.sqrt(self.dim_out)
        block = np.empty((stop - start, self.dim_in), dtype=np.float64)
        for i in range(start, stop):
            rng = np.random.Generator(np.random.Philox(key=[self.seed, i]))
            block[i - start] = rng.standard_normal(self.dim_in)
        block *= scale
        return block

    def materialize(self) -> np.ndarray:
        return self.rows(0, self.dim_out)

    def _rows_per_block(self) -> int:
        return max(1, _BLOCK_BUDGET_BYTES // (self.dim_in * 8))

    def metadata(self) -> dict:
        return {
            "seed": self.seed,
            "dim_out": self.dim_out,
            "dim_in": self.dim_in,
            "prng": self.prng,
            "numpy": np.__version__,
        }


def make_projection(dim_out: int, dim_in: int, seed: int) -> ProjectionMatrix:
    """Create the projection for (seed, D, M); requires 1 <= D < M."""
    if dim_out < 1 or dim_out >= dim_in:
        raise InvalidDim(f"need 1 <= dim_out < dim_in, got D={dim_out}, M={dim_in}")
    return ProjectionMatrix(dim_out=dim_out, dim_in=dim_in, seed=int(seed))


def project(signal: np.ndarray, matrix: ProjectionMatrix) -> np.ndarray:
    """Project one length-M signal to a length-D float64 vector."""
    u = np.asarray(signal, dtype=np.float64).ravel()
    if u.size != matrix.dim_in:
        raise SizeMismatch(
            f"signal length {u.size} does not match projection input {matrix.dim_in}"
        )
    w = np.empty(matrix.dim_out, dtype=np.float64)
    step = matrix._rows_per_block()
    for start in range(0, matrix.dim_out, step):
        stop = min(start + step, matrix.dim_out)
        w[start:stop] = matrix.rows(start, stop) @ u
    return w


def project_many(signals: np.ndarray, matrix: ProjectionMatrix) -> np.ndarray:
    """Project an (n, M) batch of signals to an (n, D) array."""
    mat = np.asarray(signals, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[1] != matrix.dim_in:
        raise SizeMismatch(
            f"expected shape (n, {matrix.dim_in}), got {mat.shape}"
        )
    out = np.empty((mat.shape[0], matrix.dim_out), dtype=np.float64)
    step = matrix._rows_per_block()
    for start in range(0, matrix.dim_out, step):
        stop = min(start + step, matrix.dim_out)
        out[:, start:stop] = mat @ matrix.rows(start, stop).T
    return out
