"""Counter-based random streams and perturbation sampling.

Every random draw in the package comes from a stream identified by a
:class:`StreamKey` ``(master_seed, step, index, tag)``. The key is hashed by
numpy's ``SeedSequence`` into a fresh Philox generator, so a stream depends
only on its key and never on how many draws happened elsewhere. This makes
perturbation ``p`` of step ``t`` reproducible in isolation and lets columns be
generated in any order.

Sampling methods are fixed:

* Gaussian entries use ``Generator.standard_normal`` (numpy's ziggurat).
* Rademacher entries take one bit each from the raw 64-bit Philox output,
  least-significant bit first; bit 1 maps to +1 and bit 0 to -1.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import RejectedInputError

_MASK64 = (1 << 64) - 1


class Distribution(str, enum.Enum):
    GAUSSIAN = "gaussian"
    RADEMACHER = "rademacher"

    @classmethod
    def parse(cls, value: "Distribution | str") -> "Distribution":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise RejectedInputError(f"unknown distribution {value!r}") from None


class Tag(enum.IntEnum):
    """Purpose namespaces that keep unrelated streams apart."""

    GAUSSIAN = 1
    RADEMACHER = 2
    INIT = 3
    DATA = 4
    ORDER = 5
    MONTE_CARLO = 6
    PROBE = 7


_DIST_TAG = {Distribution.GAUSSIAN: Tag.GAUSSIAN, Distribution.RADEMACHER: Tag.RADEMACHER}


@dataclass(frozen=True)
class StreamKey:
    master_seed: int
    step: int = 0
    index: int = 0
    tag: int = 0

    def __post_init__(self):
        if self.step < 0 or self.index < 0 or self.tag < 0:
            raise RejectedInputError("stream key counters must be non-negative")

    def generator(self) -> np.random.Generator:
        entropy = [int(self.master_seed) & _MASK64, int(self.step), int(self.index), int(self.tag)]
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def _rademacher(gen: np.random.Generator, d: int) -> np.ndarray:
    words = gen.bit_generator.random_raw((d + 63) // 64).astype("<u8")
    bits = np.unpackbits(words.view(np.uint8), bitorder="little")[:d]
    return bits.astype(np.float64) * 2.0 - 1.0


def draw(gen: np.random.Generator, d: int, dist: Distribution | str) -> np.ndarray:
    """Draw ``d`` i.i.d. entries of ``dist`` from an existing generator."""
    dist = Distribution.parse(dist)
    if dist is Distribution.GAUSSIAN:
        return gen.standard_normal(d)
    return _rademacher(gen, d)


def sample_perturbation(key: StreamKey, d: int, dist: Distribution | str) -> np.ndarray:
    if d < 1:
        raise RejectedInputError(f"perturbation dimension must be >= 1, got {d}")
    return draw(key.generator(), d, dist)


def perturbation_key(master_seed: int, step: int, p: int, dist: Distribution | str) -> StreamKey:
    return StreamKey(master_seed, step, p, _DIST_TAG[Distribution.parse(dist)])


def perturbation_columns(master_seed: int, step: int, d: int, P: int, dist) -> np.ndarray:
    """Raw (unnormalized) perturbations u_1..u_P stacked as a d x P matrix."""
    if P < 1:
        raise RejectedInputError(f"number of perturbations must be >= 1, got {P}")
    if d < 1:
        raise RejectedInputError(f"perturbation dimension must be >= 1, got {d}")
    dist = Distribution.parse(dist)
    out = np.empty((d, P))
    for p in range(P):
        out[:, p] = sample_perturbation(perturbation_key(master_seed, step, p, dist), d, dist)
    return out


@dataclass(frozen=True, eq=False)
class PerturbationMatrix:
    """Random projection U (d x P) whose columns are u_p / sqrt(P)."""

    matrix: np.ndarray
    distribution: Distribution | None = None
    master_seed: int | None = None
    step: int | None = None

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    @property
    def P(self) -> int:
        return self.matrix.shape[1]

    def meta(self) -> dict:
        return {
            "P": self.P,
            "distribution": None if self.distribution is None else self.distribution.value,
            "seed": self.master_seed,
            "step": self.step,
        }


def build_projection(master_seed: int, step: int, d: int, P: int, dist) -> PerturbationMatrix:
    dist = Distribution.parse(dist)
    raw = perturbation_columns(master_seed, step, d, P, dist)
    return PerturbationMatrix(raw / np.sqrt(P), dist, master_seed, step)
