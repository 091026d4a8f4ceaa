"""Shared plumbing: exceptions, numeric estimates, search budgets, seeded RNG streams."""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class GraphonKitError(Exception):
    """Base class for all library errors."""


class DomainError(GraphonKitError):
    """A coordinate lies outside the graphon's latent space."""


class IntegrabilityError(GraphonKitError):
    """A requested integral diverges (e.g. power-law kernel with p >= 1/alpha)."""


class DegenerateError(GraphonKitError):
    """Degenerate input: zero graphon, empty graph, etc."""


class SizeError(GraphonKitError):
    """Instance too large for an exact-mode computation."""


class ConstructionError(GraphonKitError):
    """A constructive operation (e.g. grid rounding) cannot produce a valid output."""


class ParameterError(GraphonKitError):
    """Invalid parameter combination (usage-level error)."""


class Estimate(NamedTuple):
    """A numeric value together with an error estimate (0 for exact values)."""

    value: float
    error: float

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class SearchBudget:
    """Effort knobs for heuristic searches; defaults are desk-scale."""

    restarts: int = 20
    iterations: int = 200

    def __post_init__(self) -> None:
        if self.restarts < 1 or self.iterations < 1:
            raise ParameterError("search budget must have restarts >= 1 and iterations >= 1")


def substream(seed: int, *tags) -> np.random.Generator:
    """Derive a named RNG substream from a master seed.

    Uses the counter-based Philox generator keyed by (seed, tags), so streams
    for different purposes (latent draws, edge draws, restarts, ...) are
    independent and unaffected by how much randomness the others consume.
    String tags are hashed with crc32 to stable integers.
    """
    key = tuple(zlib.crc32(t.encode()) if isinstance(t, str) else int(t) for t in tags)
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))
