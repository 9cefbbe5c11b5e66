"""Random Euclidean TSP instances on the unit square.

All randomness goes through :func:`make_rng`, which wraps numpy's PCG64
bit generator (128-bit state, 64-bit output) seeded directly with the
integer seed. The same seed therefore gives bit-identical instances on
every platform numpy supports.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InstanceParseError, InvalidInstanceError

FORMAT_VERSION = 1


def make_rng(seed: int) -> np.random.Generator:
    """Return the package's canonical generator: ``Generator(PCG64(seed))``."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class City:
    x: float
    y: float


def _distance_matrix(coords: np.ndarray) -> np.ndarray:
    n = len(coords)
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d[i, j] = d[j, i] = math.hypot(
                coords[i, 0] - coords[j, 0], coords[i, 1] - coords[j, 1]
            )
    return d


@dataclass(frozen=True, eq=False)
class TspInstance:
    """N cities with their symmetric Euclidean distance matrix."""

    cities: tuple[City, ...]
    seed: int | None = None
    d: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.cities) < 3:
            raise InvalidInstanceError(
                f"a TSP instance needs at least 3 cities, got {len(self.cities)}"
            )
        d = _distance_matrix(self.coords)
        if np.any(d + np.eye(len(d)) <= 0):
            raise InvalidInstanceError("cities must be pairwise distinct")
        d.setflags(write=False)
        object.__setattr__(self, "d", d)

    @classmethod
    def from_coords(cls, coords: Sequence[Sequence[float]], seed: int | None = None):
        return cls(tuple(City(float(x), float(y)) for x, y in coords), seed)

    @property
    def n(self) -> int:
        return len(self.cities)

    @property
    def coords(self) -> np.ndarray:
        return np.array([[c.x, c.y] for c in self.cities], dtype=float)

    def __eq__(self, other):
        if not isinstance(other, TspInstance):
            return NotImplemented
        return self.seed == other.seed and self.cities == other.cities

    def __hash__(self):
        return hash((self.seed, self.cities))

    def tour_length(self, order: Sequence[int]) -> float:
        order = list(order)
        return float(
            sum(self.d[order[k], order[(k + 1) % len(order)]] for k in range(len(order)))
        )


@dataclass(frozen=True)
class Tour:
    """A closed tour; ``order`` is read cyclically."""

    order: tuple[int, ...]
    length: float

    @classmethod
    def from_order(cls, inst: TspInstance, order: Sequence[int]) -> "Tour":
        order = tuple(int(c) for c in order)
        if sorted(order) != list(range(inst.n)):
            raise InvalidInstanceError(f"tour {order} is not a permutation of 0..{inst.n - 1}")
        return cls(order, inst.tour_length(order))

    def edges(self) -> frozenset[frozenset[int]]:
        n = len(self.order)
        return frozenset(
            frozenset((self.order[k], self.order[(k + 1) % n])) for k in range(n)
        )


def generate_instance(n: int, seed: int) -> TspInstance:
    """Draw ``n`` cities i.i.d. uniform on ``[0, 1)^2``."""
    if n < 3:
        raise InvalidInstanceError(f"n must be >= 3, got {n}")
    coords = make_rng(seed).random((n, 2))
    return TspInstance.from_coords(coords, seed=seed)


def generate_ensemble(n: int, count: int, seed: int = 0) -> list[TspInstance]:
    """Instances with seeds ``seed, seed+1, ..., seed+count-1``."""
    return [generate_instance(n, seed + k) for k in range(count)]


def neighbor_ranks(inst: TspInstance, i: int) -> list[int]:
    """Other cities ordered by distance from ``i``; ties go to the lower index."""
    if not 0 <= i < inst.n:
        raise IndexError(f"city {i} out of range for n={inst.n}")
    return sorted((j for j in range(inst.n) if j != i), key=lambda j: (inst.d[i, j], j))


def instance_to_dict(inst: TspInstance) -> dict:
    return {
        "n": inst.n,
        "seed": inst.seed,
        "cities": [[c.x, c.y] for c in inst.cities],
    }


def instance_from_dict(doc) -> TspInstance:
    if not isinstance(doc, dict):
        raise InstanceParseError("<document>", "expected an object")
    for key in ("n", "cities"):
        if key not in doc:
            raise InstanceParseError(key, "missing required field")
    n = doc["n"]
    if not isinstance(n, int) or isinstance(n, bool):
        raise InstanceParseError("n", f"expected an integer, got {n!r}")
    seed = doc.get("seed")
    if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool)):
        raise InstanceParseError("seed", f"expected an integer or null, got {seed!r}")
    cities = doc["cities"]
    if not isinstance(cities, list):
        raise InstanceParseError("cities", "expected a list of [x, y] pairs")
    coords = []
    for k, pair in enumerate(cities):
        if (
            not isinstance(pair, list)
            or len(pair) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in pair)
        ):
            raise InstanceParseError(f"cities[{k}]", f"expected [x, y], got {pair!r}")
        coords.append((float(pair[0]), float(pair[1])))
    if len(coords) != n:
        raise InstanceParseError("n", f"declares {n} cities but {len(coords)} are listed")
    try:
        return TspInstance.from_coords(coords, seed=seed)
    except InvalidInstanceError as exc:
        raise InstanceParseError("cities", str(exc)) from exc


def save_instance(inst: TspInstance, path) -> None:
    # json writes floats with repr(), which round-trips exactly
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=1) + "\n")


def load_instance(path) -> TspInstance:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceParseError("<document>", f"invalid JSON: {exc}") from exc
    return instance_from_dict(doc)


def canonical_cycle(cycle: Sequence[int]) -> tuple[int, ...]:
    """Rotate to start at the smallest city and orient so ``c[1] < c[-1]``."""
    cycle = [int(c) for c in cycle]
    k = cycle.index(min(cycle))
    cycle = cycle[k:] + cycle[:k]
    if len(cycle) > 2 and cycle[1] > cycle[-1]:
        cycle = [cycle[0]] + cycle[:0:-1]
    return tuple(cycle)


@dataclass(frozen=True)
class CycleCover:
    """Partition of the cities into disjoint cycles of length >= 3."""

    cycles: tuple[tuple[int, ...], ...]
    total_weight: float

    @classmethod
    def from_cycles(cls, inst: TspInstance, cycles) -> "CycleCover":
        cycles = tuple(sorted(canonical_cycle(c) for c in cycles))
        seen = sorted(c for cyc in cycles for c in cyc)
        if seen != list(range(inst.n)):
            raise InvalidInstanceError("cycles do not partition the cities")
        if any(len(c) < 3 for c in cycles):
            raise InvalidInstanceError("every cycle needs at least 3 cities")
        return cls(cycles, float(sum(inst.tour_length(c) for c in cycles)))

    @property
    def is_tour(self) -> bool:
        return len(self.cycles) == 1

    def subsets(self) -> list[frozenset[int]]:
        return [frozenset(c) for c in self.cycles]

    def to_tour(self, inst: TspInstance) -> Tour:
        if not self.is_tour:
            raise InvalidInstanceError(f"cover has {len(self.cycles)} cycles, not one")
        return Tour.from_order(inst, self.cycles[0])

    def edges(self) -> frozenset[frozenset[int]]:
        return frozenset(
            frozenset((c[k], c[(k + 1) % len(c)])) for c in self.cycles for k in range(len(c))
        )
