"""QUBO / Ising encodings of the TSP.

Two mappings are supported:

* ``permutation``: one binary variable per (city, timestep) pair, with
  row/column one-hot penalties. The reduced grid pins city 0 to timestep 0.
* ``edge``: one binary variable per undirected edge, with a degree-2
  penalty at every city. Optionally truncated to each city's L nearest
  neighbours.

Every penalty is kept twice: expanded into the ``linear``/``quadratic``/
``offset`` QUBO coefficients, and as a :class:`SquaredPenalty` record in
``QuadraticModel.penalties``. The structured copy lets the exact MILP
oracle minimise a model without re-deriving its penalties.
"""

from __future__ import annotations

import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InstanceParseError, PreconditionError
from .instances import CycleCover, TspInstance, Tour, neighbor_ranks

FORMAT_VERSION = 1
PERMUTATION = "permutation"
EDGE = "edge"


@dataclass(frozen=True)
class PenaltyWeights:
    eta: float
    eta_prime: float
    eta_double_prime: float

    def __post_init__(self):
        if min(self.eta, self.eta_prime, self.eta_double_prime) < 0:
            raise PreconditionError("penalty weights must be non-negative")

    @classmethod
    def default(cls, inst: TspInstance) -> "PenaltyWeights":
        """eta = 2 max d_ij, eta' = eta, eta'' = 4 eta'."""
        eta = 2.0 * float(inst.d.max())
        return cls(eta, eta, 4.0 * eta)


@dataclass(frozen=True)
class VariableMap:
    """Ties variable indices to their meaning.

    Labels are tuples: ``("x", city, step)`` for permutation variables,
    ``("e", i, j)`` with ``i < j`` for edge variables and
    ``("s", subset, k)`` for slack variable ``s_k`` attached to ``subset``.
    """

    kind: str
    instance: TspInstance
    labels: tuple[tuple, ...]
    truncation: int | None = None
    reduced: bool = False
    index: Mapping[tuple, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {lab: k for k, lab in enumerate(self.labels)}
        if len(index) != len(self.labels):
            raise ValueError("duplicate variable labels")
        object.__setattr__(self, "index", index)

    def __len__(self):
        return len(self.labels)

    def edge_index(self, i: int, j: int) -> int | None:
        return self.index.get(("e", min(i, j), max(i, j)))

    def edge_items(self) -> list[tuple[int, int, int]]:
        """(index, i, j) for every edge variable."""
        return [(k, lab[1], lab[2]) for k, lab in enumerate(self.labels) if lab[0] == "e"]

    def cut_edges(self, subset: Iterable[int]) -> list[int]:
        """Indices of retained edges with exactly one endpoint in ``subset``."""
        a = set(subset)
        return [k for k, i, j in self.edge_items() if (i in a) != (j in a)]

    def with_labels(self, extra: Sequence[tuple]) -> "VariableMap":
        return VariableMap(
            self.kind, self.instance, self.labels + tuple(extra), self.truncation, self.reduced
        )


@dataclass(frozen=True)
class SquaredPenalty:
    """``weight * (target - sum_k coeffs[k] * a[indices[k]])**2``."""

    weight: float
    target: float
    indices: tuple[int, ...]
    coeffs: tuple[float, ...]
    label: str = ""

    def value(self, config: np.ndarray) -> float:
        s = sum(c * config[i] for i, c in zip(self.indices, self.coeffs))
        return self.weight * (self.target - s) ** 2


@dataclass(frozen=True, eq=False)
class QuadraticModel:
    """Binary quadratic objective ``offset + sum h_i a_i + sum_{i<j} J_ij a_i a_j``.

    ``cost``/``cost_offset`` hold the objective before penalties; the
    expanded coefficients always equal cost plus every entry of
    ``penalties``. Models built by hand may leave ``cost`` as ``None``.
    """

    num_vars: int
    linear: np.ndarray
    quadratic: Mapping[tuple[int, int], float]
    offset: float
    varmap: VariableMap | None = None
    cost: np.ndarray | None = None
    cost_offset: float = 0.0
    cost_quadratic: Mapping[tuple[int, int], float] = field(default_factory=dict)
    penalties: tuple[SquaredPenalty, ...] = ()
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        linear = np.asarray(self.linear, dtype=float).copy()
        if linear.shape != (self.num_vars,):
            raise ValueError(f"linear has shape {linear.shape}, expected ({self.num_vars},)")
        linear.setflags(write=False)
        object.__setattr__(self, "linear", linear)
        quad = {}
        for (i, j), v in self.quadratic.items():
            if i == j:
                raise ValueError(f"self-coupling on variable {i}")
            if not (0 <= i < self.num_vars and 0 <= j < self.num_vars):
                raise ValueError(f"coupling ({i}, {j}) out of range")
            key = (i, j) if i < j else (j, i)
            quad[key] = quad.get(key, 0.0) + float(v)
        object.__setattr__(self, "quadratic", dict(sorted(quad.items())))
        if self.varmap is not None and len(self.varmap) != self.num_vars:
            raise ValueError("varmap size does not match num_vars")

    @classmethod
    def from_penalties(
        cls, num_vars, cost, cost_offset, penalties, varmap=None, warnings=(), cost_quadratic=None
    ):
        linear = np.asarray(cost, dtype=float).copy()
        quad: dict[tuple[int, int], float] = defaultdict(float)
        for key, v in (cost_quadratic or {}).items():
            quad[key] += v
        offset = float(cost_offset)
        for p in penalties:
            offset += _expand_square(p, linear, quad)
        return cls(
            num_vars, linear, quad, offset, varmap,
            np.asarray(cost, dtype=float), float(cost_offset), dict(cost_quadratic or {}),
            tuple(penalties), tuple(warnings),
        )

    @property
    def kind(self) -> str | None:
        return None if self.varmap is None else self.varmap.kind

    def dense(self) -> tuple[np.ndarray, np.ndarray]:
        """Linear vector and symmetric coupling matrix with zero diagonal."""
        q = np.zeros((self.num_vars, self.num_vars))
        for (i, j), v in self.quadratic.items():
            q[i, j] = q[j, i] = v
        return np.array(self.linear), q

    def energy(self, config) -> float:
        a = np.asarray(config, dtype=float)
        e = self.offset + float(self.linear @ a)
        for (i, j), v in self.quadratic.items():
            e += v * a[i] * a[j]
        return float(e)

    def energies(self, configs: np.ndarray) -> np.ndarray:
        """Energies for a batch of configurations, one per row."""
        a = np.asarray(configs, dtype=float)
        h, q = self.dense()
        return self.offset + a @ h + 0.5 * np.einsum("bi,ij,bj->b", a, q, a)

    def cost_value(self, config) -> float:
        if self.cost is None:
            raise PreconditionError("model carries no separate cost vector")
        a = np.asarray(config, dtype=float)
        e = self.cost_offset + float(self.cost @ a)
        for (i, j), v in self.cost_quadratic.items():
            e += v * a[i] * a[j]
        return e

    def penalty_value(self, config) -> float:
        a = np.asarray(config, dtype=float)
        return float(sum(p.value(a) for p in self.penalties))

    def with_penalties(self, extra, varmap=None, num_vars=None, warnings=()) -> "QuadraticModel":
        if self.cost is None:
            raise PreconditionError("cannot extend a model without its structured form")
        num_vars = self.num_vars if num_vars is None else num_vars
        cost = np.zeros(num_vars)
        cost[: self.num_vars] = self.cost
        return QuadraticModel.from_penalties(
            num_vars, cost, self.cost_offset, self.penalties + tuple(extra),
            varmap if varmap is not None else self.varmap, self.warnings + tuple(warnings),
            self.cost_quadratic,
        )


def _expand_square(p: SquaredPenalty, linear, quad) -> float:
    # w (c - sum alpha_k a_k)^2 with a_k^2 = a_k
    merged: dict[int, float] = defaultdict(float)
    for i, c in zip(p.indices, p.coeffs):
        merged[i] += c
    items = sorted(merged.items())
    w, c = p.weight, p.target
    for k, (i, ai) in enumerate(items):
        linear[i] += w * (ai * ai - 2.0 * c * ai)
        for j, aj in items[k + 1:]:
            quad[(i, j)] += 2.0 * w * ai * aj
    return w * c * c


@dataclass(frozen=True)
class IsingModel:
    """``offset + sum h_i s_i + sum_{i<j} J_ij s_i s_j`` with ``s = 1 - 2a``."""

    num_vars: int
    fields: np.ndarray
    couplings: Mapping[tuple[int, int], float]
    offset: float

    def energy(self, spins) -> float:
        s = np.asarray(spins, dtype=float)
        e = self.offset + float(self.fields @ s)
        for (i, j), v in self.couplings.items():
            e += v * s[i] * s[j]
        return float(e)

    def dense(self) -> tuple[np.ndarray, np.ndarray]:
        j = np.zeros((self.num_vars, self.num_vars))
        for (a, b), v in self.couplings.items():
            j[a, b] = j[b, a] = v
        return np.array(self.fields), j


def to_ising(model: QuadraticModel) -> IsingModel:
    """Substitute ``a = (1 - s) / 2``; energies agree configuration by configuration."""
    fields = -0.5 * np.array(model.linear)
    offset = model.offset + 0.5 * float(np.sum(model.linear))
    couplings = {}
    for (i, j), v in model.quadratic.items():
        couplings[(i, j)] = 0.25 * v
        fields[i] -= 0.25 * v
        fields[j] -= 0.25 * v
        offset += 0.25 * v
    return IsingModel(model.num_vars, fields, couplings, offset)


def spins_to_bits(spins) -> np.ndarray:
    return ((1 - np.asarray(spins)) // 2).astype(np.int8)


def bits_to_spins(bits) -> np.ndarray:
    return (1 - 2 * np.asarray(bits)).astype(np.int8)


# -- the two mappings -------------------------------------------------------


def encode_permutation(
    inst: TspInstance, w: PenaltyWeights | None = None, reduced: bool = False
) -> QuadraticModel:
    """Tour length plus ``eta`` times the row/column one-hot penalties.

    Timestep ``k + 1`` wraps modulo N so every valid configuration's
    energy is its closed tour length.
    """
    w = PenaltyWeights.default(inst) if w is None else w
    n, d = inst.n, inst.d
    bound = float(d.max()) / 2.0
    if w.eta < bound:
        raise PreconditionError(f"eta={w.eta} is below the required bound max(d)/2={bound}")
    first = 1 if reduced else 0
    labels = tuple(("x", i, k) for i in range(first, n) for k in range(first, n))
    varmap = VariableMap(PERMUTATION, inst, labels, reduced=reduced)
    idx = varmap.index
    cost = np.zeros(len(labels))
    cost_offset = 0.0
    quad: dict[tuple[int, int], float] = defaultdict(float)

    def var(i, k):
        # None: fixed to 0; True: fixed to 1
        if reduced and (i == 0 or k == 0):
            return True if (i == 0 and k == 0) else None
        return idx[("x", i, k)]

    for k in range(n):
        k1 = (k + 1) % n
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                u, v = var(i, k), var(j, k1)
                if u is None or v is None:
                    continue
                if u is True and v is True:
                    cost_offset += d[i, j]
                elif u is True:
                    cost[v] += d[i, j]
                elif v is True:
                    cost[u] += d[i, j]
                else:
                    quad[(min(u, v), max(u, v))] += d[i, j]

    penalties = []
    for i in range(first, n):
        row = tuple(idx[("x", i, k)] for k in range(first, n))
        penalties.append(SquaredPenalty(w.eta, 1.0, row, (1.0,) * len(row), f"city {i}"))
    for k in range(first, n):
        col = tuple(idx[("x", i, k)] for i in range(first, n))
        penalties.append(SquaredPenalty(w.eta, 1.0, col, (1.0,) * len(col), f"step {k}"))

    return QuadraticModel.from_penalties(
        len(labels), cost, cost_offset, penalties, varmap, cost_quadratic=dict(quad)
    )


def retained_edges(inst: TspInstance, L: int | None = None) -> list[tuple[int, int]]:
    """Sorted ``(i, j)``, ``i < j``: all pairs, or the union of each city's L nearest."""
    n = inst.n
    if L is None:
        return [(i, j) for i in range(n) for j in range(i + 1, n)]
    if not 2 <= L <= n - 1:
        raise PreconditionError(f"truncation L={L} outside [2, {n - 1}]")
    keep = set()
    for i in range(n):
        for j in neighbor_ranks(inst, i)[:L]:
            keep.add((min(i, j), max(i, j)))
    return sorted(keep)


def encode_edge(
    inst: TspInstance, w: PenaltyWeights | None = None, L: int | None = None
) -> QuadraticModel:
    """Sum of selected edge lengths plus ``eta * (2 - degree)**2`` per city."""
    w = PenaltyWeights.default(inst) if w is None else w
    edges = retained_edges(inst, L)
    labels = tuple(("e", i, j) for i, j in edges)
    varmap = VariableMap(EDGE, inst, labels, truncation=L)
    cost = np.array([inst.d[i, j] for i, j in edges])
    penalties = []
    for c in range(inst.n):
        inc = tuple(k for k, (i, j) in enumerate(edges) if c in (i, j))
        penalties.append(SquaredPenalty(w.eta, 2.0, inc, (1.0,) * len(inc), f"degree {c}"))
    return QuadraticModel.from_penalties(len(labels), cost, 0.0, penalties, varmap)


def _require_edge_model(model: QuadraticModel):
    if model.kind != EDGE:
        raise PreconditionError(f"subtour penalties need an edge-kind model, got {model.kind!r}")
    if model.cost is None:
        raise PreconditionError("model carries no structured penalty form")


def _check_subset(model, subset) -> frozenset[int]:
    a = frozenset(int(c) for c in subset)
    n = model.varmap.instance.n
    if not a or len(a) >= n or not a <= set(range(n)):
        raise PreconditionError(f"subset {sorted(a)} is not a proper nonempty city subset")
    return a


def add_subtour_penalty(
    model: QuadraticModel, subset: Iterable[int], C: int = 2, eta_prime: float | None = None
) -> QuadraticModel:
    """Add ``eta' * (C - cut(subset))**2`` over the retained cut edges."""
    _require_edge_model(model)
    a = _check_subset(model, subset)
    if C not in (2, 3):
        raise PreconditionError(f"C must be 2 or 3, got {C}")
    if eta_prime is None:
        eta_prime = PenaltyWeights.default(model.varmap.instance).eta_prime
    cut = tuple(model.varmap.cut_edges(a))
    notes = ()
    if not cut:
        msg = f"subset {sorted(a)} has no retained cut edges; constraint is vacuous"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes = (msg,)
    p = SquaredPenalty(eta_prime, float(C), cut, (1.0,) * len(cut), f"subtour {sorted(a)} C={C}")
    return model.with_penalties([p], warnings=notes)


def add_slack_subtour_penalty(
    model: QuadraticModel,
    subset: Iterable[int],
    eta_prime: float | None = None,
    eta_double_prime: float | None = None,
) -> QuadraticModel:
    """Append slacks ``s_1..s_m`` and add the cut-equals-2k penalty pair."""
    _require_edge_model(model)
    a = _check_subset(model, subset)
    defaults = PenaltyWeights.default(model.varmap.instance)
    eta_prime = defaults.eta_prime if eta_prime is None else eta_prime
    eta_double_prime = 4.0 * eta_prime if eta_double_prime is None else eta_double_prime
    m = len(a)
    key = tuple(sorted(a))
    slack_labels = [("s", key, k) for k in range(1, m + 1)]
    varmap = model.varmap.with_labels(slack_labels)
    slack_idx = tuple(varmap.index[lab] for lab in slack_labels)
    cut = tuple(model.varmap.cut_edges(a))
    notes = ()
    if not cut:
        msg = f"subset {list(key)} has no retained cut edges; constraint is vacuous"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes = (msg,)
    p1 = SquaredPenalty(
        eta_prime, 0.0, cut + slack_idx,
        (1.0,) * len(cut) + tuple(-2.0 * k for k in range(1, m + 1)),
        f"slack cut {list(key)}",
    )
    p2 = SquaredPenalty(eta_double_prime, 1.0, slack_idx, (1.0,) * m, f"slack one-hot {list(key)}")
    return model.with_penalties([p1, p2], varmap=varmap, num_vars=len(varmap), warnings=notes)


# -- decoding ---------------------------------------------------------------


@dataclass(frozen=True)
class ViolationReport:
    """Constraint violations found while decoding; each entry names one constraint."""

    violations: tuple[str, ...]

    def __bool__(self):
        return True


def decode(config, varmap: VariableMap) -> Tour | CycleCover | ViolationReport:
    a = np.asarray(config).astype(int)
    if len(a) != len(varmap):
        raise ValueError(f"configuration has {len(a)} entries, varmap has {len(varmap)}")
    if varmap.kind == PERMUTATION:
        return _decode_permutation(a, varmap)
    return decode_edges(a, varmap)


def permutation_grid(a, varmap: VariableMap) -> np.ndarray:
    n = varmap.instance.n
    grid = np.zeros((n, n), dtype=int)
    if varmap.reduced:
        grid[0, 0] = 1
    for k, lab in enumerate(varmap.labels):
        if lab[0] == "x":
            grid[lab[1], lab[2]] = a[k]
    return grid


def _decode_permutation(a, varmap):
    grid = permutation_grid(a, varmap)
    n = len(grid)
    bad = [f"city {i} visited {grid[i].sum()} times" for i in range(n) if grid[i].sum() != 1]
    bad += [f"step {k} holds {grid[:, k].sum()} cities" for k in range(n) if grid[:, k].sum() != 1]
    if bad:
        return ViolationReport(tuple(bad))
    order = [int(np.argmax(grid[:, k])) for k in range(n)]
    return Tour.from_order(varmap.instance, order)


def decode_edges(a, varmap: VariableMap) -> CycleCover | ViolationReport:
    n = varmap.instance.n
    adj: list[list[int]] = [[] for _ in range(n)]
    for k, i, j in varmap.edge_items():
        if a[k]:
            adj[i].append(j)
            adj[j].append(i)
    bad = tuple(f"city {c} has degree {len(adj[c])}" for c in range(n) if len(adj[c]) != 2)
    if bad:
        return ViolationReport(bad)
    seen = [False] * n
    cycles = []
    for start in range(n):
        if seen[start]:
            continue
        cyc = [start]
        seen[start] = True
        prev, cur = start, min(adj[start])
        while cur != start:
            cyc.append(cur)
            seen[cur] = True
            nxt = adj[cur][0] if adj[cur][0] != prev else adj[cur][1]
            prev, cur = cur, nxt
        cycles.append(cyc)
    return CycleCover.from_cycles(varmap.instance, cycles)


def encode_tour(tour: Tour | Sequence[int], varmap: VariableMap) -> np.ndarray:
    """Binary configuration representing ``tour`` under ``varmap`` (slacks zero)."""
    order = tour.order if isinstance(tour, Tour) else tuple(tour)
    a = np.zeros(len(varmap), dtype=np.int8)
    n = len(order)
    if varmap.kind == PERMUTATION:
        if varmap.reduced:
            k0 = order.index(0)
            order = order[k0:] + order[:k0]
        for k, c in enumerate(order):
            key = ("x", c, k)
            if key in varmap.index:
                a[varmap.index[key]] = 1
        return a
    return encode_cycles([order], varmap)


def encode_cycles(cycles, varmap: VariableMap) -> np.ndarray:
    a = np.zeros(len(varmap), dtype=np.int8)
    for cyc in cycles:
        for k in range(len(cyc)):
            idx = varmap.edge_index(cyc[k], cyc[(k + 1) % len(cyc)])
            if idx is None:
                raise PreconditionError(f"edge {cyc[k]}-{cyc[(k + 1) % len(cyc)]} was truncated")
            a[idx] = 1
    return a


# -- resources and flip counts -----------------------------------------------


@dataclass(frozen=True)
class ResourceCount:
    qubits: int
    couplers: int


def resource_counts(model: QuadraticModel) -> ResourceCount:
    """Variables and nonzero couplings actually present in ``model``."""
    couplers = sum(1 for v in model.quadratic.values() if v != 0.0)
    return ResourceCount(model.num_vars, couplers)


def permutation_coupler_formula(n: int) -> int:
    """Closed form ``(N-2)(N-1)^2 + N^2(N-1)`` quoted for the permutation mapping."""
    return (n - 2) * (n - 1) ** 2 + n * n * (n - 1)


def flips_for_2opt_permutation(tour: Tour | Sequence[int], segment: tuple[int, int]) -> int:
    """Hamming distance between the full-grid encodings before and after
    reversing positions ``segment[0]..segment[1]`` (inclusive) of the tour."""
    order = list(tour.order if isinstance(tour, Tour) else tour)
    i, j = segment
    if not 0 <= i <= j < len(order):
        raise PreconditionError(f"invalid segment {segment} for a tour of {len(order)} cities")
    new = order[:i] + order[i:j + 1][::-1] + order[j + 1:]
    return int(np.sum(_grid(order) != _grid(new)))


def _grid(order):
    n = len(order)
    g = np.zeros((n, n), dtype=np.int8)
    for k, c in enumerate(order):
        g[c, k] = 1
    return g


def flips_for_kopt_edge(k: int) -> int:
    """Edge variables flipped by a k-opt move: k removed plus k added."""
    if k < 2:
        raise PreconditionError(f"k-opt needs k >= 2, got {k}")
    return 2 * k


def worst_case_crossing_flips(n: int, r: int) -> int:
    """Upper bound on permutation-grid flips needed to resolve ``r`` crossings."""
    if r < 1:
        raise PreconditionError(f"r must be >= 1, got {r}")
    return 2 * (n - math.ceil((n - (r - 1)) / (r + 1)))


# -- text export --------------------------------------------------------------


def _fmt(v: float) -> str:
    return repr(float(v))


def export_model(model: QuadraticModel | IsingModel, header: Sequence[str] = ()) -> str:
    """Plain-text coefficient listing; ``#`` lines carry metadata."""
    if isinstance(model, IsingModel):
        form, lin, quad = "ising", model.fields, model.couplings
    else:
        form, lin, quad = "qubo", model.linear, model.quadratic
    lines = [f"# {h}" for h in header]
    lines.append(f"form {form}")
    lines.append(f"vars {model.num_vars} offset {_fmt(model.offset)}")
    lines += [f"{i} {i} {_fmt(v)}" for i, v in enumerate(lin) if v != 0.0]
    lines += [f"{i} {j} {_fmt(v)}" for (i, j), v in quad.items() if v != 0.0]
    return "\n".join(lines) + "\n"


def parse_model(text: str) -> QuadraticModel | IsingModel:
    form, num, offset = None, None, None
    lin: dict[int, float] = {}
    quad: dict[tuple[int, int], float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            if parts[0] == "form":
                form = parts[1]
                if form not in ("qubo", "ising"):
                    raise InstanceParseError("form", f"unknown form {form!r}")
            elif parts[0] == "vars":
                num, offset = int(parts[1]), float(parts[3])
            else:
                i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
                if i == j:
                    lin[i] = v
                elif i < j:
                    quad[(i, j)] = v
                else:
                    raise InstanceParseError(f"line {lineno}", "coupling needs i < j")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, InstanceParseError):
                raise
            raise InstanceParseError(f"line {lineno}", f"cannot parse {raw!r}") from exc
    if num is None:
        raise InstanceParseError("vars", "missing header line")
    h = np.zeros(num)
    for i, v in lin.items():
        h[i] = v
    if form == "ising":
        return IsingModel(num, h, quad, offset)
    return QuadraticModel(num, h, quad, offset)
