"""Iterative subtour elimination around a pluggable inner solver.

Each round minimises the edge model plus every subtour penalty collected
so far. If the decoded cycle cover has more than one cycle, one penalty per
new cycle (up to complement) is added and the model is solved again.

Heuristic solvers draw a fresh seed every round and retry:
``SeedSequence([seed, iteration, retry]).generate_state(1, uint64)[0]``.
"""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .encoding import (
    PenaltyWeights,
    QuadraticModel,
    VariableMap,
    ViolationReport,
    add_slack_subtour_penalty,
    add_subtour_penalty,
    decode_edges,
    encode_edge,
)
from .errors import PreconditionError
from .instances import CycleCover, Tour, TspInstance
from .oracles import connection_stats, optimal_tour, penalized_ground_state
from .solvers import AnnealSchedule, simulated_annealing, simulated_quantum_annealing

SOLVERS = ("exact", "sa", "sqa")
MAX_DEGREE_RETRIES = 3


@dataclass(frozen=True)
class LoopPolicy:
    """How the loop adds constraints and which inner solver it uses.

    ``ratio_escalation`` multiplies eta / eta' once per round by raising
    the degree weight eta; it defaults to 2 for ``C=3`` and 1 for ``C=2``.
    """

    C: int = 2
    ratio_escalation: float | None = None
    max_iterations: int = 10
    solver: str = "exact"
    schedule: AnnealSchedule = field(default_factory=AnnealSchedule)
    eta: float | None = None
    eta_prime: float | None = None
    truncation: int | None = None
    constraints_per_round: str = "all"
    slack: bool = False

    def __post_init__(self):
        if self.C not in (2, 3):
            raise PreconditionError(f"C must be 2 or 3, got {self.C}")
        if self.escalation < 1:
            raise PreconditionError("escalation factor must be >= 1")
        if self.max_iterations < 1:
            raise PreconditionError("max_iterations must be >= 1")
        if self.solver not in SOLVERS:
            raise PreconditionError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if self.constraints_per_round not in ("all", "one"):
            raise PreconditionError("constraints_per_round must be 'all' or 'one'")

    @property
    def escalation(self) -> float:
        if self.ratio_escalation is not None:
            return self.ratio_escalation
        return 2.0 if self.C == 3 else 1.0


@dataclass(frozen=True)
class Constraint:
    subset: frozenset[int]
    C: int
    eta_prime: float


@dataclass
class IterationLog:
    iteration: int
    energy: float
    config: np.ndarray
    decoded: CycleCover | ViolationReport
    constraints_added: list[Constraint]
    eta: float
    retries: int
    wall_time: float
    seed: int | None = None


@dataclass
class LoopResult:
    instance: TspInstance
    tour: Tour | None
    logs: list[IterationLog]
    status: str

    @property
    def success(self) -> bool:
        return self.tour is not None

    @property
    def iterations(self) -> int:
        return len(self.logs)

    def constraints(self) -> list[Constraint]:
        return [c for log in self.logs for c in log.constraints_added]


def derive_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1, np.uint64)[0])


def canonical_subset(subset, n: int) -> frozenset[int]:
    """The side of the cut that does not contain city 0."""
    a = frozenset(subset)
    return frozenset(range(n)) - a if 0 in a else a


def detect_subtours(config, varmap) -> CycleCover | ViolationReport:
    """Cycle decomposition of the selected edges, or the degree violations."""
    return decode_edges(np.asarray(config).astype(int), varmap)


def build_model(inst, policy: LoopPolicy, constraints, eta: float) -> QuadraticModel:
    base = PenaltyWeights.default(inst)
    w = PenaltyWeights(eta, base.eta_prime, base.eta_double_prime)
    model = encode_edge(inst, w, policy.truncation)
    for c in constraints:
        if policy.slack:
            model = add_slack_subtour_penalty(model, c.subset, c.eta_prime)
        else:
            model = add_subtour_penalty(model, c.subset, c.C, c.eta_prime)
    return model


def _inner_solve(model, policy, seed) -> tuple[np.ndarray, float]:
    if policy.solver == "exact":
        return penalized_ground_state(model)
    run: Callable = simulated_annealing if policy.solver == "sa" else simulated_quantum_annealing
    res = run(model, policy.schedule, seed)
    return res.best_config, res.best_energy


def iterate_solve(inst: TspInstance, policy: LoopPolicy | None = None, seed: int = 0) -> LoopResult:
    policy = policy or LoopPolicy()
    base = PenaltyWeights.default(inst)
    eta0 = base.eta if policy.eta is None else policy.eta
    eta_prime = base.eta_prime if policy.eta_prime is None else policy.eta_prime
    constraints: list[Constraint] = []
    known: set[frozenset[int]] = set()
    logs: list[IterationLog] = []
    start = time.perf_counter()
    edge_vars = None
    for it in range(1, policy.max_iterations + 1):
        eta = eta0 * policy.escalation ** (it - 1)
        retries = 0
        while True:
            model = build_model(inst, policy, constraints, eta)
            edge_vars = sum(1 for lab in model.varmap.labels if lab[0] == "e")
            run_seed = None if policy.solver == "exact" else derive_seed(seed, it, retries)
            config, energy = _inner_solve(model, policy, run_seed)
            edge_map = model.varmap if not policy.slack else _edge_only(model.varmap)
            decoded = detect_subtours(config[:edge_vars], edge_map)
            if not isinstance(decoded, ViolationReport) or policy.solver == "exact":
                break
            if retries == MAX_DEGREE_RETRIES:
                break
            retries += 1
            eta *= 2.0
        added: list[Constraint] = []
        if isinstance(decoded, CycleCover) and not decoded.is_tour:
            for subset in decoded.subsets():
                key = canonical_subset(subset, inst.n)
                if key in known:
                    continue
                known.add(key)
                added.append(Constraint(key, policy.C, eta_prime))
                if policy.constraints_per_round == "one":
                    break
            constraints.extend(added)
        logs.append(
            IterationLog(it, energy, config, decoded, added, eta, retries,
                         time.perf_counter() - start, run_seed)
        )
        if isinstance(decoded, ViolationReport):
            return LoopResult(inst, None, logs, "degree_violation")
        if decoded.is_tour:
            return LoopResult(inst, decoded.to_tour(inst), logs, "solved")
    return LoopResult(inst, None, logs, "max_iterations")


def _edge_only(varmap):
    labels = tuple(lab for lab in varmap.labels if lab[0] == "e")
    return VariableMap(varmap.kind, varmap.instance, labels, varmap.truncation)


def is_optimal(result: LoopResult, reference: Tour | None = None, tol: float = 1e-9) -> bool:
    if result.tour is None:
        return False
    reference = optimal_tour(result.instance) if reference is None else reference
    return result.tour.length <= reference.length + tol


def required_connections_histogram(
    results: list[LoopResult], iteration: int, optimal: dict | None = None
) -> Counter:
    """Ground-truth cut counts of every subtour found at ``iteration``.

    ``optimal`` may map instance seeds to precomputed optimal tours.
    """
    hist: Counter = Counter()
    for res in results:
        if len(res.logs) < iteration:
            continue
        decoded = res.logs[iteration - 1].decoded
        if not isinstance(decoded, CycleCover) or decoded.is_tour:
            continue
        tour = None
        if optimal is not None:
            tour = optimal.get(res.instance.seed)
        for stat in connection_stats(res.instance, decoded, tour):
            hist[stat.required_connections] += 1
    return hist
