"""Statevector simulation of digital (Trotterised) quantum annealing.

Qubit ``q`` is bit ``q`` of the basis-state index. Problem qubits come
first, shared ancillas after them. hbar = 1 throughout.

The driver is ``-sum_q X_q``, whose ground state is the uniform
superposition, so one driver step multiplies by ``exp(+i * angle * X_q)``
on every problem qubit. The problem step multiplies ``|z>`` by
``exp(-i * scale * E(z))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .encoding import PenaltyWeights, QuadraticModel, decode_edges, encode_edge
from .errors import CapacityError, PreconditionError
from .instances import CycleCover, TspInstance, make_rng

MAX_QUBITS = 26
NORM_TOL = 1e-10


@dataclass
class QuantumState:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.n_qubits > MAX_QUBITS:
            raise CapacityError(f"statevector capped at {MAX_QUBITS} qubits, got {self.n_qubits}")
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise ValueError("amplitude vector has the wrong length")

    @classmethod
    def basis(cls, n_qubits: int, index: int = 0) -> "QuantumState":
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(n_qubits, amps)

    @classmethod
    def uniform(cls, n_qubits: int, qubits: Sequence[int] | None = None) -> "QuantumState":
        """Equal superposition over ``qubits`` (default all), others in |0>."""
        qubits = range(n_qubits) if qubits is None else qubits
        mask = sum(1 << q for q in qubits)
        idx = np.arange(1 << n_qubits)
        amps = np.where((idx & ~mask) == 0, 1.0, 0.0).astype(complex)
        return cls(n_qubits, amps / np.linalg.norm(amps))

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "QuantumState":
        return QuantumState(self.n_qubits, self.amplitudes.copy())

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def _bit(n_qubits, q):
    return (np.arange(1 << n_qubits) >> q) & 1


# -- elementary gates (in place) ---------------------------------------------------


def apply_x(state: QuantumState, q: int) -> None:
    idx = np.arange(1 << state.n_qubits)
    state.amplitudes = state.amplitudes[idx ^ (1 << q)]


def apply_ccx(state: QuantumState, c1: int, c2: int, target: int) -> None:
    idx = np.arange(1 << state.n_qubits)
    sel = ((idx >> c1) & 1) & ((idx >> c2) & 1)
    src = np.where(sel == 1, idx ^ (1 << target), idx)
    state.amplitudes = state.amplitudes[src]


def apply_cphase(state: QuantumState, a: int, b: int, theta: float) -> None:
    """Multiply states with both ``a`` and ``b`` set by ``exp(-i theta)``."""
    idx = np.arange(1 << state.n_qubits)
    sel = ((idx >> a) & 1) & ((idx >> b) & 1)
    state.amplitudes = np.where(sel == 1, state.amplitudes * np.exp(-1j * theta), state.amplitudes)


def apply_phase(state: QuantumState, q: int, theta: float) -> None:
    sel = _bit(state.n_qubits, q)
    state.amplitudes = np.where(sel == 1, state.amplitudes * np.exp(-1j * theta), state.amplitudes)


# -- annealing steps -----------------------------------------------------------


def apply_driver(state: QuantumState, angle: float, qubits: Sequence[int] | None = None) -> QuantumState:
    """``exp(i * angle * X_q)`` on each listed qubit (default: all)."""
    qubits = range(state.n_qubits) if qubits is None else qubits
    c, s = math.cos(angle), math.sin(angle)
    amps = state.amplitudes
    for q in qubits:
        v = amps.reshape(-1, 2, 1 << q)
        a0, a1 = v[:, 0, :].copy(), v[:, 1, :].copy()
        v[:, 0, :] = c * a0 + 1j * s * a1
        v[:, 1, :] = 1j * s * a0 + c * a1
    return state


def problem_diagonal(model: QuadraticModel, n_qubits: int | None = None) -> np.ndarray:
    """Model energy of every basis state; extra (ancilla) qubits are ignored."""
    n_qubits = model.num_vars if n_qubits is None else n_qubits
    idx = np.arange(1 << n_qubits)
    bits = ((idx[:, None] >> np.arange(model.num_vars)[None, :]) & 1).astype(float)
    return model.energies(bits)


def apply_problem_phase(state: QuantumState, model: QuadraticModel, scale: float) -> QuantumState:
    """``exp(-i * scale * E(z))`` built from single- and two-qubit Z phases."""
    if model.num_vars > state.n_qubits:
        raise PreconditionError("model has more variables than the state has qubits")
    for i, h in enumerate(model.linear):
        if h != 0.0:
            apply_phase(state, i, scale * h)
    for (i, j), v in model.quadratic.items():
        if v != 0.0:
            apply_cphase(state, i, j, scale * v)
    state.amplitudes = state.amplitudes * np.exp(-1j * scale * model.offset)
    return state


def apply_diagonal(state: QuantumState, energies: np.ndarray, scale: float) -> QuantumState:
    state.amplitudes = state.amplitudes * np.exp(-1j * scale * energies)
    return state


# -- subtour gadget ---------------------------------------------------------------


@dataclass(frozen=True)
class GadgetLayout:
    """Connection qubits, ancillas (``max(m - 2, 0)``) and phase angle."""

    connections: tuple[int, ...]
    ancillas: tuple[int, ...]
    theta: float
    schedule: str = "tree"

    def __post_init__(self):
        m = len(self.connections)
        if m < 2:
            raise PreconditionError(f"gadget needs at least 2 connection qubits, got {m}")
        if len(self.ancillas) != m - 2:
            raise PreconditionError(f"m={m} needs {m - 2} ancillas, got {len(self.ancillas)}")
        if len(set(self.connections) | set(self.ancillas)) != 2 * m - 2:
            raise PreconditionError("connection and ancilla qubits must be distinct")
        if self.schedule not in ("tree", "ladder"):
            raise PreconditionError("schedule must be 'tree' or 'ladder'")


@dataclass(frozen=True)
class Circuit:
    gates: tuple[tuple, ...]
    layers: int

    @property
    def toffoli_count(self) -> int:
        return sum(1 for g in self.gates if g[0] == "ccx")


def gadget_circuit(layout: GadgetLayout) -> Circuit:
    """Open-controlled AND of the connection qubits, phase on the root, uncompute.

    The tree schedule pairs nodes level by level (depth ~log m); the ladder
    chains them (depth ~m). Both use ``m - 2`` Toffolis each way.
    """
    xs = list(layout.connections)
    free = list(layout.ancillas)
    compute: list[tuple] = []
    levels = 0
    nodes = xs
    if layout.schedule == "tree":
        while len(nodes) > 2:
            nxt = []
            for k in range(0, len(nodes) - 1, 2):
                e = free.pop(0)
                compute.append(("ccx", nodes[k], nodes[k + 1], e))
                nxt.append(e)
            if len(nodes) % 2:
                nxt.append(nodes[-1])
            nodes = nxt
            levels += 1
    else:
        acc = nodes[0]
        for q in nodes[1:-1]:
            e = free.pop(0)
            compute.append(("ccx", acc, q, e))
            acc = e
            levels += 1
        nodes = [acc, nodes[-1]]
    flips = [("x", q) for q in xs]
    gates = flips + compute + [("cp", nodes[0], nodes[1], layout.theta)] + compute[::-1] + flips
    return Circuit(tuple(gates), 2 * levels + 3)


def _run_gates(state: QuantumState, gates) -> None:
    for g in gates:
        if g[0] == "x":
            apply_x(state, g[1])
        elif g[0] == "ccx":
            apply_ccx(state, g[1], g[2], g[3])
        elif g[0] == "cp":
            apply_cphase(state, g[1], g[2], g[3])
        else:
            raise ValueError(f"unknown gate {g[0]!r}")


def _ancilla_leak(state: QuantumState, ancillas) -> float:
    if not ancillas:
        return 0.0
    mask = sum(1 << a for a in ancillas)
    idx = np.arange(1 << state.n_qubits)
    return float(np.sum(np.abs(state.amplitudes[(idx & mask) != 0]) ** 2))


def apply_subtour_gadget(
    state: QuantumState, layout: GadgetLayout, check_ancillas: bool = True
) -> QuantumState:
    """Phase ``exp(-i theta)`` on exactly the states whose connection qubits are all 0."""
    if check_ancillas and _ancilla_leak(state, layout.ancillas) > 1e-24:
        raise PreconditionError("gadget ancillas must start in |0>")
    _run_gates(state, gadget_circuit(layout).gates)
    return state


def gadget_unitary(layout: GadgetLayout, n_qubits: int) -> np.ndarray:
    """Dense matrix of the gadget circuit, column by column from basis states."""
    dim = 1 << n_qubits
    u = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        st = QuantumState.basis(n_qubits, col)
        apply_subtour_gadget(st, layout, check_ancillas=False)
        u[:, col] = st.amplitudes
    return u


def gadget_reference(layout: GadgetLayout, n_qubits: int) -> np.ndarray:
    """Diagonal with ``exp(-i theta)`` where every connection bit is 0, else 1."""
    idx = np.arange(1 << n_qubits)
    mask = sum(1 << q for q in layout.connections)
    return np.where((idx & mask) == 0, np.exp(-1j * layout.theta), 1.0 + 0j)


# -- end-to-end digital annealing ---------------------------------------------------------


@dataclass
class DigitalResult:
    model: QuadraticModel
    probabilities: np.ndarray
    n_qubits: int
    best_index: int
    best_config: np.ndarray
    decoded: object
    gadget_qubits: list[tuple[int, ...]] = field(default_factory=list)

    def bitstring(self, index: int) -> str:
        return "".join(str((index >> i) & 1) for i in range(self.model.num_vars))

    def config(self, index: int) -> np.ndarray:
        return np.array([(index >> i) & 1 for i in range(self.model.num_vars)], dtype=np.int8)

    def mass_where(self, predicate) -> float:
        return float(sum(p for k, p in enumerate(self.probabilities) if predicate(k)))

    def empty_cut_mass(self, subset) -> float:
        cut = self.model.varmap.cut_edges(subset)
        mask = sum(1 << q for q in cut)
        idx = np.arange(len(self.probabilities))
        return float(self.probabilities[(idx & mask) == 0].sum())

    def sample(self, shots: int, seed: int = 0) -> dict[int, int]:
        counts = make_rng(seed).multinomial(shots, self.probabilities / self.probabilities.sum())
        return {k: int(c) for k, c in enumerate(counts) if c}


def structure_tag(decoded) -> str:
    if isinstance(decoded, CycleCover):
        return "tour" if decoded.is_tour else f"cover:{len(decoded.cycles)}"
    return "violation"


def run_digital_qa(
    inst: TspInstance,
    steps: int,
    dt: float,
    subsets: Sequence[tuple[Sequence[int], float]] = (),
    eta: float | None = None,
    truncation: int | None = None,
    schedule: str = "tree",
) -> DigitalResult:
    """Trotterised anneal ``A = 1 - t_k``, ``B = t_k``, ``t_k = (k + 1/2) / steps``.

    Each step applies the driver (angle ``A dt``), the edge-model phase
    (scale ``B dt``) and one gadget per registered subset (angle
    ``B eta' dt``). Returns exact outcome probabilities over the problem
    qubits.
    """
    if steps < 0 or dt < 0:
        raise PreconditionError("steps and dt must be non-negative")
    base = PenaltyWeights.default(inst)
    w = base if eta is None else PenaltyWeights(eta, base.eta_prime, base.eta_double_prime)
    model = encode_edge(inst, w, truncation)
    nprob = model.num_vars
    cuts = [(tuple(model.varmap.cut_edges(a)), float(ep)) for a, ep in subsets]
    n_anc = max((len(c) - 2 for c, _ in cuts), default=0)
    total = nprob + max(n_anc, 0)
    if total > MAX_QUBITS:
        raise CapacityError(f"{total} qubits exceed the statevector cap of {MAX_QUBITS}")
    state = QuantumState.uniform(total, range(nprob))
    energies = problem_diagonal(model, total)
    pool = tuple(range(nprob, total))
    for k in range(steps):
        t = (k + 0.5) / steps
        apply_driver(state, (1.0 - t) * dt, range(nprob))
        apply_diagonal(state, energies, t * dt)
        for cut, ep in cuts:
            layout = GadgetLayout(cut, pool[: len(cut) - 2], t * ep * dt, schedule)
            apply_subtour_gadget(state, layout)
    probs = state.probabilities().reshape(-1, 1 << nprob).sum(axis=0)
    best = int(np.argmax(probs))
    config = np.array([(best >> i) & 1 for i in range(nprob)], dtype=np.int8)
    return DigitalResult(
        model, probs, total, best, config, decode_edges(config, model.varmap), [c for c, _ in cuts]
    )


@dataclass(frozen=True)
class DigitalResources:
    problem_qubits: int
    ancillas: tuple[int, ...]
    toffolis: tuple[int, ...]
    depths: tuple[int, ...]

    @property
    def total_qubits(self) -> int:
        return self.problem_qubits + max(self.ancillas, default=0)


def resource_report_digital(n: int, ms: Sequence[int]) -> DigitalResources:
    """Untruncated edge qubits plus per-gadget ancillas, Toffolis and depth for cut sizes ``ms``."""
    problem = n * (n - 1) // 2
    anc = tuple(max(m - 2, 0) for m in ms)
    tof = tuple(2 * a for a in anc)
    depth = tuple(2 * math.ceil(math.log2(m)) + 1 for m in ms)
    return DigitalResources(problem, anc, tof, depth)
