"""Heuristic minimisers: simulated annealing, path-integral simulated quantum
annealing, and a 2-opt local-search baseline for tours.

One sweep proposes a single-spin flip for every variable in index order
(and, for SQA, for every Trotter slice in order). All randomness comes
from ``Generator(PCG64(seed))`` passed straight into the jitted kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numba
import numpy as np

from .encoding import QuadraticModel, to_ising
from .errors import PreconditionError
from .instances import Tour, TspInstance, make_rng

# floor on the transverse field relative to the energy scale; keeps
# log(tanh(beta * gamma / P)) finite
GAMMA_FLOOR = 1e-8


@dataclass(frozen=True)
class AnnealSchedule:
    """Annealing parameters. ``None`` entries take model-dependent defaults.

    SA: temperature falls geometrically from ``t0`` to ``tf``.
    SQA: ``gamma`` falls linearly from ``gamma0`` to ``gammaf`` while the
    problem weight B rises linearly to 1; ``beta`` is the inverse
    temperature of the full path integral and ``slices`` the Trotter number P.
    """

    total_sweeps: int = 1000
    t0: float | None = None
    tf: float | None = None
    gamma0: float | None = None
    gammaf: float | None = None
    slices: int = 32
    beta: float | None = None
    record_trace: bool = False

    def __post_init__(self):
        if self.total_sweeps < 1:
            raise PreconditionError("total_sweeps must be >= 1")
        if self.slices < 2:
            raise PreconditionError("SQA needs at least 2 Trotter slices")
        for name in ("t0", "tf", "gamma0", "gammaf", "beta"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise PreconditionError(f"{name} must be strictly positive, got {v}")
        if self.t0 is not None and self.tf is not None and self.tf > self.t0:
            raise PreconditionError("temperature must be non-increasing (tf <= t0)")
        if self.gamma0 is not None and self.gammaf is not None and self.gammaf > self.gamma0:
            raise PreconditionError("transverse field must be non-increasing (gammaf <= gamma0)")

    def resolved(self, model: QuadraticModel) -> "AnnealSchedule":
        """Fill defaults from the model's energy scale ``T0``."""
        scale = energy_scale(model)
        t0 = scale if self.t0 is None else self.t0
        return replace(
            self,
            t0=t0,
            tf=1e-3 * t0 if self.tf is None else self.tf,
            gamma0=3.0 * t0 if self.gamma0 is None else self.gamma0,
            gammaf=1e-4 * t0 if self.gammaf is None else self.gammaf,
            beta=64.0 / t0 if self.beta is None else self.beta,
        )

    def temperatures(self) -> np.ndarray:
        s = self.total_sweeps
        if s == 1:
            return np.array([self.tf])
        return self.t0 * (self.tf / self.t0) ** (np.arange(s) / (s - 1))


def energy_scale(model: QuadraticModel) -> float:
    """Largest total local field ``|h_i| + sum_j |J_ij|`` (1.0 for an empty model)."""
    h, q = model.dense()
    if model.num_vars == 0:
        return 1.0
    scale = float(np.max(np.abs(h) + np.abs(q).sum(axis=1)))
    return scale if scale > 0 else 1.0


@dataclass(frozen=True)
class SolveResult:
    best_config: np.ndarray
    best_energy: float
    seed: int
    sweeps_used: int
    energy_trace: np.ndarray | None = None


# -- simulated annealing ------------------------------------------------------


@numba.njit(cache=True)
def _sa_kernel(h, q, offset, temps, rng, record):
    n = h.shape[0]
    a = np.zeros(n, dtype=np.int8)
    for i in range(n):
        a[i] = 1 if rng.random() < 0.5 else 0
    field = h.copy()
    e = offset
    for i in range(n):
        if a[i]:
            e += h[i]
            for j in range(n):
                field[j] += q[j, i]
    for i in range(n):
        for j in range(i + 1, n):
            e += q[i, j] * a[i] * a[j]
    best_e = e
    best = a.copy()
    trace = np.empty(temps.shape[0] if record else 0)
    for s in range(temps.shape[0]):
        t = temps[s]
        for i in range(n):
            sign = 1 - 2 * a[i]
            delta = sign * field[i]
            if delta <= 0.0 or rng.random() < math.exp(-delta / t):
                a[i] ^= 1
                e += delta
                for j in range(n):
                    field[j] += q[j, i] * sign
                if e < best_e:
                    best_e = e
                    best[:] = a
        if record:
            trace[s] = best_e
    return best, trace


def simulated_annealing(
    model: QuadraticModel, schedule: AnnealSchedule | None = None, seed: int = 0
) -> SolveResult:
    """Metropolis single-flip annealing; returns the best configuration ever visited."""
    schedule = (schedule or AnnealSchedule()).resolved(model)
    h, q = model.dense()
    best, trace = _sa_kernel(
        h, q, float(model.offset), schedule.temperatures(), make_rng(seed), schedule.record_trace
    )
    return SolveResult(
        best.copy(), model.energy(best), seed, schedule.total_sweeps,
        trace if schedule.record_trace else None,
    )


@numba.njit(cache=True)
def _metropolis_counts(h, q, t, sweeps, rng):
    n = h.shape[0]
    a = np.zeros(n, dtype=np.int8)
    field = h.copy()
    mask = 0
    counts = np.zeros(1 << n, dtype=np.int64)
    for _ in range(sweeps):
        for i in range(n):
            sign = 1 - 2 * a[i]
            delta = sign * field[i]
            if delta <= 0.0 or rng.random() < math.exp(-delta / t):
                a[i] ^= 1
                mask ^= 1 << i
                for j in range(n):
                    field[j] += q[j, i] * sign
        counts[mask] += 1
    return counts


def metropolis_histogram(model: QuadraticModel, temperature: float, sweeps: int, seed: int = 0):
    """Fixed-temperature chain; state visit frequencies recorded after every sweep.

    Index ``m`` of the result is the configuration with ``a_i = (m >> i) & 1``.
    """
    if model.num_vars > 20:
        raise PreconditionError("histogram over states needs num_vars <= 20")
    h, q = model.dense()
    counts = _metropolis_counts(h, q, float(temperature), int(sweeps), make_rng(seed))
    return counts / counts.sum()


# -- simulated quantum annealing -------------------------------------------------------


@numba.njit(cache=True)
def _sqa_kernel(h, jm, offset, n_slices, beta, gammas, bs, rng):
    n = h.shape[0]
    p = n_slices
    sig = np.empty((p, n), dtype=np.int8)
    for k in range(p):
        for i in range(n):
            sig[k, i] = 1 if rng.random() < 0.5 else -1
    field = np.empty((p, n))
    e = np.empty(p)
    for k in range(p):
        ek = offset
        for i in range(n):
            f = h[i]
            for j in range(n):
                f += jm[i, j] * sig[k, j]
            field[k, i] = f
            ek += h[i] * sig[k, i]
            for j in range(i + 1, n):
                ek += jm[i, j] * sig[k, i] * sig[k, j]
        e[k] = ek
    best_e = e[0]
    best = sig[0].copy()
    for k in range(1, p):
        if e[k] < best_e:
            best_e = e[k]
            best[:] = sig[k]
    w = beta / p
    for s in range(gammas.shape[0]):
        kperp = -0.5 * math.log(math.tanh(w * gammas[s]))
        wb = w * bs[s]
        for k in range(p):
            up = sig[(k + 1) % p]
            dn = sig[(k - 1) % p]
            for i in range(n):
                si = sig[k, i]
                de = -2.0 * si * field[k, i]
                action = wb * de + 2.0 * kperp * si * (up[i] + dn[i])
                if action <= 0.0 or rng.random() < math.exp(-action):
                    sig[k, i] = -si
                    for j in range(n):
                        field[k, j] -= 2.0 * jm[j, i] * si
                    e[k] += de
                    if e[k] < best_e:
                        best_e = e[k]
                        best[:] = sig[k]
    return best


def simulated_quantum_annealing(
    model: QuadraticModel, schedule: AnnealSchedule | None = None, seed: int = 0
) -> SolveResult:
    """Path-integral Monte Carlo over P coupled replicas of the Ising form.

    Slices interact through ``J_perp = -(P / 2 beta) ln tanh(beta Gamma / P)``.
    The best configuration seen on any slice, judged by the model energy,
    is returned.
    """
    schedule = (schedule or AnnealSchedule()).resolved(model)
    ising = to_ising(model)
    h, jm = ising.dense()
    steps = schedule.total_sweeps
    frac = (np.arange(steps) + 1.0) / steps
    floor = GAMMA_FLOOR * energy_scale(model)
    gammas = np.maximum(schedule.gamma0 + (schedule.gammaf - schedule.gamma0) * frac, floor)
    spins = _sqa_kernel(
        h, jm, float(ising.offset), schedule.slices, float(schedule.beta), gammas, frac,
        make_rng(seed),
    )
    config = ((1 - spins) // 2).astype(np.int8)
    return SolveResult(config, model.energy(config), seed, steps)


def random_qubo(n: int, seed: int) -> QuadraticModel:
    """Dense QUBO with coefficients drawn uniformly from [-1, 1)."""
    rng = make_rng(seed)
    h = rng.uniform(-1.0, 1.0, n)
    quad = {(i, j): float(rng.uniform(-1.0, 1.0)) for i in range(n) for j in range(i + 1, n)}
    return QuadraticModel(n, h, quad, 0.0)


# -- 2-opt -------------------------------------------------------------------


def two_opt_descent(inst: TspInstance, order) -> list[int]:
    """Steepest-descent 2-opt from ``order`` until no reversal improves it."""
    d = inst.d
    order = list(order)
    n = len(order)
    while True:
        o = np.array(order)
        nxt = np.roll(o, -1)
        # gain of replacing edges (o[i], o[i+1]) and (o[j], o[j+1])
        delta = (
            d[o[:, None], o[None, :]] + d[nxt[:, None], nxt[None, :]]
            - d[o, nxt][:, None] - d[o, nxt][None, :]
        )
        delta = np.triu(delta, 2)
        delta[0, n - 1] = 0.0
        i, j = np.unravel_index(np.argmin(delta), delta.shape)
        if delta[i, j] >= -1e-12:
            return order
        order[i + 1 : j + 1] = order[i + 1 : j + 1][::-1]


def two_opt_baseline(inst: TspInstance, seed: int = 0, restarts: int = 20) -> Tour:
    """Random restarts of steepest-descent 2-opt; shortest result wins."""
    if inst.n < 4:
        raise PreconditionError("2-opt needs at least 4 cities")
    rng = make_rng(seed)
    best = None
    for _ in range(restarts):
        tour = Tour.from_order(inst, two_opt_descent(inst, rng.permutation(inst.n)))
        if best is None or tour.length < best.length - 1e-12:
            best = tour
    return best
