"""Exact ground-truth solvers.

* :func:`optimal_tour`: Held-Karp subset DP, n <= 20.
* :func:`min_cycle_cover`: minimum-weight partition into cycles of length
  >= 3 via subset DP, n <= 14.
* :func:`exhaustive_ground_state`: Gray-code enumeration of any QUBO with
  at most 26 variables.
* :func:`penalized_ground_state`: exact minimum of an edge model with
  squared penalties, posed as a MILP (HiGHS through scipy).
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import lil_matrix

from .encoding import QuadraticModel
from .errors import CapacityError, PreconditionError
from .instances import CycleCover, Tour, TspInstance

MAX_TOUR_CITIES = 20
MAX_COVER_CITIES = 14
MAX_EXHAUSTIVE_VARS = 26

_INF = np.inf


# -- Held-Karp ------------------------------------------------------------


@numba.njit(cache=True)
def _held_karp_table(d):
    # cities 1..n-1 live in bits 0..n-2; dp[S, j] = shortest path that starts
    # at city 0, visits exactly S and ends at city j + 1 (bit j in S)
    m = d.shape[0] - 1
    full = 1 << m
    dp = np.full((full, m), np.inf)
    for j in range(m):
        dp[1 << j, j] = d[0, j + 1]
    for s in range(1, full):
        for j in range(m):
            if not (s >> j) & 1:
                continue
            prev = s ^ (1 << j)
            if prev == 0:
                continue
            best = np.inf
            for k in range(m):
                if (prev >> k) & 1:
                    v = dp[prev, k] + d[k + 1, j + 1]
                    if v < best:
                        best = v
            dp[s, j] = best
    return dp


def optimal_tour(inst: TspInstance) -> Tour:
    """Provably shortest closed tour.

    Among optimal tours (within 1e-9 relative) the lexicographically
    smallest order starting at city 0 is returned.
    """
    n = inst.n
    if n > MAX_TOUR_CITIES:
        raise CapacityError(f"Held-Karp is capped at {MAX_TOUR_CITIES} cities, got {n}")
    d = np.ascontiguousarray(inst.d)
    dp = _held_karp_table(d)
    m = n - 1
    full = (1 << m) - 1
    best = min(dp[full, j] + d[j + 1, 0] for j in range(m))
    tol = 1e-9 * max(best, 1.0)
    # walk forward: the rest of a tour from city c covering R and returning
    # to 0 is the reverse of a dp path, so it costs d[c, j] + dp[R, j]
    order, cur, remaining, rem_cost = [0], 0, full, best
    while remaining:
        for j in range(m):
            if (remaining >> j) & 1:
                v = d[cur, j + 1] + dp[remaining, j]
                if v <= rem_cost + tol:
                    break
        order.append(j + 1)
        rem_cost -= d[cur, j + 1]
        cur = j + 1
        remaining ^= 1 << j
    return Tour.from_order(inst, order)


def brute_force_tour(inst: TspInstance) -> Tour:
    """Enumerate all (n-1)!/2 tours; reference for small n only."""
    from itertools import permutations

    best_len, best = np.inf, None
    for perm in permutations(range(1, inst.n)):
        if perm[0] > perm[-1]:
            continue
        order = (0,) + perm
        length = inst.tour_length(order)
        if length < best_len - 1e-12:
            best_len, best = length, order
    return Tour.from_order(inst, best)


# -- minimum cycle cover -----------------------------------------------------


@numba.njit(cache=True)
def _cycle_cover_tables(d):
    n = d.shape[0]
    full = 1 << n
    # path[S, j]: shortest path from lowest city of S through all of S to j
    path = np.full((full, n), np.inf)
    cyc = np.full(full, np.inf)
    for s in range(1, full):
        low = 0
        while not (s >> low) & 1:
            low += 1
        if s == (1 << low):
            path[s, low] = 0.0
            continue
        cnt = 0
        for j in range(n):
            if (s >> j) & 1:
                cnt += 1
        for j in range(n):
            if j == low or not (s >> j) & 1:
                continue
            prev = s ^ (1 << j)
            best = np.inf
            for k in range(n):
                if (prev >> k) & 1:
                    v = path[prev, k] + d[k, j]
                    if v < best:
                        best = v
            path[s, j] = best
        if cnt >= 3:
            best = np.inf
            for j in range(n):
                if j != low and (s >> j) & 1:
                    v = path[s, j] + d[j, low]
                    if v < best:
                        best = v
            cyc[s] = best
    g = np.full(full, np.inf)
    choice = np.zeros(full, dtype=np.int64)
    g[0] = 0.0
    for s in range(1, full):
        low = s & (-s)
        rest = s ^ low
        # enumerate submasks t of s containing the lowest city, ascending
        sub = 0
        while True:
            t = sub | low
            if cyc[t] < np.inf:
                v = cyc[t] + g[s ^ t]
                if v < g[s]:
                    g[s] = v
                    choice[s] = t
            if sub == rest:
                break
            sub = (sub - rest) & rest
    return path, cyc, g, choice


def _cycle_order(path, d, t):
    cities = [c for c in range(d.shape[0]) if (t >> c) & 1]
    low = cities[0]
    end = min((c for c in cities if c != low), key=lambda c: (path[t, c] + d[c, low], c))
    order = [end]
    s, cur = t, end
    while s != (1 << low):
        prev = s ^ (1 << cur)
        if prev == (1 << low):
            break
        nxt = min(
            (k for k in cities if (prev >> k) & 1 and k != low),
            key=lambda k: (path[prev, k] + d[k, cur], k),
        )
        order.append(nxt)
        s, cur = prev, nxt
    order.append(low)
    return order[::-1]


def min_cycle_cover(inst: TspInstance) -> CycleCover:
    """Cheapest partition of all cities into cycles of at least 3 cities."""
    n = inst.n
    if n > MAX_COVER_CITIES:
        raise CapacityError(f"cycle-cover DP is capped at {MAX_COVER_CITIES} cities, got {n}")
    d = np.ascontiguousarray(inst.d)
    path, _, g, choice = _cycle_cover_tables(d)
    cycles, s = [], (1 << n) - 1
    while s:
        t = int(choice[s])
        cycles.append(_cycle_order(path, d, t))
        s ^= t
    return CycleCover.from_cycles(inst, cycles)


def two_regular_graphs(n: int):
    """Yield every labelled 2-regular simple graph on ``n`` vertices as a cycle list.

    Reference enumerator for small n.
    """
    from itertools import combinations, permutations

    def rec(remaining):
        if not remaining:
            yield []
            return
        first, rest = remaining[0], remaining[1:]
        for size in range(2, len(rest) + 1):
            for others in combinations(rest, size):
                left = [c for c in rest if c not in others]
                if 0 < len(left) < 3:
                    continue
                for perm in permutations(others):
                    if perm[0] > perm[-1]:
                        continue
                    for tail in rec(left):
                        yield [(first,) + perm] + tail

    yield from rec(list(range(n)))


# -- connection statistics ------------------------------------------------------


@dataclass(frozen=True)
class ConnectionStat:
    subset: frozenset[int]
    required_connections: int


def cut_count(edges, subset) -> int:
    a = set(subset)
    return sum(1 for e in edges if len(a & set(e)) == 1)


def connection_stats(inst: TspInstance, cover: CycleCover, tour: Tour | None = None):
    """Optimal-tour edges crossing each cycle's city set."""
    if len(cover.cycles) < 2:
        return []
    tour = optimal_tour(inst) if tour is None else tour
    edges = tour.edges()
    return [ConnectionStat(s, cut_count(edges, s)) for s in cover.subsets()]


# -- exhaustive QUBO ground state -------------------------------------------------


@numba.njit(cache=True)
def _gray_search(h, q, offset, tol):
    n = h.shape[0]
    a = np.zeros(n, dtype=np.int8)
    field = h.copy()
    e = offset
    best_e = e
    best_mask = np.int64(0)
    mask = np.int64(0)
    for t in range(1, np.int64(1) << n):
        b = 0
        while not (t >> b) & 1:
            b += 1
        delta = 1 - 2 * a[b]
        e += delta * field[b]
        a[b] ^= 1
        mask ^= np.int64(1) << b
        for j in range(n):
            field[j] += q[j, b] * delta
        if e < best_e - tol:
            best_e = e
            best_mask = mask
        elif e <= best_e + tol:
            # tie: prefer the lexicographically smaller tuple (a_0 first)
            x = mask ^ best_mask
            low = 0
            while not (x >> low) & 1:
                low += 1
            if not (mask >> low) & 1:
                best_e = min(best_e, e)
                best_mask = mask
    return best_mask


def exhaustive_ground_state(model: QuadraticModel) -> tuple[np.ndarray, float]:
    """Global minimum by enumeration of all 2^n configurations.

    Ties (within 1e-9 of the energy scale) go to the lexicographically
    smallest configuration, comparing variable 0 first.
    """
    n = model.num_vars
    if n > MAX_EXHAUSTIVE_VARS:
        raise CapacityError(f"exhaustive search is capped at {MAX_EXHAUSTIVE_VARS} variables")
    if n == 0:
        return np.zeros(0, dtype=np.int8), float(model.offset)
    h, q = model.dense()
    scale = 1.0 + float(np.abs(h).sum() + np.abs(q).sum() / 2 + abs(model.offset))
    mask = int(_gray_search(h, q, float(model.offset), 1e-9 * scale))
    config = np.array([(mask >> i) & 1 for i in range(n)], dtype=np.int8)
    return config, model.energy(config)


# -- exact minimum of penalised edge models --------------------------------------------


def penalized_ground_state(model: QuadraticModel, time_limit: float | None = None):
    """Exact minimum of ``cost + sum of squared penalties`` as a MILP.

    Every penalty ``w (c - y)^2`` has integer coefficients, so ``y`` is
    integer and the convex square is represented exactly by its chords
    between consecutive integers. Returns ``(config, energy)`` with the
    energy evaluated on the expanded QUBO.
    """
    if model.cost is None:
        raise PreconditionError("model carries no structured penalty form")
    if model.cost_quadratic:
        raise PreconditionError("MILP oracle supports linear costs only")
    n, p = model.num_vars, len(model.penalties)
    rows = []
    for k, pen in enumerate(model.penalties):
        coeffs = np.array(pen.coeffs, dtype=float)
        if not np.all(coeffs == np.round(coeffs)):
            raise PreconditionError(f"penalty {pen.label!r} has non-integer coefficients")
        lo = int(coeffs[coeffs < 0].sum())
        hi = int(coeffs[coeffs > 0].sum())
        f = lambda y, pen=pen: pen.weight * (pen.target - y) ** 2  # noqa: E731
        for y0 in range(lo, max(hi, lo + 1)):
            slope = f(y0 + 1) - f(y0)
            # t_k >= f(y0) + slope * (y - y0)  <=>  slope*y - t_k <= slope*y0 - f(y0)
            rows.append((k, pen, slope, slope * y0 - f(y0)))
    a = lil_matrix((len(rows), n + p))
    ub = np.empty(len(rows))
    for r, (k, pen, slope, rhs) in enumerate(rows):
        for i, c in zip(pen.indices, pen.coeffs):
            a[r, i] += slope * c
        a[r, n + k] = -1.0
        ub[r] = rhs
    c = np.concatenate([model.cost, np.ones(p)])
    integrality = np.concatenate([np.ones(n), np.zeros(p)])
    bounds = Bounds(np.concatenate([np.zeros(n), np.zeros(p)]),
                    np.concatenate([np.ones(n), np.full(p, np.inf)]))
    constraints = [LinearConstraint(a.tocsr(), -np.inf, ub)] if rows else []
    options = {"mip_rel_gap": 0.0}
    if time_limit is not None:
        options["time_limit"] = time_limit
    res = milp(c, constraints=constraints, integrality=integrality, bounds=bounds, options=options)
    if res.x is None or res.status != 0:
        raise CapacityError(f"MILP solver did not reach a proven optimum: {res.message}")
    config = np.round(res.x[:n]).astype(np.int8)
    return config, model.energy(config)

