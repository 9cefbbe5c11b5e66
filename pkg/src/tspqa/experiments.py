"""Seeded ensemble experiments with CSV/JSON reports.

Instance ``k`` of an ensemble ``(n, count, seed)`` is
``generate_instance(n, seed + k)``. Optimality is always judged against
the exact oracles, never against heuristic energies.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .instances import generate_instance, neighbor_ranks
from .oracles import connection_stats, min_cycle_cover, optimal_tour
from .solvers import AnnealSchedule
from .subtour_loop import LoopPolicy, is_optimal, iterate_solve

REPORT_FORMAT = 1
DEFAULT_MCS_GRID = (100, 1000, 10_000, 100_000)


@dataclass
class ExperimentReport:
    experiment: str
    params: dict
    rows: list[dict]
    summary: dict
    version: str = __version__
    metadata: dict = field(default_factory=dict)

    def to_csv(self, command: str | None = None) -> str:
        buf = io.StringIO()
        if command:
            buf.write(f"# command: {command}\n")
        if self.rows:
            writer = csv.DictWriter(buf, fieldnames=list(self.rows[0]), lineterminator="\n")
            writer.writeheader()
            writer.writerows(self.rows)
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "format": REPORT_FORMAT,
            "version": self.version,
            "params": self.params,
            "summary": self.summary,
            "rows": self.rows,
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentReport":
        return cls(doc["experiment"], doc["params"], doc["rows"], doc["summary"],
                   doc.get("version", "?"), doc.get("metadata", {}))

    def write(self, out_dir, command: str | None = None) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{self.experiment}.csv"
        json_path = out / f"{self.experiment}.json"
        csv_path.write_text(self.to_csv(command))
        if command:
            self.metadata["command"] = command
        json_path.write_text(self.to_json())
        return csv_path, json_path

    def summary_table(self) -> str:
        flat = list(_flatten(self.summary))
        width = max((len(k) for k, _ in flat), default=0)
        lines = [f"{self.experiment} (n={self.params.get('n')}, count={self.params.get('count')}, "
                 f"seed={self.params.get('seed')})"]
        lines += [f"  {k.ljust(width)}  {_show(v)}" for k, v in flat]
        return "\n".join(lines)


def _flatten(d, prefix=""):
    for k, v in sorted(d.items()):
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _flatten(v, key + ".")
        else:
            yield key, v


def _show(v):
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def _map(fn: Callable, items: Sequence, jobs: int = 1) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _histogram(counter: Counter) -> dict:
    return {str(k): counter[k] for k in sorted(counter)}


def _shares(counter: Counter) -> dict:
    total = sum(counter.values())
    return {str(k): (counter[k] / total if total else 0.0) for k in sorted(counter)}


def _ensemble(params):
    return [(params["n"], params["seed"] + k) for k in range(params["count"])]


# -- ground-state subtours ---------------------------------------------------------


def _cover_row(args):
    n, s = args
    inst = generate_instance(n, s)
    cover = min_cycle_cover(inst)
    tour = optimal_tour(inst)
    stats = connection_stats(inst, cover, tour)
    return {
        "seed": s,
        "n": n,
        "optimal_length": tour.length,
        "cover_weight": cover.total_weight,
        "cycles": len(cover.cycles),
        "cycle_sizes": ";".join(str(len(c)) for c in cover.cycles),
        "split": int(len(cover.cycles) > 1),
    }, [
        {
            "seed": s,
            "subtour": ";".join(str(c) for c in sorted(st.subset)),
            "size": len(st.subset),
            "required_connections": st.required_connections,
        }
        for st in stats
    ]


def exp_subtour_fraction(n: int = 12, count: int = 100, seed: int = 0, jobs: int = 1):
    """How often the minimum cycle cover breaks into several cycles."""
    params = {"n": n, "count": count, "seed": seed}
    start = time.perf_counter()
    rows = [r for r, _ in _map(_cover_row, _ensemble(params), jobs)]
    sizes = Counter(int(x) for r in rows if r["split"] for x in r["cycle_sizes"].split(";"))
    split = sum(r["split"] for r in rows)
    summary = {
        "split_fraction": split / len(rows) if rows else 0.0,
        "split_instances": split,
        "subtour_size_histogram": _histogram(sizes),
        "modal_subtour_size": max(sorted(sizes), key=lambda k: sizes[k]) if sizes else None,
    }
    return ExperimentReport("subtour-fraction", params, rows, summary,
                            metadata={"wall_time": time.perf_counter() - start})


def exp_ground_connection_distribution(n: int = 12, count: int = 100, seed: int = 0, jobs: int = 1):
    """Optimal-tour cut counts of every ground-state subtour."""
    params = {"n": n, "count": count, "seed": seed}
    start = time.perf_counter()
    rows = [row for _, stats in _map(_cover_row, _ensemble(params), jobs) for row in stats]
    hist = Counter(r["required_connections"] for r in rows)
    summary = {
        "subtours": len(rows),
        "histogram": _histogram(hist),
        "shares": _shares(hist),
        "all_even": all(k % 2 == 0 and k >= 2 for k in hist),
    }
    return ExperimentReport("ground-connections", params, rows, summary,
                            metadata={"wall_time": time.perf_counter() - start})


# -- iterative loop -------------------------------------------------------------------


def _loop_task(args):
    n, s, solver, C, mcs, max_iterations = args
    inst = generate_instance(n, s)
    schedule = AnnealSchedule(total_sweeps=mcs if mcs else 1000)
    policy = LoopPolicy(C=C, solver=solver, schedule=schedule, max_iterations=max_iterations)
    res = iterate_solve(inst, policy, seed=s)
    tour = optimal_tour(inst)
    subtours = []
    for log in res.logs:
        decoded = log.decoded
        if hasattr(decoded, "is_tour") and not decoded.is_tour:
            for st in connection_stats(inst, decoded, tour):
                subtours.append((log.iteration, len(st.subset), st.required_connections))
    return {
        "seed": s,
        "solver": solver,
        "mcs": mcs if solver != "exact" else 0,
        "C": C,
        "status": res.status,
        "iterations": res.iterations,
        "final_length": res.tour.length if res.tour else None,
        "optimal_length": tour.length,
        "optimal": int(is_optimal(res, tour)),
        "constraints": len(res.constraints()),
    }, subtours


def _survival(rows, max_iter):
    """Fraction optimal having used at most k solves, k = 1..max_iter."""
    total = len(rows)
    return {
        str(k): sum(1 for r in rows if r["optimal"] and r["iterations"] <= k) / total
        for k in range(1, max_iter + 1)
    }


def exp_iterative_success(
    n: int = 12, count: int = 100, solver: str = "exact", C: int = 2,
    mcs_grid: Sequence[int] = (1000,), seed: int = 0, max_iterations: int = 10, jobs: int = 1,
):
    """Optimality of the loop's final tour, per solver setting."""
    grid = [0] if solver == "exact" else list(mcs_grid)
    params = {"n": n, "count": count, "seed": seed, "solver": solver, "C": C,
              "mcs_grid": grid, "max_iterations": max_iterations}
    start = time.perf_counter()
    tasks = [(n, s, solver, C, mcs, max_iterations) for mcs in grid for _, s in _ensemble(params)]
    rows = [r for r, _ in _map(_loop_task, tasks, jobs)]
    summary = {}
    for mcs in grid:
        sel = [r for r in rows if r["mcs"] == mcs]
        key = "exact" if solver == "exact" else f"mcs={mcs}"
        summary[key] = {
            "optimal_rate": sum(r["optimal"] for r in sel) / len(sel),
            "solved_rate": sum(r["status"] == "solved" for r in sel) / len(sel),
            "optimal_by_iteration": _survival(sel, max_iterations),
        }
    return ExperimentReport("iterative-success", params, rows, summary,
                            metadata={"wall_time": time.perf_counter() - start})


def exp_connection_histograms_by_mcs(
    n: int = 12, count: int = 100, mcs_grid: Sequence[int] = DEFAULT_MCS_GRID,
    iterations: Sequence[int] = (1, 4), seed: int = 0, C: int = 2, jobs: int = 1,
):
    """Required-connection histograms of subtours found by SA, per MCS and iteration."""
    params = {"n": n, "count": count, "seed": seed, "C": C, "mcs_grid": list(mcs_grid),
              "iterations": list(iterations)}
    start = time.perf_counter()
    settings = [("exact", 0)] + [("sa", m) for m in mcs_grid]
    tasks = [(n, s, solver, C, mcs, 10) for solver, mcs in settings for _, s in _ensemble(params)]
    results = _map(_loop_task, tasks, jobs)
    rows = []
    for (r, subtours) in results:
        for it, size, req in subtours:
            if it in iterations:
                rows.append({"seed": r["seed"], "solver": r["solver"], "mcs": r["mcs"],
                             "iteration": it, "size": size, "required_connections": req})
    summary = {}
    for solver, mcs in settings:
        key = "exact" if solver == "exact" else f"mcs={mcs}"
        summary[key] = {}
        for it in iterations:
            hist = Counter(row["required_connections"] for row in rows
                           if row["solver"] == solver and row["mcs"] == mcs and row["iteration"] == it)
            total = sum(hist.values())
            summary[key][f"iteration_{it}"] = {
                "subtours": total,
                "histogram": _histogram(hist),
                "tail_share_above_4": sum(v for k, v in hist.items() if k > 4) / total if total else 0.0,
            }
    return ExperimentReport("connection-histograms", params, rows, summary,
                            metadata={"wall_time": time.perf_counter() - start})


# -- neighbour rank decay --------------------------------------------------------------------


def _rank_rows(args):
    n, s = args
    inst = generate_instance(n, s)
    tour = optimal_tour(inst)
    ranks = {i: {j: r + 1 for r, j in enumerate(neighbor_ranks(inst, i))} for i in range(n)}
    rows = []
    for e in sorted(tuple(sorted(e)) for e in tour.edges()):
        i, j = e
        rows.append({"n": n, "seed": s, "i": i, "j": j,
                     "rank_from_i": ranks[i][j], "rank_from_j": ranks[j][i]})
    return rows


def exp_edge_rank_decay(
    n_grid: Sequence[int] = (8, 12), count: int = 100, seed: int = 0,
    L_values: Sequence[int] = (3, 4, 5, 6, 7, 8), jobs: int = 1,
):
    """Neighbour rank of optimal-tour edges and the truncation coverage it implies."""
    params = {"n_grid": list(n_grid), "count": count, "seed": seed, "L_values": list(L_values)}
    start = time.perf_counter()
    tasks = [(n, seed + k) for n in n_grid for k in range(count)]
    rows = [row for rows in _map(_rank_rows, tasks, jobs) for row in rows]
    summary = {}
    for n in list(n_grid) + ["all"]:
        sel = rows if n == "all" else [r for r in rows if r["n"] == n]
        freq = Counter()
        for r in sel:
            freq[r["rank_from_i"]] += 1
            freq[r["rank_from_j"]] += 1
        total = sum(freq.values())
        ranks = sorted(freq)
        xs = [k for k in ranks if freq[k] > 0]
        slope = float(np.polyfit(xs, np.log([freq[k] / total for k in xs]), 1)[0]) if len(xs) > 1 else math.nan
        coverage = {}
        for L in L_values:
            if n != "all" and L > n - 1:
                continue
            kept = [min(r["rank_from_i"], r["rank_from_j"]) <= L for r in sel]
            coverage[str(L)] = sum(kept) / len(kept) if kept else 0.0
        summary[str(n)] = {
            "rank_frequency": {str(k): freq[k] / total for k in ranks},
            "log_slope": slope,
            "edge_coverage": coverage,
        }
    return ExperimentReport("edge-rank-decay", params, rows, summary,
                            metadata={"wall_time": time.perf_counter() - start})


EXPERIMENTS = {
    "subtour-fraction": exp_subtour_fraction,
    "ground-connections": exp_ground_connection_distribution,
    "iterative-success": exp_iterative_success,
    "connection-histograms": exp_connection_histograms_by_mcs,
    "edge-rank-decay": exp_edge_rank_decay,
}
