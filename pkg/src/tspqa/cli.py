"""Command-line entry point: ``tspqa <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 capacity or precondition error.
"""

from __future__ import annotations

import argparse
import csv
import json
import shlex
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .digital import run_digital_qa, structure_tag
from .encoding import (
    FORMAT_VERSION as MODEL_FORMAT,
    PenaltyWeights,
    add_subtour_penalty,
    decode_edges,
    encode_edge,
    encode_permutation,
    export_model,
    resource_counts,
    to_ising,
)
from .errors import CapacityError, InstanceParseError, PreconditionError, TspqaError
from .experiments import DEFAULT_MCS_GRID, EXPERIMENTS, REPORT_FORMAT, ExperimentReport
from .instances import FORMAT_VERSION as INSTANCE_FORMAT
from .instances import generate_instance, instance_to_dict, load_instance
from .oracles import penalized_ground_state
from .solvers import AnnealSchedule, simulated_annealing, simulated_quantum_annealing, two_opt_baseline
from .subtour_loop import LoopPolicy, iterate_solve


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _subset(text: str) -> list[int]:
    try:
        return [int(c) for c in text.split(",") if c.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad subset {text!r}; expected a,b,c") from exc


def _int_list(text: str) -> list[int]:
    return [int(float(v)) for v in text.split(",") if v.strip()]


def _add_schedule(p):
    p.add_argument("--mcs", type=int, default=1000, help="Monte Carlo sweeps")
    p.add_argument("--t0", type=float)
    p.add_argument("--tf", type=float)
    p.add_argument("--gamma0", type=float)
    p.add_argument("--gammaf", type=float)
    p.add_argument("--slices", type=int, default=32)
    p.add_argument("--beta", type=float)
    p.add_argument("--seed", type=int, default=0)


def _schedule(args) -> AnnealSchedule:
    return AnnealSchedule(args.mcs, args.t0, args.tf, args.gamma0, args.gammaf, args.slices, args.beta)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tspqa", description=__doc__.splitlines()[0])
    parser.add_argument(
        "--version", action="version",
        version=f"tspqa {__version__} (instance format {INSTANCE_FORMAT}, "
                f"model format {MODEL_FORMAT}, report format {REPORT_FORMAT})",
    )
    parser.add_argument("--config", help="JSON file of defaults; explicit flags win")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate random instances")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")

    p = sub.add_parser("encode", help="write a QUBO/Ising model")
    p.add_argument("--instance", required=True)
    p.add_argument("--mapping", choices=["permutation", "edge"], default="edge")
    p.add_argument("--reduced", action="store_true")
    p.add_argument("--L", type=int)
    p.add_argument("--eta", type=float)
    p.add_argument("--etaprime", type=float)
    p.add_argument("--subset", type=_subset, action="append", default=[])
    p.add_argument("--C", type=int, default=2, choices=[2, 3])
    p.add_argument("--form", choices=["qubo", "ising"], default="qubo")
    p.add_argument("--out")

    p = sub.add_parser("solve", help="minimise an encoded instance once")
    p.add_argument("--instance", required=True)
    p.add_argument("--mapping", choices=["permutation", "edge"], default="edge")
    p.add_argument("--solver", choices=["sa", "sqa", "exact", "two-opt"], default="sa")
    p.add_argument("--L", type=int)
    p.add_argument("--out")
    _add_schedule(p)

    p = sub.add_parser("loop", help="iterative subtour elimination")
    p.add_argument("--instance", required=True)
    p.add_argument("--solver", choices=["exact", "sa", "sqa"], default="exact")
    p.add_argument("--C", type=int, default=2, choices=[2, 3])
    p.add_argument("--max-iterations", type=int, default=10)
    p.add_argument("--escalation", type=float)
    p.add_argument("--constraints-per-round", choices=["all", "one"], default="all")
    p.add_argument("--slack", action="store_true")
    p.add_argument("--L", type=int)
    p.add_argument("--out")
    _add_schedule(p)

    p = sub.add_parser("digital", help="statevector digital annealing")
    p.add_argument("--instance", required=True)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--dt", type=float, default=0.1)
    p.add_argument("--etaprime", type=float)
    p.add_argument("--subset", type=_subset, action="append", default=[])
    p.add_argument("--schedule", choices=["tree", "ladder"], default="tree")
    p.add_argument("--histogram-out")

    p = sub.add_parser("experiment", help="run a seeded ensemble experiment")
    p.add_argument("name", choices=sorted(EXPERIMENTS))
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--n-grid", type=_int_list, default=[8, 12])
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--solver", choices=["exact", "sa", "sqa"], default="exact")
    p.add_argument("--C", type=int, default=2, choices=[2, 3])
    p.add_argument("--mcs-grid", type=_int_list, default=list(DEFAULT_MCS_GRID))
    p.add_argument("--max-iterations", type=int, default=10)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-dir", default=".")

    p = sub.add_parser("report", help="print the summary of an experiment JSON")
    p.add_argument("input")
    return parser


def _write(path, text):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_gen(args, command):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k in range(args.count):
        inst = generate_instance(args.n, args.seed + k)
        doc = instance_to_dict(inst)
        doc["command"] = command
        (out / f"tsp_n{args.n}_s{args.seed + k}.json").write_text(json.dumps(doc, indent=1) + "\n")
    print(f"wrote {args.count} instances to {out}")


def _model_for(args, inst):
    base = PenaltyWeights.default(inst)
    eta = base.eta if getattr(args, "eta", None) is None else args.eta
    w = PenaltyWeights(eta, base.eta_prime, base.eta_double_prime)
    if args.mapping == "permutation":
        return encode_permutation(inst, w, reduced=getattr(args, "reduced", False))
    return encode_edge(inst, w, args.L)


def _cmd_encode(args, command):
    inst = load_instance(args.instance)
    model = _model_for(args, inst)
    for subset in args.subset:
        model = add_subtour_penalty(model, subset, args.C, args.etaprime)
    counts = resource_counts(model)
    target = to_ising(model) if args.form == "ising" else model
    _write(args.out, export_model(target, header=[f"command: {command}"]))
    print(f"qubits {counts.qubits} couplers {counts.couplers}", file=sys.stderr)


def _result_record(config, energy, model, extra):
    return {"best_config": [int(v) for v in config], "best_energy": energy,
            "num_vars": model.num_vars if model is not None else None, **extra}


def _cmd_solve(args, command):
    inst = load_instance(args.instance)
    if args.solver == "two-opt":
        tour = two_opt_baseline(inst, args.seed)
        rec = {"tour": list(tour.order), "length": tour.length, "seed": args.seed}
    else:
        model = _model_for(args, inst)
        if args.solver == "exact":
            config, energy = penalized_ground_state(model)
            rec = _result_record(config, energy, model, {"solver": "exact"})
        else:
            run = simulated_annealing if args.solver == "sa" else simulated_quantum_annealing
            res = run(model, _schedule(args), args.seed)
            rec = _result_record(res.best_config, res.best_energy, model,
                                 {"solver": args.solver, "seed": res.seed, "sweeps_used": res.sweeps_used})
    rec["command"] = command
    _write(args.out, json.dumps(rec, indent=1) + "\n")


def _decoded_record(decoded):
    if hasattr(decoded, "cycles"):
        return {"cycles": [list(c) for c in decoded.cycles], "weight": decoded.total_weight}
    return {"violations": list(decoded.violations)}


def _cmd_loop(args, command):
    inst = load_instance(args.instance)
    policy = LoopPolicy(
        C=args.C, ratio_escalation=args.escalation, max_iterations=args.max_iterations,
        solver=args.solver, schedule=_schedule(args), truncation=args.L,
        constraints_per_round=args.constraints_per_round, slack=args.slack,
    )
    res = iterate_solve(inst, policy, args.seed)
    logs = [
        {
            "iteration": log.iteration,
            "energy": log.energy,
            "decoded": _decoded_record(log.decoded),
            "constraints_added": [
                {"subset": sorted(c.subset), "C": c.C, "eta_prime": c.eta_prime}
                for c in log.constraints_added
            ],
            "eta": log.eta,
            "retries": log.retries,
            "seed": log.seed,
        }
        for log in res.logs
    ]
    rec = {"command": command, "status": res.status,
           "tour": list(res.tour.order) if res.tour else None,
           "length": res.tour.length if res.tour else None, "iterations": logs}
    _write(args.out, json.dumps(rec, indent=1) + "\n")


def _cmd_digital(args, command):
    inst = load_instance(args.instance)
    ep = PenaltyWeights.default(inst).eta_prime if args.etaprime is None else args.etaprime
    res = run_digital_qa(inst, args.steps, args.dt, [(s, ep) for s in args.subset],
                         schedule=args.schedule)
    if args.histogram_out:
        with open(args.histogram_out, "w", newline="") as fh:
            fh.write(f"# command: {command}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bitstring", "probability", "structure"])
            for k in np.argsort(-res.probabilities, kind="stable"):
                p = float(res.probabilities[k])
                if p < 1e-15:
                    break
                w.writerow([res.bitstring(int(k)), repr(p),
                            structure_tag(_decode_index(res, int(k)))])
    print(f"most probable {res.bitstring(res.best_index)} "
          f"p={res.probabilities[res.best_index]:.6f} -> {structure_tag(res.decoded)}")


def _decode_index(res, k):
    return decode_edges(res.config(k), res.model.varmap)


def _cmd_experiment(args, command):
    fn = EXPERIMENTS[args.name]
    if args.name == "edge-rank-decay":
        report = fn(n_grid=args.n_grid, count=args.count, seed=args.seed, jobs=args.jobs)
    elif args.name == "iterative-success":
        report = fn(n=args.n, count=args.count, solver=args.solver, C=args.C,
                    mcs_grid=args.mcs_grid, seed=args.seed,
                    max_iterations=args.max_iterations, jobs=args.jobs)
    elif args.name == "connection-histograms":
        report = fn(n=args.n, count=args.count, mcs_grid=args.mcs_grid, seed=args.seed,
                    C=args.C, jobs=args.jobs)
    else:
        report = fn(n=args.n, count=args.count, seed=args.seed, jobs=args.jobs)
    csv_path, json_path = report.write(args.out_dir, command)
    print(report.summary_table())
    print(f"wrote {csv_path} and {json_path}")


def _cmd_report(args, command):
    doc = json.loads(Path(args.input).read_text())
    print(ExperimentReport.from_dict(doc).summary_table())


COMMANDS = {
    "gen": _cmd_gen, "encode": _cmd_encode, "solve": _cmd_solve, "loop": _cmd_loop,
    "digital": _cmd_digital, "experiment": _cmd_experiment, "report": _cmd_report,
}


def _parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            config = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InstanceParseError("--config", str(exc)) from exc
        if not isinstance(config, dict):
            raise InstanceParseError("--config", "expected a JSON object")
        subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
        subparsers.choices[args.command].set_defaults(**{k.replace("-", "_"): v for k, v in config.items()})
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    command = "tspqa " + shlex.join(argv)
    try:
        args = _parse(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except InstanceParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        COMMANDS[args.command](args, command)
    except (CapacityError, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InstanceParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except TspqaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
