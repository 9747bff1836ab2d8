"""Batch command-line front-end.

Subcommands: compile, simulate, fidelity, sweep, resonance.  All inputs
are JSON files plus flags; outputs are JSON/CSV with no timestamps, so
identical invocations produce byte-identical results.

Exit codes: 0 success; 2 schema or parse errors; 3 sequence validation
violations; 4 integrator failure; 5 fidelity below the --min gate.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .analysis import (
    compose_virtual_z,
    concurrence,
    gate_fidelity,
    one_qubit_error_budget,
    reduced_bloch,
    report_to_json,
    sideband_check,
)
from .compiler import compile_cnot, compile_D, compile_one_qubit, compile_xx_half
from .integrator import (
    DensityState,
    NoConvergence,
    StepPolicy,
    StepTooCoarse,
    evolve,
    frame_unitary,
    propagator_of_sequence,
    to_rotating_frame,
    write_trajectory_csv,
)
from .model import (
    DEFAULT_PARAMS,
    PulseSequence,
    SystemParams,
    params_from_json,
    sequence_from_json,
    sequence_to_json,
    validate_sequence,
)
from .pauli import build_cnot_word, parse_word

__all__ = ["main"]

EXIT_SCHEMA = 2
EXIT_VALIDATION = 3
EXIT_INTEGRATOR = 4
EXIT_BELOW_MIN = 5


class SchemaError(ValueError):
    pass


def _load_params(path: str | None) -> SystemParams:
    if path is None:
        return DEFAULT_PARAMS
    try:
        with open(path) as fh:
            return params_from_json(fh.read())
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise SchemaError(f"cannot read params file {path}: {exc}") from exc


def _load_sequence(path: str) -> PulseSequence:
    try:
        with open(path) as fh:
            return sequence_from_json(fh.read())
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"cannot read sequence file {path}: {exc}") from exc


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")


def _parse_state(spec: str) -> DensityState:
    if spec in ("00", "01", "10", "11"):
        return DensityState.computational(spec)
    if spec.startswith("bloch:"):
        try:
            b1_txt, b2_txt = spec[len("bloch:"):].split(";")
            b1 = [float(x) for x in b1_txt.split(",")]
            b2 = [float(x) for x in b2_txt.split(",")]
            if len(b1) != 3 or len(b2) != 3:
                raise ValueError("each Bloch vector needs 3 components")
            return DensityState.product_bloch(b1, b2)
        except ValueError as exc:
            raise SchemaError(f"bad bloch state spec {spec!r}: {exc}") from exc
    if spec.startswith("pauli:"):
        try:
            c = np.array([float(x) for x in spec[len("pauli:"):].split(",")])
            if c.shape != (15,):
                raise ValueError("need exactly 15 coefficients")
            state = DensityState(c)
            state.validate()
            return state
        except ValueError as exc:
            raise SchemaError(f"bad pauli state spec {spec!r}: {exc}") from exc
    raise SchemaError(
        f"bad state spec {spec!r}; use a basis ket, bloch:..;.. or pauli:.."
    )


def _compile_gate(gate: str, p: SystemParams) -> PulseSequence:
    if gate == "d":
        return compile_D(p, 0.0)
    if gate == "xx_half":
        return compile_xx_half(p, 0.0)
    if gate == "cnot":
        return compile_cnot(p)
    if gate in ("x90", "y90"):
        seg = compile_one_qubit(p, 1, gate[0], math.pi / 2, 0.0)
        return PulseSequence(params=p, segments=(seg,))
    raise SchemaError(f"unknown gate {gate!r}")


def cmd_compile(args) -> int:
    p = _load_params(args.params)
    seq = _compile_gate(args.gate, p)
    diags = validate_sequence(p, seq)
    errors = [d for d in diags if d.severity == "error"]
    for d in diags:
        print(f"{d.severity}: {d.message}", file=sys.stderr)
    if errors:
        return EXIT_VALIDATION
    _emit(sequence_to_json(seq), args.out)
    return 0


def cmd_simulate(args) -> int:
    seq = _load_sequence(args.sequence)
    p = seq.params
    rho0 = _parse_state(args.state)
    policy = StepPolicy(steps_per_period=args.steps_per_period)
    try:
        traj = evolve(p, seq, rho0, policy)
        if args.frame == "rotating":
            traj = to_rotating_frame(traj, p)
        with open(args.out, "w") as fh:
            write_trajectory_csv(traj, fh, full=args.full)
    except (StepTooCoarse, NoConvergence, OSError) as exc:
        print(f"integrator failure: {exc}", file=sys.stderr)
        return EXIT_INTEGRATOR
    final = traj.final
    doc = {
        "t": float(traj.times[-1]),
        "frame": traj.frame,
        "bloch1": [float(x) for x in reduced_bloch(final, 1)],
        "bloch2": [float(x) for x in reduced_bloch(final, 2)],
        "purity": float(final.purity),
        "concurrence": float(concurrence(final)),
    }
    sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    return 0


def cmd_fidelity(args) -> int:
    seq = _load_sequence(args.sequence)
    try:
        word = parse_word(args.word)
    except ValueError as exc:
        raise SchemaError(f"bad target word: {exc}") from exc
    p = seq.params
    policy = StepPolicy(steps_per_period=args.steps_per_period)
    try:
        u = propagator_of_sequence(p, seq, policy)
    except (StepTooCoarse, NoConvergence) as exc:
        print(f"integrator failure: {exc}", file=sys.stderr)
        return EXIT_INTEGRATOR
    u = frame_unitary(p, seq.total_time) @ u
    u = compose_virtual_z(u, seq)
    report = gate_fidelity(u, word, align_local_z=not args.no_align)
    _emit(report_to_json(report), args.out)
    if args.min is not None and report.process < args.min:
        print(
            f"process fidelity {report.process:.6f} below --min {args.min}",
            file=sys.stderr,
        )
        return EXIT_BELOW_MIN
    return 0


def _params_for(delta: float, wxx: float) -> SystemParams:
    return SystemParams(w1z=1.0 + 0.5 * delta, w2z=1.0 - 0.5 * delta, wxx=wxx)


def _sweep_point(task) -> float:
    delta, wxx, metric, steps = task
    p = _params_for(delta, wxx)
    policy = StepPolicy(steps_per_period=steps)
    if metric == "one_qubit_error":
        return one_qubit_error_budget(p, policy=policy)["target_infidelity"]
    if metric == "d_concurrence":
        seq = compile_D(p, 0.0)
        traj = evolve(p, seq, DensityState.computational("00"), policy)
        return concurrence(traj.final)
    if metric == "cnot_error":
        seq = compile_cnot(p)
        u = propagator_of_sequence(p, seq, policy)
        u = compose_virtual_z(frame_unitary(p, seq.total_time) @ u, seq)
        return 1.0 - gate_fidelity(u, build_cnot_word()).process
    raise SchemaError(f"unknown metric {metric!r}")


def cmd_sweep(args) -> int:
    try:
        with open(args.grid) as fh:
            doc = json.load(fh)
        points = [(float(pt["delta"]), float(pt["wxx"])) for pt in doc]
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"cannot read grid file {args.grid}: {exc}") from exc
    tasks = [(d, w, args.metric, args.steps_per_period) for d, w in points]
    failed = False
    if args.jobs == 1:
        results = []
        for task in tasks:
            try:
                results.append(_sweep_point(task))
            except SchemaError:
                raise
            except Exception as exc:  # per-point failure -> nan row
                print(f"point {task[:2]} failed: {exc}", file=sys.stderr)
                results.append(float("nan"))
                failed = True
    else:
        results = []
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(_sweep_point, task) for task in tasks]
            for task, fut in zip(tasks, futures):
                try:
                    results.append(fut.result())
                except Exception as exc:
                    print(f"point {task[:2]} failed: {exc}", file=sys.stderr)
                    results.append(float("nan"))
                    failed = True
    lines = ["delta,wxx,metric"]
    for (d, w), r in zip(points, results):
        lines.append(f"{d:.12g},{w:.12g},{r:.12g}")
    _emit("\n".join(lines), args.out)
    return EXIT_INTEGRATOR if failed else 0


def cmd_resonance(args) -> int:
    p = _load_params(args.params)
    try:
        a1, a2 = (float(x) for x in args.amps.split(","))
    except ValueError as exc:
        raise SchemaError(f"bad --amps {args.amps!r}: {exc}") from exc
    _emit(json.dumps(sideband_check(p, a1, a2), indent=2), args.out)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flicforq", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile", help="compile a named gate to a pulse sequence")
    c.add_argument("gate", choices=["d", "xx_half", "cnot", "x90", "y90"])
    c.add_argument("--params")
    c.add_argument("--out")
    c.set_defaults(func=cmd_compile)

    s = sub.add_parser("simulate", help="integrate a sequence from an initial state")
    s.add_argument("sequence")
    s.add_argument("--state", default="00")
    s.add_argument("--frame", choices=["lab", "rotating"], default="lab")
    s.add_argument("--out", required=True, help="trajectory CSV path")
    s.add_argument("--full", action="store_true", help="emit all 15 coefficients")
    s.add_argument("--steps-per-period", type=int, default=StepPolicy().steps_per_period)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fidelity", help="gate fidelity of a sequence vs a word")
    f.add_argument("sequence")
    f.add_argument("--word", required=True)
    f.add_argument("--min", type=float)
    f.add_argument("--no-align", action="store_true")
    f.add_argument("--out")
    f.add_argument("--steps-per-period", type=int, default=StepPolicy().steps_per_period)
    f.set_defaults(func=cmd_fidelity)

    w = sub.add_parser("sweep", help="metric over a (delta, wxx) grid")
    w.add_argument("grid", help="JSON list of {delta, wxx} points")
    w.add_argument("--metric", required=True,
                   choices=["cnot_error", "one_qubit_error", "d_concurrence"])
    w.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    w.add_argument("--out")
    w.add_argument("--steps-per-period", type=int, default=StepPolicy().steps_per_period)
    w.set_defaults(func=cmd_sweep)

    r = sub.add_parser("resonance", help="sideband frequencies and resonance gap")
    r.add_argument("--params")
    r.add_argument("--amps", required=True, help="amp_y1,amp_y2")
    r.set_defaults(func=cmd_resonance)
    r.add_argument("--out")
    return ap


def main(argv=None) -> int:
    ap = _build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
