"""Command-line entry point: ``nscqed run|preset|sweep|tune``.

Exit status: 0 on success, 1 when a run finishes but fails a numerical
diagnostic (or the integrator gives up), 2 on bad input.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import logging
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .effective import AmbiguousResonance, coupled_pairs, fine_tune_resonance, transition_gap, \
    tuning_window
from .evolve import StiffnessError
from .hilbert import TruncationError
from .model import ParameterError, derived_frequencies
from .scenario import (PRESETS, SOLVERS, Scenario, ScenarioError, lab_transfer_probe,
                       load_preset, load_scenario, run_scenario, scenario_from_dict, write_csv)

log = logging.getLogger("nscqed")

EXIT_OK, EXIT_DIAGNOSTIC, EXIT_INPUT = 0, 1, 2
WORKERS_ENV = "NSCQED_WORKERS"


def _solvers(arg, sc: Scenario) -> list:
    if not arg:
        return list(sc.solvers)
    out = [s.strip() for s in arg.split(",") if s.strip()]
    for s in out:
        if s not in SOLVERS:
            raise ScenarioError(f"--solver: unknown solver {s!r}; choose from {SOLVERS}")
    return out


def _out_paths(out, name: str, solvers: list) -> dict:
    if out is None:
        return {s: Path(f"{name}_{s.replace('+', '_')}.csv") for s in solvers}
    out = Path(out)
    if len(solvers) == 1 and out.suffix:
        return {solvers[0]: out}
    if out.suffix:
        return {s: out.with_name(f"{out.stem}_{s.replace('+', '_')}{out.suffix}")
                for s in solvers}
    return {s: out / f"{name}_{s.replace('+', '_')}.csv" for s in solvers}


def _atomic_text(path: Path, text: str):
    import tempfile
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _diff_summary(results: dict) -> str:
    names = list(results)
    lines = []
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            ra, rb = results[a].trajectory, results[b].trajectory
            if len(ra.times) != len(rb.times):
                continue
            dn = np.max(np.abs(ra.series("mean_n") - rb.series("mean_n")))
            dp = np.max(np.abs(ra.series("p_e") - rb.series("p_e")))
            lines.append(f"{a} vs {b}: max|d mean_n| = {dn:.4g}, max|d p_e| = {dp:.4g}")
    return "\n".join(lines)


def _run(sc: Scenario, args) -> int:
    solvers = _solvers(getattr(args, "solver", None), sc)
    paths = _out_paths(getattr(args, "out", None), sc.name, solvers)
    results, status = {}, EXIT_OK
    for s in solvers:
        res = run_scenario(sc, s, n_max=getattr(args, "n_max", None),
                           method=getattr(args, "method", None))
        write_csv(res, paths[s])
        results[s] = res
        tr = res.trajectory
        print(f"{s}: n_max={res.n_max} method={tr.method} wall={tr.wall_time:.2f}s "
              f"-> {paths[s]}")
        if not res.diagnostics_ok:
            status = EXIT_DIAGNOSTIC
            for msg in res.problems():
                print(f"  diagnostic failure: {msg}", file=sys.stderr)
    if len(results) > 1:
        summary = _diff_summary(results)
        print(summary)
        first = paths[solvers[0]]
        _atomic_text(first.with_name(f"{sc.name}_diff.txt"), summary + "\n")
    return status


def cmd_run(args) -> int:
    return _run(load_scenario(args.scenario), args)


def cmd_preset(args) -> int:
    sc = load_preset(args.name)
    if args.dump:
        sys.stdout.write(sc.dumps())
        return EXIT_OK
    return _run(sc, args)


def _set_path(d: dict, path: str, value):
    keys = path.split(".")
    node = d
    for k in keys[:-1]:
        node = node[int(k)] if isinstance(node, list) else node[k]
    last = keys[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        if last not in node:
            raise KeyError("no such field")
        node[last] = value


def _parse_values(text: str) -> list:
    if text is None or not text.strip():
        return []
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ScenarioError(f"--values: expected comma-separated numbers, got {text!r}") from None


def cmd_sweep(args) -> int:
    base = load_scenario(args.scenario)
    values = _parse_values(args.values)
    solver = _solvers(args.solver, base)[0]
    outdir = Path(args.out or f"{base.name}_sweep")
    # reject a bad axis before spawning anything
    probe = base.to_dict()
    try:
        _set_path(probe, args.axis, 0.0)
    except (KeyError, IndexError, ValueError, TypeError) as exc:
        raise ScenarioError(f"--axis: {args.axis!r} is not a scalar field ({exc})") from None

    def one(i_value):
        i, value = i_value
        d = copy.deepcopy(base.to_dict())
        _set_path(d, args.axis, value)
        row = {"value": value, "status": "ok", "peak_mean_n": "", "peak_time_ns": "",
               "csv": "", "message": ""}
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                sc = scenario_from_dict(d)
                res = run_scenario(sc, solver)
            n = res.trajectory.series("mean_n")
            path = outdir / f"{base.name}_{i:03d}.csv"
            write_csv(res, path, {"sweep_axis": args.axis, "sweep_value": value})
            row.update(peak_mean_n=f"{n.max():.10g}",
                       peak_time_ns=f"{res.times_ns[int(np.argmax(n))]:.10g}", csv=str(path))
            if not res.diagnostics_ok:
                row.update(status="diagnostic", message="; ".join(res.problems()))
        except (ScenarioError, ParameterError, TruncationError, StiffnessError) as exc:
            row.update(status="error", message=str(exc))
        return row

    workers = int(os.environ.get(WORKERS_ENV, "0") or 0) or min(8, os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(one, enumerate(values)))
    buf = io.StringIO()
    w = csv.DictWriter(buf, ["value", "status", "peak_mean_n", "peak_time_ns", "csv", "message"],
                       lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    summary = outdir / "summary.csv"
    _atomic_text(summary, f"# sweep_axis: {args.axis}\n# solver: {solver}\n" + buf.getvalue())
    for r in rows:
        print(f"{args.axis}={r['value']:g}: {r['status']} peak_mean_n={r['peak_mean_n']} "
              f"at {r['peak_time_ns']} ns")
    print(f"summary -> {summary}")
    return EXIT_OK


def cmd_tune(args) -> int:
    from .dressed import build_dressed_basis, rabi_gap
    from .hilbert import bare_operators, build_space

    sc = load_scenario(args.scenario)
    p = sc.params
    tone = next((t for t in sc.tones if t.tone == 1), None)
    if tone is None:
        raise ScenarioError("tones: tune needs a tone with index 1")
    n = args.n_max or sc.n_max or sc.default_n_max()
    space = build_space(n)
    basis = build_dressed_basis(space, p)
    lo, up, _, _ = coupled_pairs(sc.regime, p, n)[0]
    gap = transition_gap(basis, lo, up)
    theta = abs(sc.coupling().theta)
    if args.center == "rabi":
        eta0 = rabi_gap(basis, bare_operators(space), lo, up)
        window = min(10 * theta, tuning_window(p, sc.schedule()))
    else:
        eta0 = sc.tone_frequency(tone, basis)
        window = tuning_window(p, sc.schedule())
    if args.window is not None:
        window = args.window
    horizon = args.horizon_ns
    if horizon is None:
        horizon = float(sc.internal_to_ns(math.pi / theta))
    probe = lab_transfer_probe(sc, horizon, n_max=n, samples=args.samples,
                               observable=args.observable)
    xatol = args.xatol if args.xatol is not None else theta * 1e-3
    eta = fine_tune_resonance(probe, eta0, window, xatol, grid=args.grid)
    bs2 = 2 * derived_frequencies(p).bs_shift
    print(f"eta* = {eta:.12g} g0 = {sc.g0_to_ghz(eta):.12g} GHz")
    print(f"gap {up} - {lo} = {gap:.12g} g0; offset = {eta - gap:.6g} g0"
          + (f" = 2 delta_+ x {(eta - gap) / bs2:.4f}" if bs2 else ""))
    print(f"peak probe change = {probe(eta):.6f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nscqed", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def run_opts(p):
        p.add_argument("--solver", help=f"comma-separated subset of {', '.join(SOLVERS)}")
        p.add_argument("--out", help="CSV path, or a directory")
        p.add_argument("--n-max", type=int, dest="n_max")
        p.add_argument("--method", choices=("auto", "propagator", "floquet", "dop853", "rk45",
                                            "rk4"))

    p = sub.add_parser("run", help="run a scenario file (or a preset name)")
    p.add_argument("scenario")
    run_opts(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("preset", help=f"run a built-in preset: {', '.join(PRESETS)}")
    p.add_argument("name")
    p.add_argument("--dump", action="store_true", help="print the preset YAML and exit")
    run_opts(p)
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("sweep", help="run one scenario over a list of values of one field")
    p.add_argument("scenario")
    p.add_argument("--axis", required=True, help="dotted field path, e.g. tones.0.detuning")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--solver")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("tune", help="locate the tone-1 resonance with lab-frame runs")
    p.add_argument("scenario")
    p.add_argument("--window", type=float, help="search half-width in g0 units")
    p.add_argument("--horizon-ns", type=float, dest="horizon_ns")
    p.add_argument("--samples", type=int, default=400)
    p.add_argument("--xatol", type=float)
    p.add_argument("--observable", choices=("transfer", "photons"),
                   help="probe figure of merit (default: photons for dce, transfer otherwise)")
    p.add_argument("--center", choices=("rabi", "scenario"), default="rabi",
                   help="search centre: numerical Rabi gap (default) or the scenario frequency")
    p.add_argument("--grid", type=int, default=21, help="coarse scan points (0 disables)")
    p.add_argument("--n-max", type=int, dest="n_max")
    p.set_defaults(func=cmd_tune)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, ParameterError, TruncationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (StiffnessError, AmbiguousResonance) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_DIAGNOSTIC


if __name__ == "__main__":
    sys.exit(main())
