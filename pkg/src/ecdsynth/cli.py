"""Command-line pipeline: optimize -> compile -> simulate -> tomo -> report.

Every command writes its outputs plus a ``manifest_<command>.json`` into
``--out``.  Exit codes: 0 success, 2 configuration error, 3 missing input,
4 numerical failure (including an unmet convergence policy).
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .io import (ConfigError, load_config, parse_frequency, parse_range, parse_rate, parse_target,
                 parse_time, system_from_dict, write_json, write_manifest)

EXIT_OK, EXIT_CONFIG, EXIT_MISSING, EXIT_NUMERIC = 0, 2, 3, 4


class NumericalFailure(RuntimeError):
    pass


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"input not found: {p}")
    return p


def _apply_config(args, parser_defaults: dict):
    """Merge ``--config`` JSON into ``args``: keys are option names with dashes or underscores."""
    if not getattr(args, "config", None):
        return {}
    allowed = {k for k in parser_defaults if k not in ("func", "config", "command")}
    data = load_config(args.config, allowed | {k.replace("_", "-") for k in allowed})
    data = {k.replace("-", "_"): v for k, v in data.items()}
    for k, v in data.items():
        # explicit command-line values win over the file
        if getattr(args, k) == parser_defaults[k]:
            setattr(args, k, v)
    return data


def _snapshot(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("func",)}


# -- optimize -------------------------------------------------------------------------

def cmd_optimize(args) -> int:
    from .codes import gkp_logical_states
    from .optimizer import (GATE_PHASES, OptimizerConfig, StateMap, depth_sweep, gate_map,
                            logical_average_fidelity, optimize)

    out = _out_dir(args)
    if args.depth_sweep and args.N is not None:
        raise ConfigError("give either --N or --depth-sweep, not both")
    depths = parse_range(args.depth_sweep) if args.depth_sweep else [args.N if args.N is not None else 4]
    cfg = OptimizerConfig(depth=depths[0], n_osc=args.n_osc, batch=args.batch,
                          learning_rate=args.lr, max_epochs=args.epochs,
                          target_fidelity=args.fidelity, seed=args.seed, patience=args.patience,
                          cost=args.cost)
    kind, _, arg = args.target.partition(":")
    gate = None
    if kind == "gate":
        gate = arg.strip().upper()
        if gate not in GATE_PHASES:
            raise ConfigError(f"unknown gate {arg!r}; expected one of {sorted(GATE_PHASES)}")
        logical = gkp_logical_states(args.delta, args.n_osc)
        factory = lambda n: gate_map(logical, gate)  # noqa: E731
    else:
        psi = parse_target(args.target, args.n_osc, args.delta)
        factory = lambda n: StateMap.prep(psi)  # noqa: E731

    if len(depths) > 1:
        best_n, results = depth_sweep(factory, cfg, depths)
        key = best_n if best_n is not None else max(results, key=lambda k: results[k].best_fidelity)
    else:
        results = {depths[0]: optimize(factory(args.n_osc), cfg)}
        best_n = depths[0] if results[depths[0]].best_fidelity >= args.fidelity else None
        key = depths[0]
    res = results[key]

    circuit = res.best_params.to_json()
    summary = {"target": args.target, "delta": args.delta, "minimal_N": best_n, "N": key,
               "fidelity": res.best_fidelity, "termination": res.termination, "epochs": res.epochs,
               "per_depth": {str(k): r.best_fidelity for k, r in results.items()}}
    if gate:
        summary["average_gate_fidelity"] = logical_average_fidelity(res.best_params, logical, gate)
    circuit["summary"] = summary
    f_circ = write_json(out / "circuit.json", circuit)
    f_trace = out / "trace.csv"
    with open(f_trace, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["N", "epoch", "circuit_index", "infidelity"])
        for N, r in results.items():
            for e, row in enumerate(r.traces):
                for j, F in enumerate(row):
                    w.writerow([N, e, j, repr(float(1 - F))])
    write_manifest(out, "optimize", _snapshot(args), [args.seed], outputs=[f_circ, f_trace])
    print(json.dumps(summary))
    if best_n is None:
        print(f"no depth in {depths} reached F >= {args.fidelity}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


# -- compile ---------------------------------------------------------------------------

def _load_circuit(path):
    from .circuit import EcdParams

    data = json.loads(_require(path).read_text())
    data.pop("summary", None)
    data.pop("depth", None)
    try:
        return EcdParams.from_json(data)
    except (KeyError, ValueError) as e:
        raise ConfigError(f"{path}: bad circuit file ({e})") from e


def _system(args):
    data = {}
    if getattr(args, "system", None):
        data = json.loads(_require(args.system).read_text())
        data.pop("schema", None)
    if getattr(args, "chi", None):
        data["chi"] = args.chi
    sysp = system_from_dict(data)
    if getattr(args, "linear", False):
        sysp = sysp.linear()
    return sysp


def cmd_compile(args) -> int:
    from .pulses import compile_sequence, duration_model

    out = _out_dir(args)
    params = _load_circuit(args.circuit)
    sysp = _system(args)
    try:
        seq = compile_sequence(params, args.alpha0, sysp)
    except ValueError as e:
        if "drive_max" in str(e):
            raise ConfigError(str(e)) from e
        raise NumericalFailure(str(e)) from e
    f_csv = out / "pulse.csv"
    seq.to_csv(f_csv)
    side = seq.sidecar(sysp)
    t_inst, t_con = duration_model(params, args.alpha0, sysp)
    side.update({"alpha0_target": args.alpha0, "duration": seq.duration,
                 "duration_model": {"t_inst": t_inst, "t_constraint": t_con}})
    f_side = write_json(out / "pulse.json", side)
    write_manifest(out, "compile", _snapshot(args), inputs=[args.circuit], outputs=[f_csv, f_side])
    print(json.dumps({"duration": seq.duration, "samples": seq.n, "t_inst": t_inst,
                      "t_constraint": t_con}))
    return EXIT_OK


# -- simulate ---------------------------------------------------------------------------

def _rates(args):
    from .dynamics import CHANNELS, DecoherenceRates

    if args.channels == "none":
        return DecoherenceRates(), []
    rates = DecoherenceRates.from_times(
        t1_q=parse_time(args.qubit_t1), t2e_q=parse_time(args.qubit_t2e),
        n_th_q=args.qubit_nth, t1_c=parse_time(args.cavity_t1), n_th_c=args.cavity_nth,
        kappa_phi=parse_rate(args.kappa_phi),
        t1_q_effective=parse_time(args.qubit_t1_eff) if args.qubit_t1_eff else None)
    if args.channels == "all":
        return rates, list(CHANNELS)
    chosen = [c.strip() for c in args.channels.split(",") if c.strip()]
    bad = set(chosen) - set(CHANNELS)
    if bad:
        raise ConfigError(f"unknown channels {sorted(bad)}; known: {list(CHANNELS)}")
    kw = {}
    for c in chosen:
        kw.update({k: v for k, v in rates.only(c).__dict__.items() if v})
    return DecoherenceRates(**kw), chosen


def cmd_simulate(args) -> int:
    from .dynamics import SimConfig, budget_rows, error_budget, simulate_master_equation
    from .pulses import PulseSequence

    out = _out_dir(args)
    pulse = _require(args.pulse)
    side_path = pulse.with_suffix(".json")
    meta = json.loads(side_path.read_text()) if side_path.exists() else {}
    seq = PulseSequence.from_csv(pulse, meta=meta)
    sys_data = dict(meta.get("system", {}))
    sysp = system_from_dict(sys_data)
    target = parse_target(args.target, args.n_osc, args.delta) if args.target else None
    rates, chosen = _rates(args)
    cfg = SimConfig(n_osc=args.n_osc, n_th_c=args.initial_nth)
    try:
        res = simulate_master_equation(seq, sysp, rates, cfg, target)
    except FloatingPointError as e:
        raise NumericalFailure(str(e)) from e
    summary = {"fidelity": res.fidelity, "p_g": res.p_g, "guard_max": res.guard_max,
               "alpha_max": res.alpha_max, "alpha_final": res.alpha_final,
               "trace_error": res.trace_error, "min_eig": res.min_eig, "channels": chosen,
               "rates": rates.__dict__}
    outputs = []
    np.save(out / "rho.npy", res.rho)
    outputs.append(out / "rho.npy")
    if args.budget:
        if target is None:
            raise ConfigError("--budget needs --target")
        full, _ = _rates(argparse.Namespace(**{**vars(args), "channels": "all"}))
        b = error_budget(seq, sysp, full, target, SimConfig(n_osc=args.n_osc), n_th_c=0.025)
        f_b = out / "budget.csv"
        with open(f_b, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["channel", "rate", "infidelity_contribution"])
            for row in budget_rows(b, full):
                w.writerow([row[0], repr(float(row[1])), repr(float(row[2]))])
        outputs.append(f_b)
        summary["budget"] = b
    outputs.append(write_json(out / "sim.json", summary))
    write_manifest(out, "simulate", _snapshot(args), inputs=[pulse] + ([side_path] if meta else []),
                   outputs=outputs)
    print(json.dumps({"fidelity": res.fidelity, "p_g": res.p_g}))
    return EXIT_OK


# -- tomography ----------------------------------------------------------------------------

def _basis_zeta(text: str) -> float:
    from .fock import zeta_from_db

    kind, _, arg = text.partition(":")
    if kind == "fock":
        return 0.0
    if kind == "squeezed":
        s = arg.strip().lower()
        try:
            return zeta_from_db(float(s[:-2] if s.endswith("db") else s))
        except ValueError as e:
            raise ConfigError(f"bad basis {text!r}") from e
    raise ConfigError(f"bad basis {text!r}; expected 'fock' or 'squeezed:<x>db'")


def cmd_tomo(args) -> int:
    from .fock import ket2dm
    from .tomography import (ReconstructionConfig, default_extent, half_grid, mle_reconstruct,
                             postprocess, simulate_tomography)

    out = _out_dir(args)
    if bool(args.state) == bool(args.rho):
        raise ConfigError("give exactly one of --state or --rho")
    inputs = []
    if args.rho:
        rho = np.load(_require(args.rho))
        inputs.append(args.rho)
        n = rho.shape[0] // 2
        blk = rho[:n, :n]
        target = blk / np.trace(blk).real
    else:
        target = ket2dm(parse_target(args.state, args.n_osc, args.delta))
        rho = target
    extent = args.extent or default_extent(target)
    betas = half_grid(extent, args.points, args.points // 2 + 1)
    raw = simulate_tomography(rho, betas, shots=args.shots, readout_error=args.readout_error,
                              n_osc=target.shape[0], rng=args.seed)
    grid = postprocess(raw)
    dims = tuple(int(d) for d in args.dims.split(","))
    rcfg = ReconstructionConfig(dims=dims, basis_zeta=_basis_zeta(args.basis))
    rec = mle_reconstruct(grid, rcfg, target=target)
    f_grid = out / "chargrid.csv"
    grid.to_csv(f_grid)
    info = rec.to_json()
    info.update({"extent": extent, "shots": args.shots, "hermiticity_error": grid.hermiticity_error(),
                 "c0": complex(grid.value_at(0))})
    f_rec = write_json(out / "reconstruction.json", info)
    np.save(out / "rho_reconstructed.npy", rec.rho)
    write_manifest(out, "tomo", _snapshot(args), [args.seed], inputs=inputs,
                   outputs=[f_grid, f_rec, out / "rho_reconstructed.npy"])
    print(json.dumps({"fidelity": rec.fidelity, "dimension": rec.dim}))
    return EXIT_OK


# -- report -----------------------------------------------------------------------------------

def cmd_report(args) -> int:
    from .pulses import SystemParams, duration_model

    run = Path(args.run_dir)
    if not run.is_dir():
        raise FileNotFoundError(f"run directory not found: {run}")
    circuits = sorted(run.rglob("circuit.json"))
    if not circuits:
        raise FileNotFoundError(f"no circuit.json under {run}")
    out = Path(args.out) if args.out else run
    out.mkdir(parents=True, exist_ok=True)
    sysp = SystemParams()
    depth_rows, dur_rows = [], []
    for path in circuits:
        data = json.loads(path.read_text())
        s = data.get("summary", {})
        depth_rows.append([s.get("target"), s.get("minimal_N"), s.get("fidelity"), str(path.parent)])
        params = _load_circuit(path)
        for a0 in np.geomspace(1, 100, 21):
            t_inst, t_con = duration_model(params, a0, sysp)
            dur_rows.append([s.get("target"), repr(float(a0)), repr(t_inst), repr(t_con)])
    f1, f2 = out / "minimal_depths.csv", out / "durations.csv"
    with open(f1, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["target", "minimal_N", "fidelity", "run"])
        w.writerows(depth_rows)
    with open(f2, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["target", "alpha0", "t_inst", "t_constraint"])
        w.writerows(dur_rows)
    write_manifest(out, "report", _snapshot(args), inputs=circuits, outputs=[f1, f2])
    print(json.dumps({"circuits": len(circuits)}))
    return EXIT_OK


# -- parser ---------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ecdsynth", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    o = sub.add_parser("optimize", help="optimize an ECD circuit")
    o.add_argument("--target", required=True,
                   help="fock:n | coherent:a | squeezed:<x>db | binomial:<label> | gkp:<label> | gate:S|T")
    o.add_argument("--N", type=int, default=None, help="circuit depth")
    o.add_argument("--depth-sweep", default=None, help="depth range 'a..b'; stops at the first success")
    o.add_argument("--fidelity", type=float, default=0.99)
    o.add_argument("--delta", type=float, default=0.306, help="GKP envelope width")
    o.add_argument("--n-osc", type=int, default=40)
    o.add_argument("--batch", type=int, default=500)
    o.add_argument("--epochs", type=int, default=50)
    o.add_argument("--lr", type=float, default=1e-3)
    o.add_argument("--patience", type=int, default=None)
    o.add_argument("--cost", choices=("log", "real"), default="log")
    o.add_argument("--seed", type=int, default=0)
    o.set_defaults(func=cmd_optimize)

    c = sub.add_parser("compile", help="compile a circuit into drive envelopes")
    c.add_argument("--circuit", required=True)
    c.add_argument("--alpha0", type=float, default=30.0)
    c.add_argument("--system", default=None, help="JSON of system parameters with unit strings")
    c.add_argument("--chi", default=None, help="dispersive shift, e.g. 33khz")
    c.add_argument("--linear", action="store_true", help="compile without chi' and Kerr")
    c.set_defaults(func=cmd_compile)

    s = sub.add_parser("simulate", help="simulate a compiled pulse")
    s.add_argument("--pulse", required=True, help="pulse CSV; the sidecar JSON is read if present")
    s.add_argument("--target", default=None)
    s.add_argument("--delta", type=float, default=0.306)
    s.add_argument("--n-osc", type=int, default=40)
    s.add_argument("--channels", default="all", help="'all', 'none' or a comma-separated list")
    s.add_argument("--qubit-t1", default="50us")
    s.add_argument("--qubit-t1-eff", default=None, help="effective qubit T1 under large displacements")
    s.add_argument("--qubit-t2e", default="65us")
    s.add_argument("--qubit-nth", type=float, default=0.0092)
    s.add_argument("--cavity-t1", default="436us")
    s.add_argument("--cavity-nth", type=float, default=0.025)
    s.add_argument("--kappa-phi", default="0hz", help="cavity dephasing rate ('6.67hz') or lifetime ('150ms')")
    s.add_argument("--initial-nth", type=float, default=0.0, help="initial cavity thermal population")
    s.add_argument("--budget", action="store_true", help="also write the per-channel budget")
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("tomo", help="simulated characteristic-function tomography")
    t.add_argument("--state", default=None, help="target spec as for optimize")
    t.add_argument("--rho", default=None, help="joint density matrix .npy from simulate")
    t.add_argument("--delta", type=float, default=0.306)
    t.add_argument("--n-osc", type=int, default=60)
    t.add_argument("--shots", type=int, default=None)
    t.add_argument("--readout-error", type=float, default=0.0)
    t.add_argument("--extent", type=float, default=None)
    t.add_argument("--points", type=int, default=81, help="grid points along Im(beta)")
    t.add_argument("--dims", default="10,15,20,25,30,35,40")
    t.add_argument("--basis", default="fock", help="fock | squeezed:<x>db")
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_tomo)

    r = sub.add_parser("report", help="aggregate circuits of a run directory into CSV tables")
    r.add_argument("run_dir")
    r.set_defaults(func=cmd_report)

    for sp in (o, c, s, t, r):
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--config", default=None, help="JSON file with option values")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    sub = parser._subparsers._group_actions[0].choices[args.command]
    defaults = {a.dest: a.default for a in sub._actions if a.dest != "help"}
    try:
        _apply_config(args, defaults)
        # validate unit strings early so typos fail as config errors
        if getattr(args, "chi", None):
            parse_frequency(args.chi)
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as e:
        print(f"missing input: {e}", file=sys.stderr)
        return EXIT_MISSING
    except (NumericalFailure, FloatingPointError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
