"""Command-line entry point: ``trapchem <subcommand> [options]``.

Every run writes its fully resolved configuration to ``config.json`` in the
output directory next to the CSV/JSON data files.

Exit codes: 0 success, 2 input error, 3 numerical guard tripped,
4 optimizer stagnated (outputs still written).
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys

import numpy as np

from . import errors
from .fermion import (
    bundled_h2_path,
    build_electronic_hamiltonian,
    census_json,
    hartree_fock_state,
    load_integrals,
    term_census,
)
from .hilbert import HilbertLayout

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_STAGNATION = 0, 2, 3, 4

_NUMERIC_ERRORS = (errors.TruncationError, errors.NormalizationError, errors.SamplingError,
                   errors.SaddlePointError, errors.ProtocolError)


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _grid(text: str) -> list[float]:
    """``start:stop:count`` (inclusive linspace) or a comma list."""
    if ":" in text:
        try:
            a, b, n = text.split(":")
            return [float(x) for x in np.linspace(float(a), float(b), int(n))]
        except ValueError:
            raise argparse.ArgumentTypeError(f"grid must be start:stop:count, got {text!r}") from None
    return _floats(text)


def _dump_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _echo_config(args, out: str, **resolved) -> None:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    cfg.update(resolved)
    _dump_json(os.path.join(out, "config.json"), cfg)


def _prepare_out(path: str) -> str:
    out = os.path.abspath(path)
    os.makedirs(out, exist_ok=True)
    return out


def _integrals_path(path: str | None) -> str:
    return os.path.abspath(path) if path else bundled_h2_path("0.75")


# --------------------------------------------------------------------------- subcommands


def cmd_trotter_bench(args) -> int:
    from .trotter import (
        ErrorModel,
        TrotterPlan,
        accumulated_gate_error,
        crossing_time,
        digital_error_curve,
        energy_trace,
        estimate_hamiltonian_resources,
        estimate_resources,
        linearized_gate_error,
        write_energy_csv,
        write_error_csv,
    )

    path = _integrals_path(args.integrals)
    out = _prepare_out(args.out)
    ints = load_integrals(path)
    h = build_electronic_hamiltonian(ints)
    scale = 1.0
    if args.units == "h11":
        scale = 1.0 / abs(ints.one_body[0, 0])
        h = h * scale
    psi = hartree_fock_state(HilbertLayout(ints.n_orbitals), ints.n_electrons, ints.n_orbitals)
    curves = digital_error_curve(h, psi, args.t_grid, args.steps, backend=args.backend)
    write_error_csv(os.path.join(out, "digital_error.csv"), curves, args.eps)
    traces = {n: energy_trace(h, psi, args.t_grid, n, backend=args.backend) for n in args.steps}
    write_energy_csv(os.path.join(out, "energy_trace.csv"), traces)
    lines = []
    for eps in args.eps:
        for n in args.steps:
            model = ErrorModel(eps)
            acc = accumulated_gate_error(n, model)
            lines.append({"epsilon": eps, "n": n, "accumulated_error": acc,
                          "accumulated_error_linear": linearized_gate_error(n, model),
                          "crossing_t": crossing_time(curves.t, curves.curve(n), acc)})
    _dump_json(os.path.join(out, "gate_error_lines.json"), lines)
    census = term_census(h)
    res = {}
    for n in args.steps:
        plan = TrotterPlan.for_hamiltonian(h, 1.0, n)
        entry = {"compiled": estimate_hamiltonian_resources(h, plan).to_dict()}
        if args.nonlocal_terms is not None:
            entry["declared_count"] = estimate_resources(args.nonlocal_terms, n).to_dict()
        res[str(n)] = entry
    _dump_json(os.path.join(out, "resources.json"), {"census": census, "by_steps": res})
    _echo_config(args, out, integrals=path, energy_scale=scale)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_vqe(args) -> int:
    from .measure import extract_spectrum, phase_estimation_scan, spectrum_json
    from .ucc import OptimizerConfig, quantum_assisted_optimize

    path = _integrals_path(args.integrals)
    out = _prepare_out(args.out)
    ints = load_integrals(path)
    h = build_electronic_hamiltonian(ints)
    cfg = _optimizer_config(args)
    res = quantum_assisted_optimize(ints, cfg, h)
    with open(os.path.join(out, "trace.jsonl"), "w") as fh:
        fh.write(res.trace_jsonl())
    t = np.arange(args.pea_samples) * args.pea_dt
    lines = extract_spectrum(phase_estimation_scan(res.state, h, t))
    with open(os.path.join(out, "spectrum.json"), "w") as fh:
        fh.write(spectrum_json(lines) + "\n")
    summary = {"energy": res.energy, "hf_energy": res.hf_energy, "e_nuc": ints.e_nuc,
               "total_energy": res.energy + ints.e_nuc, "converged": res.converged,
               "stagnated": res.stagnated, "iterations": len(res.trace) - 1,
               "amplitudes": res.amplitudes.to_dict()}
    _dump_json(os.path.join(out, "summary.json"), summary)
    _echo_config(args, out, integrals=path)
    print(f"E* = {res.energy!r} (HF {res.hf_energy!r}); wrote {out}")
    return EXIT_STAGNATION if res.stagnated else EXIT_OK


def _optimizer_config(args):
    from .ucc import OptimizerConfig

    return OptimizerConfig(initial_step=args.step, tolerance=args.tolerance, max_iterations=args.max_iter,
                           delta=1.0 / args.slices, gradient=args.gradient, backend=args.backend)


def cmd_pes(args) -> int:
    from .ucc import potential_energy_surface, write_surface_csv

    paths = []
    for p in args.integrals:
        if os.path.isdir(p):
            paths += sorted(glob.glob(os.path.join(p, "*.txt")))
        else:
            paths.append(os.path.abspath(p))
    if not paths:
        raise errors.DomainError("no integral files given")
    out = _prepare_out(args.out)
    rows = potential_energy_surface(paths, _optimizer_config(args), np.arange(args.pea_samples) * args.pea_dt)
    write_surface_csv(os.path.join(out, "pes.csv"), rows)
    _echo_config(args, out, integrals=paths)
    failed = [r.label for r in rows if r.error]
    for r in rows:
        print(f"{r.label}: E_total = {r.total_energy!r}" + (f" ({r.error})" if r.error else ""))
    return EXIT_NUMERIC if failed and len(failed) == len(rows) else EXIT_OK


def cmd_vibronic(args) -> int:
    from .hilbert import basis_state, HybridState
    from .vibronic import absorption_spectrum, dipole_correlation, ion_protocol_fidelity, load_model

    model, opts = load_model(args.model)
    d = args.truncation or opts.get("truncation") or model.recommended_truncation()
    gamma = args.gamma or opts.get("gamma") or 0.05 * min(model.omega_g)
    dt = args.dt or opts.get("dt") or 0.2
    t_max = args.t_max or opts.get("t_max") or 10.0 / gamma
    out = _prepare_out(args.out)
    t = np.arange(int(round(t_max / dt)) + 1) * dt
    series = dipole_correlation(model, t, d)
    series.write_csv(os.path.join(out, "correlation.csv"))
    spec = absorption_spectrum(series, gamma)
    spec.write_csv(os.path.join(out, "spectrum.csv"))
    _dump_json(os.path.join(out, "peaks.json"),
               {"bin": spec.bin, "integrated": spec.integrated(),
                "peaks": [{"omega": p.omega, "weight": p.weight} for p in spec.peaks]})
    if args.protocol:
        lay = HilbertLayout(1, (d,))
        psi = basis_state(lay, "1", [0])
        with open(os.path.join(out, "protocol.csv"), "w") as fh:
            fh.write("slices,fidelity\n")
            for n in args.protocol_slices:
                fh.write(f"{n},{ion_protocol_fidelity(model, args.protocol_time, n, psi)!r}\n")
    _echo_config(args, out, model=os.path.abspath(args.model), truncation=d, gamma=gamma, dt=dt, t_max=t_max)
    print(f"{len(spec.peaks)} lines; wrote {out}")
    return EXIT_OK


def cmd_resources(args) -> int:
    from .trotter import TrotterPlan, estimate_hamiltonian_resources, estimate_resources

    result = {}
    if args.integrals:
        ints = load_integrals(os.path.abspath(args.integrals))
        h = build_electronic_hamiltonian(ints)
        result["census"] = term_census(h)
        for n in args.steps:
            result[str(n)] = estimate_hamiltonian_resources(h, TrotterPlan.for_hamiltonian(h, 1.0, n)).to_dict()
    else:
        if args.nonlocal_terms is None:
            raise errors.DomainError("give --integrals or --nonlocal-terms")
        for n in args.steps:
            result[str(n)] = estimate_resources(args.nonlocal_terms, n, args.local_rotations).to_dict()
    text = json.dumps(result, indent=2, sort_keys=True)
    if args.out:
        out = _prepare_out(args.out)
        with open(os.path.join(out, "resources.json"), "w") as fh:
            fh.write(text + "\n")
        _echo_config(args, out)
    print(text)
    return EXIT_OK


def cmd_selftest(args) -> int:
    """Quick oracle checks of the core kernels."""
    from .fermion import dense_fermion_matrix, jordan_wigner
    from .hilbert import HybridState, exact_unitary, pauli_matrix, random_state
    from .ionops import exp_pauli_string

    rng = np.random.default_rng(args.seed)
    checks = []
    worst = 0.0
    for s in ("Z", "XY", "ZXY", "YYXZ", "XZIYX"):
        lay = HilbertLayout(len(s))
        psi = random_state(lay, rng)
        phi = float(rng.uniform(-np.pi, np.pi))
        ref = exact_unitary(-pauli_matrix(s), phi) @ psi.amplitudes
        worst = max(worst, float(np.abs(exp_pauli_string(psi, phi, s).amplitudes - ref).max()))
    checks.append(("MS-compiled Pauli exponentials", worst, worst < 1e-10))
    ints = load_integrals(bundled_h2_path("0.75"))
    op = ints.fermion_operator()
    diff = float(np.abs(jordan_wigner(op, 4).to_matrix() - dense_fermion_matrix(op, 4)).max())
    checks.append(("Jordan-Wigner vs dense fermion matrix", diff, diff < 1e-12))
    census = term_census(build_electronic_hamiltonian(ints))
    checks.append(("H2 census", census_json(census).replace("\n", " "), census["nonlocal_count"] > 0))
    ok = True
    for name, value, passed in checks:
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {value}")
    return EXIT_OK if ok else EXIT_NUMERIC


# --------------------------------------------------------------------------- parser


def _add_optimizer_flags(p):
    p.add_argument("--slices", type=int, default=16, help="Trotter slices for state preparation (1/delta)")
    p.add_argument("--tolerance", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--step", type=float, default=1.0, help="initial gradient step")
    p.add_argument("--gradient", choices=("finite-difference", "commutator", "both"), default="finite-difference")
    p.add_argument("--backend", choices=("ms", "direct"), default="ms")
    p.add_argument("--pea-dt", type=float, default=0.5)
    p.add_argument("--pea-samples", type=int, default=1024)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trapchem", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("trotter-bench", help="digital error, gate-error lines, energy trace, resources")
    p.add_argument("--integrals", help="integral file (default: bundled H2 at 0.75 A)")
    p.add_argument("--out", default="out/trotter")
    p.add_argument("--steps", type=_ints, default=[1, 2, 3])
    p.add_argument("--t-grid", type=_grid, default=_grid("0:5:21"))
    p.add_argument("--eps", type=_floats, default=[1e-3, 1e-4, 1e-5])
    p.add_argument("--units", choices=("h11", "native"), default="h11")
    p.add_argument("--backend", choices=("ms", "direct"), default="ms")
    p.add_argument("--nonlocal-terms", type=int, help="also estimate resources for this nonlocal term count")
    p.set_defaults(func=cmd_trotter_bench)

    p = sub.add_parser("vqe", help="UCC optimization followed by phase estimation")
    p.add_argument("--integrals")
    p.add_argument("--out", default="out/vqe")
    _add_optimizer_flags(p)
    p.set_defaults(func=cmd_vqe)

    p = sub.add_parser("pes", help="potential energy surface over several geometries")
    p.add_argument("integrals", nargs="+", help="integral files or directories of *.txt files")
    p.add_argument("--out", default="out/pes")
    _add_optimizer_flags(p)
    p.set_defaults(func=cmd_pes)

    p = sub.add_parser("vibronic", help="dipole correlation and absorption spectrum of a model file")
    p.add_argument("model")
    p.add_argument("--out", default="out/vibronic")
    p.add_argument("--truncation", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--t-max", type=float)
    p.add_argument("--protocol", action="store_true", help="also run the two-ion protocol fidelity ladder")
    p.add_argument("--protocol-slices", type=_ints, default=[4, 8, 16])
    p.add_argument("--protocol-time", type=float, default=1.0)
    p.set_defaults(func=cmd_vibronic)

    p = sub.add_parser("resources", help="MS gate count and wall-time estimate")
    p.add_argument("--integrals")
    p.add_argument("--nonlocal-terms", type=int)
    p.add_argument("--local-rotations", type=int, default=0)
    p.add_argument("--steps", type=_ints, default=[1, 2, 3])
    p.add_argument("--out")
    p.set_defaults(func=cmd_resources)

    p = sub.add_parser("selftest", help="quick oracle checks")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except _NUMERIC_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        if isinstance(exc, errors.TruncationError):
            print("hint: increase the Fock truncation", file=sys.stderr)
        elif isinstance(exc, errors.WindowingError):
            print("hint: increase t_max or the damping gamma", file=sys.stderr)
        return EXIT_NUMERIC
    except (errors.TrapChemError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
