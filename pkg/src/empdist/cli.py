"""Batch front end: model specs in, tables out.

    empdist <task> [--model ... | --instrument path] [task flags] --out path

Tasks: steady, psi, covariance, corr-info, markov-info, fisher, sample,
constraints, reproduce.  A JSON run config (--config) mirrors the flags.
Numeric tables are CSV (one row per parameter point); matrices and reports
are JSON with complex entries as [re, im] pairs.  Reproduction targets also
render a companion PNG unless --no-plot is given.

Exit status: 0 success, 2 validation/config error, 3 numerical failure
(dark state, degenerate steady state, support mismatch).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import models, serialization
from .empirical import analytic_covariance, covariance, ed_from_string, psi_asymptotic, psi_finite
from .errors import NumericsError, ValidationError
from .information import (
    correlation_information,
    ed_constraints_check,
    fisher_empirical,
    markov_information,
)
from .instruments import Instrument
from .sampler import dump_strings, load_strings, sample_ed_ensemble, sample_string
from .supop import devectorize

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

REPRODUCE_TARGETS = ("fig4", "fig5", "fig6", "fig7", "fig8", "fig9")


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return "inf" if math.isinf(value) else repr(value)
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_json(path: Path, obj: Any) -> None:
    with open(path, "w") as fh:
        serialization.dump_json(obj, fh)


# ---------------------------------------------------------------------------
# model construction
# ---------------------------------------------------------------------------


def build_model(spec: dict) -> Instrument:
    name = spec.get("name")
    params = dict(spec.get("params", {}))
    if name == "amp_damp":
        return models.amp_damp_qubit(models.AmpDampParams(lam=params["lam"], phi=params["phi"]))
    if name == "xx_chain":
        return models.xx_chain(models.XXChainParams(**params))
    if name == "periodic_chain":
        return models.periodic_chain(models.PeriodicChainParams(**params))
    if name == "classical_markov":
        matrix = np.asarray(params["transition"], dtype=float)
        return models.classical_markov(matrix)
    if name == "instrument":
        if "json" in spec:
            return serialization.instrument_from_json(spec["json"])
        with open(spec["path"]) as fh:
            return serialization.instrument_from_json(json.load(fh))
    raise ValidationError(f"unknown model {name!r}")


def model_spec_from_args(args: argparse.Namespace) -> dict:
    name = args.model
    if name is None:
        raise ValidationError("a model is required (--model or --config)")
    if name == "amp_damp":
        if args.lam is None or args.phi is None:
            raise ValidationError("amp_damp needs --lambda and --phi")
        return {"name": name, "params": {"lam": args.lam, "phi": args.phi}}
    if name == "xx_chain":
        params = {
            "sites": args.sites or 2,
            "hopping": args.J,
            "field": args.h,
            "gamma_left": args.gamma_l,
            "gamma_right": args.gamma_r,
            "fill_left": args.f_l,
            "fill_right": args.f_r,
        }
        if args.observed:
            params["observed"] = tuple(args.observed.split(","))
        return {"name": name, "params": params}
    if name == "periodic_chain":
        return {
            "name": name,
            "params": {
                "sites": args.sites or 3,
                "hopping": args.J,
                "pairing": args.kappa,
                "period": args.tau,
                "site_resolved": args.site_resolved,
                "parity_sector": args.parity_sector,
            },
        }
    if name == "classical_markov":
        if not args.chain_file:
            raise ValidationError("classical_markov needs --chain-file")
        with open(args.chain_file) as fh:
            return {"name": name, "params": {"transition": json.load(fh)}}
    if name == "instrument":
        if not args.instrument:
            raise ValidationError("inline instrument needs --instrument path")
        return {"name": name, "path": args.instrument}
    raise ValidationError(f"unknown model {name!r}")


# ---------------------------------------------------------------------------
# task handlers
# ---------------------------------------------------------------------------


def run_steady(inst: Instrument, args: argparse.Namespace) -> None:
    rho = devectorize(inst.steady_state)
    write_json(Path(args.out), {"steady_state": serialization.complex_matrix_to_json(rho)})


def run_psi(inst: Instrument, args: argparse.Namespace) -> None:
    if args.N is not None:
        psi = psi_finite(inst, args.L, args.N)
    else:
        psi = psi_asymptotic(inst, args.L)
    write_json(Path(args.out), serialization.psi_to_json(psi))


def run_covariance(inst: Instrument, args: argparse.Namespace) -> None:
    decomp = analytic_covariance(inst, args.L, n=args.N)
    write_json(Path(args.out), serialization.covariance_to_json(decomp))


def run_corr_info(inst: Instrument, args: argparse.Namespace) -> None:
    value = correlation_information(analytic_covariance(inst, 1))
    if args.format == "csv":
        write_csv(Path(args.out), ["I"], [[value]])
    else:
        write_json(Path(args.out), {"I": value})


def run_markov_info(inst: Instrument, args: argparse.Namespace) -> None:
    value = markov_information(inst, args.L, args.k)
    entry: dict[str, Any] = {"L": args.L, "k": args.k}
    if math.isinf(value):
        entry["I_L_k"] = "inf"
        entry["reason"] = "mean mismatch: k + 1 < L, divergence grows with N"
    else:
        entry["I_L_k"] = value
    if args.format == "csv":
        write_csv(Path(args.out), ["L", "k", "I_L_k"], [[args.L, args.k, value]])
    else:
        write_json(Path(args.out), entry)


def run_fisher(args: argparse.Namespace) -> None:
    if args.model != "xx_chain":
        raise ValidationError("fisher currently scans the xx_chain field parameter")
    if args.theta_param not in ("h", "field"):
        raise ValidationError(f"unsupported scan parameter {args.theta_param!r}; use 'h'")
    if args.theta0 is None:
        raise ValidationError("fisher needs --theta0")
    base = model_spec_from_args(args)["params"]
    base.pop("field", None)

    def family(theta: float) -> Instrument:
        return models.xx_chain(models.XXChainParams(field=theta, **base))

    n = args.N or 1
    value = fisher_empirical(family, args.theta0, args.L, n, step=args.h_step)
    row = {"theta0": args.theta0, "L": args.L, "N": n, "F": value, "F_over_N": value / n}
    if args.format == "csv":
        write_csv(Path(args.out), list(row), [list(row.values())])
    else:
        write_json(Path(args.out), row)


def run_sample(inst: Instrument, args: argparse.Namespace) -> None:
    if args.seed is None:
        raise ValidationError("sample requires an explicit --seed")
    ens = sample_ed_ensemble(inst, args.L, args.N, args.runs, seed=args.seed)
    write_json(Path(args.out), serialization.ensemble_to_json(ens, include_eds=args.include_eds))
    if args.dump:
        runs = [
            sample_string(inst, args.N, seed=args.seed, run_index=i).outcomes
            for i in range(args.dump_runs if args.dump_runs is not None else args.runs)
        ]
        with open(args.dump, "w") as fh:
            dump_strings(runs, fh)


def run_constraints(inst: Instrument | None, args: argparse.Namespace) -> None:
    if args.strings:
        with open(args.strings) as fh:
            strings = load_strings(fh)
        if inst is not None:
            alphabet = inst.alphabet
        elif args.alphabet:
            alphabet = tuple(args.alphabet.split(","))
        else:
            raise ValidationError("constraints needs --alphabet (or a model) with --strings")
    else:
        if inst is None or args.seed is None:
            raise ValidationError("constraints needs --strings, or a model plus --seed to sample")
        strings = [
            sample_string(inst, args.N, seed=args.seed, run_index=i).outcomes
            for i in range(args.runs)
        ]
        alphabet = inst.alphabet
    reports = []
    for s in strings:
        ed = ed_from_string(s, args.L, alphabet)
        reports.append(serialization.constraint_report_to_json(ed_constraints_check(ed)))
    write_json(Path(args.out), {"L": args.L, "count": len(reports), "reports": reports})


# ---------------------------------------------------------------------------
# reproduction targets
# ---------------------------------------------------------------------------


def _reproduce_fig4(out_dir: Path, plot: bool) -> None:
    lams = np.linspace(0.01, 0.99, 50)
    phis = np.array([math.pi * j / 9 for j in range(1, 10)])
    table = np.zeros((lams.size, phis.size))
    rows = []
    for i, lam in enumerate(lams):
        for j, phi in enumerate(phis):
            inst = models.amp_damp_qubit(lam=float(lam), phi=float(phi))
            value = correlation_information(analytic_covariance(inst, 1))
            table[i, j] = value
            rows.append([float(lam), float(phi), value])
    write_csv(out_dir / "fig4.csv", ["lambda", "phi", "I"], rows)
    if plot:
        from .figures import render_corr_info_grid

        render_corr_info_grid(lams, phis, table, str(out_dir / "fig4.png"))


def _markov_table_rows(inst: Instrument, lengths, orders):
    rows, values = [], []
    for length in lengths:
        vals = []
        for order in orders:
            v = markov_information(inst, length, order)
            vals.append(v)
            rows.append([length, order, v])
        values.append(vals)
    return rows, values


def _reproduce_fig5(out_dir: Path, plot: bool) -> None:
    inst = models.amp_damp_qubit(lam=0.8, phi=math.pi / 3)
    lengths, orders = (1, 2, 3), (0, 1, 2)
    rows, values = _markov_table_rows(inst, lengths, orders)
    write_csv(out_dir / "fig5.csv", ["L", "k", "I_L_k"], rows)
    if plot:
        from .figures import render_markov_table

        render_markov_table(lengths, orders, values, str(out_dir / "fig5.png"))


def _reproduce_fig6(out_dir: Path, plot: bool, sites_list=(2, 3)) -> None:
    hs = np.logspace(-1, 2, 25)
    rows = []
    rates = {}
    for sites in sites_list:
        base = dict(sites=sites)

        def family(theta: float) -> Instrument:
            return models.xx_chain(models.XXChainParams(field=theta, **base))

        vals = [fisher_empirical(family, float(h), length=1, n=1) for h in hs]
        rates[sites] = vals
        rows.extend([sites, float(h), v] for h, v in zip(hs, vals))
    write_csv(out_dir / "fig6.csv", ["sites", "h", "F_over_N"], rows)
    if plot:
        from .figures import render_fisher_rate

        render_fisher_rate(hs, rates, str(out_dir / "fig6.png"))


def _reproduce_fig7(out_dir: Path, plot: bool, sites_list=(2, 3)) -> None:
    hs = np.logspace(-1, 2, 25)
    f = 0.25
    bound = 0.5 * math.log(1.0 / ((1 - f) ** 2 + f**2)) - f * (1 - f)
    rows = []
    info = {}
    for sites in sites_list:
        vals = []
        for h in hs:
            inst = models.xx_chain(models.XXChainParams(sites=sites, field=float(h)))
            vals.append(correlation_information(analytic_covariance(inst, 1)))
        info[sites] = vals
        rows.extend([sites, float(h), v, bound] for h, v in zip(hs, vals))
    write_csv(out_dir / "fig7.csv", ["sites", "h", "I", "bound"], rows)
    if plot:
        from .figures import render_info_vs_field

        render_info_vs_field(hs, info, bound, str(out_dir / "fig7.png"))


def _reproduce_fig8(out_dir: Path, plot: bool, sites: int = 3) -> None:
    inst = models.periodic_chain(
        models.PeriodicChainParams(sites=sites, pairing=1.0, period=1.0, parity_sector="even")
    )
    lengths, orders = (1, 2, 3), (0, 1, 2)
    rows, values = _markov_table_rows(inst, lengths, orders)
    write_csv(out_dir / "fig8.csv", ["L", "k", "I_L_k"], rows)
    if plot:
        from .figures import render_markov_table

        render_markov_table(
            lengths, orders, values, str(out_dir / "fig8.png"), title=f"{sites}-site ring"
        )


def _reproduce_fig9(out_dir: Path, plot: bool, runs: int = 10_000, n: int = 1000, seed: int = 99) -> None:
    samples = {}
    rows = []
    for tau in (0.05, 1.0):
        inst = models.periodic_chain(
            models.PeriodicChainParams(sites=3, pairing=0.1, period=tau)
        )
        rho0 = np.eye(inst.dim) / inst.dim  # degenerate channel: start from the flat mixture
        ens = sample_ed_ensemble(inst, 1, n, runs, seed=seed, rho0=rho0)
        q_plus = ens.eds[:, 0]
        samples[tau] = q_plus
        rows.extend([tau, i, float(v)] for i, v in enumerate(q_plus))
    write_csv(out_dir / "fig9.csv", ["tau", "run", "q_plus"], rows)
    if plot:
        from .figures import render_ed_histograms

        render_ed_histograms(samples, str(out_dir / "fig9.png"))


def run_reproduce(args: argparse.Namespace) -> None:
    out_dir = Path(args.out_dir or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    plot = not args.no_plot
    target = args.target
    if target == "fig4":
        _reproduce_fig4(out_dir, plot)
    elif target == "fig5":
        _reproduce_fig5(out_dir, plot)
    elif target == "fig6":
        _reproduce_fig6(out_dir, plot)
    elif target == "fig7":
        _reproduce_fig7(out_dir, plot)
    elif target == "fig8":
        _reproduce_fig8(out_dir, plot, sites=args.sites or 3)
    elif target == "fig9":
        _reproduce_fig9(
            out_dir,
            plot,
            runs=args.runs or 10_000,
            n=args.N or 1000,
            seed=args.seed if args.seed is not None else 99,
        )
    else:
        raise ValidationError(f"unknown reproduce target {target!r}")


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("model")
    group.add_argument(
        "--model",
        choices=["amp_damp", "xx_chain", "periodic_chain", "classical_markov", "instrument"],
    )
    group.add_argument("--lambda", dest="lam", type=float, help="damping in [0, 1]")
    group.add_argument("--phi", type=float, help="rotation angle in radians")
    group.add_argument("--sites", type=int, help="chain/ring size")
    group.add_argument("--J", type=float, default=1.0, help="hopping amplitude")
    group.add_argument("--h", type=float, default=0.0, help="field gradient span")
    group.add_argument("--gamma-l", type=float, default=1.0)
    group.add_argument("--gamma-r", type=float, default=1.0)
    group.add_argument("--f-l", type=float, default=0.75)
    group.add_argument("--f-r", type=float, default=0.25)
    group.add_argument("--observed", help="comma list among L+,L-,R+,R-")
    group.add_argument("--kappa", type=float, default=1.0, help="pair creation/annihilation")
    group.add_argument("--tau", type=float, default=1.0, help="measurement period")
    group.add_argument("--site-resolved", action="store_true")
    group.add_argument("--parity-sector", choices=["even", "odd"])
    group.add_argument("--chain-file", help="JSON column-stochastic matrix")
    group.add_argument("--instrument", help="instrument JSON path")
    group.add_argument("--save-instrument", help="also write the constructed instrument JSON here")


def _add_io_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", default="out.json")
    parser.add_argument("--format", choices=["csv", "json"], default="json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="empdist", description=__doc__.split("\n\n")[0])
    parser.add_argument("--config", help="JSON run config supplying the task and flags")
    sub = parser.add_subparsers(dest="task")

    for task in ("steady", "psi", "covariance", "corr-info", "markov-info"):
        p = sub.add_parser(task)
        _add_model_flags(p)
        _add_io_flags(p)
        p.add_argument("--seed", type=int, help=argparse.SUPPRESS)
        if task in ("psi", "covariance", "markov-info"):
            p.add_argument("-L", "--L", dest="L", type=int, default=1)
        if task in ("psi", "covariance"):
            p.add_argument("--N", type=int, help="finite-N (psi: exact sum; covariance: attaches n_eff)")
        if task == "markov-info":
            p.add_argument("-k", "--k", dest="k", type=int, required=True)

    p = sub.add_parser("fisher")
    _add_model_flags(p)
    _add_io_flags(p)
    p.add_argument("-L", "--L", dest="L", type=int, default=1)
    p.add_argument("--N", type=int)
    p.add_argument("--theta-param", default="h", help="scanned parameter (xx_chain field)")
    p.add_argument("--theta0", type=float)
    p.add_argument("--h-step", type=float, default=1e-5, help="relative finite-difference step")

    p = sub.add_parser("sample")
    _add_model_flags(p)
    _add_io_flags(p)
    p.add_argument("-L", "--L", dest="L", type=int, default=1)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--runs", type=int, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--dump", help="write raw outcome strings here, one run per line")
    p.add_argument("--dump-runs", type=int, help="limit how many runs are dumped")
    p.add_argument("--include-eds", action="store_true", help="embed per-run EDs in the JSON")

    p = sub.add_parser("constraints")
    _add_model_flags(p)
    _add_io_flags(p)
    p.add_argument("-L", "--L", dest="L", type=int, default=2)
    p.add_argument("--N", type=int, default=1000)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--seed", type=int)
    p.add_argument("--strings", help="file of sampled strings (one run per line)")
    p.add_argument("--alphabet", help="comma list of labels when --strings has no model")

    p = sub.add_parser("reproduce")
    p.add_argument("target", choices=REPRODUCE_TARGETS)
    p.add_argument("--out-dir", default="reproductions")
    p.add_argument("--no-plot", action="store_true")
    p.add_argument("--sites", type=int, help="fig8 ring size (guarded)")
    p.add_argument("--runs", type=int, help="fig9 run count override")
    p.add_argument("--N", type=int, help="fig9 string length override")
    p.add_argument("--seed", type=int, help="fig9 seed override")
    return parser


_MODEL_TASKS = {"steady", "psi", "covariance", "corr-info", "markov-info", "sample"}


def _apply_config(argv: list[str]) -> list[str]:
    """Expand --config file.json into an equivalent flag list."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    path = argv[idx + 1]
    rest = argv[:idx] + argv[idx + 2 :]
    with open(path) as fh:
        cfg = json.load(fh)
    task = cfg.get("task")
    if not task:
        raise ValidationError("run config must contain a 'task' field")
    flags: list[str] = [task]
    if task == "reproduce":
        flags.append(cfg["target"])
    model = cfg.get("model")
    if isinstance(model, str):
        flags += ["--model", model]
    elif isinstance(model, dict):
        flags += ["--model", model["name"]]
        rename = {"lam": "lambda", "gamma_left": "gamma-l", "gamma_right": "gamma-r",
                  "fill_left": "f-l", "fill_right": "f-r", "hopping": "J", "field": "h",
                  "pairing": "kappa", "period": "tau", "parity_sector": "parity-sector"}
        for key, value in model.get("params", {}).items():
            flag = rename.get(key, key.replace("_", "-"))
            if isinstance(value, bool):
                if value:
                    flags.append(f"--{flag}")
            else:
                flags += [f"--{flag}", str(value)]
        if "path" in model:
            flags += ["--instrument", model["path"]]
    for key, value in cfg.get("params", {}).items():
        if isinstance(value, bool):
            if value:
                flags.append(f"--{key.replace('_', '-')}")
        else:
            flags += [f"--{key.replace('_', '-')}" if len(key) > 1 else f"-{key}", str(value)]
    for key in ("out", "format", "seed"):
        if key in cfg:
            flags += [f"--{key}", str(cfg[key])]
    if "out_dir" in cfg:
        flags += ["--out-dir", str(cfg["out_dir"])]
    return flags + rest


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _apply_config(argv)
    except (ValidationError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.task:
        parser.print_help()
        return EXIT_VALIDATION
    try:
        if args.task == "reproduce":
            run_reproduce(args)
            return EXIT_OK
        inst: Instrument | None = None
        needs_model = args.task in _MODEL_TASKS or (args.task == "fisher") or (
            args.task == "constraints" and not args.strings
        )
        if args.task == "fisher":
            run_fisher(args)
            return EXIT_OK
        if needs_model or (args.model and args.task == "constraints"):
            inst = build_model(model_spec_from_args(args))
            if getattr(args, "save_instrument", None):
                write_json(Path(args.save_instrument), serialization.instrument_to_json(inst))
        if args.task == "steady":
            run_steady(inst, args)
        elif args.task == "psi":
            run_psi(inst, args)
        elif args.task == "covariance":
            run_covariance(inst, args)
        elif args.task == "corr-info":
            run_corr_info(inst, args)
        elif args.task == "markov-info":
            run_markov_info(inst, args)
        elif args.task == "sample":
            run_sample(inst, args)
        elif args.task == "constraints":
            run_constraints(inst, args)
        else:
            raise ValidationError(f"unknown task {args.task!r}")
        return EXIT_OK
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
