"""Command-line interface: fit models from CSV, simulate, sample.

Exit codes: 0 success, 2 usage or structural error, 3 numeric failure,
4 the fit ran but did not converge.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .em import FitOptions, fit
from .exceptions import InferenceError, NumericError, StructuralError
from .inference import bootstrap_se, info_criteria
from .model import Dataset, validate
from .simulate import BUILTIN_CASES, SimCase, SimConfig, gen_dataset, run_mc

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_NOT_CONVERGED = 4


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _round6(x: float) -> float:
    return float(f"{float(x):.6g}")


# ---------------------------------------------------------------------------
# CSV handling
# ---------------------------------------------------------------------------

def _read_csv(path: str) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            rows = [row for row in reader if row]
    except OSError as err:
        raise StructuralError(f"cannot read {path}: {err}") from err
    if header is None:
        raise StructuralError(f"{path} is empty; a header row is required")
    return [h.strip() for h in header], rows


def _column(header: list[str], rows: list[list[str]], name: str) -> np.ndarray:
    if name not in header:
        raise StructuralError(f"column '{name}' not found in CSV header")
    j = header.index(name)
    out = np.empty(len(rows))
    for i, row in enumerate(rows):
        try:
            out[i] = float(row[j])
        except (ValueError, IndexError) as err:
            raise StructuralError(
                f"non-numeric value at data row {i + 1}, column '{name}'"
            ) from err
    return out


def _block_matrix(
    header: list[str],
    rows: list[list[str]],
    names: list[str],
    intercept: bool,
    block: str,
) -> np.ndarray:
    cols = [_column(header, rows, c) for c in names]
    if intercept:
        cols.insert(0, np.ones(len(rows)))
    if not cols:
        raise StructuralError(
            f"{block} block needs at least one column or an intercept flag"
        )
    return np.column_stack(cols)


def _split_cols(spec: str | None) -> list[str]:
    if not spec:
        return []
    return [c.strip() for c in spec.split(",") if c.strip()]


# ---------------------------------------------------------------------------
# Coefficient specs
# ---------------------------------------------------------------------------

def _case_from_spec(args) -> SimCase:
    if getattr(args, "case", None):
        label = args.case
        if label not in BUILTIN_CASES:
            raise StructuralError(
                f"unknown case '{label}'; choose from {sorted(BUILTIN_CASES)} "
                "or pass --coeffs/--case-file"
            )
        case = BUILTIN_CASES[label]
        if getattr(args, "no_intercept", False):
            case = SimCase(case.label, case.beta0, case.gamma0, case.alpha0, False)
        return case
    raw = getattr(args, "coeffs", None) or getattr(args, "case_file", None)
    if raw is None:
        raise StructuralError("either --case or a coefficient spec is required")
    if raw.startswith("@"):
        raw_path = raw[1:]
    elif getattr(args, "case_file", None):
        raw_path = raw
    else:
        raw_path = None
    try:
        text = open(raw_path, encoding="utf-8").read() if raw_path else raw
        spec = json.loads(text)
        beta = spec["beta"]
        gamma = spec["gamma"]
        alpha = spec["alpha"]
    except OSError as err:
        raise StructuralError(f"cannot read coefficient file: {err}") from err
    except (json.JSONDecodeError, KeyError, TypeError) as err:
        raise StructuralError(
            "coefficient spec must be JSON with keys beta, gamma, alpha"
        ) from err
    label = spec.get("label", "custom")
    intercept = bool(spec.get("intercept", True)) and not getattr(
        args, "no_intercept", False
    )
    return SimCase(label, beta, gamma, alpha, intercept)


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def _fit_report(args) -> tuple[dict, int]:
    header, rows = _read_csv(args.data)
    loc = _split_cols(args.loc)
    scale = _split_cols(args.scale)
    skew = _split_cols(args.skew)
    for name in loc + scale + skew:
        if name == args.response:
            raise StructuralError(
                f"response column '{args.response}' cannot be a covariate"
            )
    y = _column(header, rows, args.response)
    d = Dataset(
        y,
        _block_matrix(header, rows, loc, args.intercept_loc, "location"),
        _block_matrix(header, rows, scale, args.intercept_scale, "scale"),
        _block_matrix(header, rows, skew, args.intercept_skew, "skewness"),
    )
    violations = validate(d)
    if violations:
        raise StructuralError("; ".join(violations))
    opts = FitOptions(tol=args.tol, max_iter=args.max_iter)
    result = fit(d, None, opts)
    p, q, r = d.dims
    crit = info_criteria(result.loglik, p + q + r, d.n)

    bse = None
    warnings = list(result.warnings)
    if args.bootstrap > 0:
        if result.converged:
            boot = bootstrap_se(d, opts, args.bootstrap, args.seed)
            bse = boot.se
            if boot.n_failed:
                warnings.append(
                    f"{boot.n_failed} of {boot.B} bootstrap resamples discarded"
                )
        else:
            warnings.append("bootstrap skipped: fit did not converge")

    theta = result.theta_hat
    report = {
        "schema_version": 1,
        "n": d.n,
        "p": p,
        "q": q,
        "r": r,
        "estimates": {
            "beta": [_round6(v) for v in theta.beta],
            "gamma": [_round6(v) for v in theta.gamma],
            "alpha": [_round6(v) for v in theta.alpha],
        },
        "bse": None
        if bse is None
        else {
            "beta": [_round6(v) for v in bse[:p]],
            "gamma": [_round6(v) for v in bse[p : p + q]],
            "alpha": [_round6(v) for v in bse[p + q :]],
        },
        "loglik": _round6(result.loglik),
        "aic": _round6(crit.aic),
        "bic": _round6(crit.bic),
        "edc": _round6(crit.edc),
        "iterations": result.n_iter,
        "converged": result.converged,
        "warnings": warnings,
    }
    return report, EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def _print_fit_report(report: dict) -> None:
    print("Joint location-scale-skewness fit (skew Laplace normal)")
    print(
        f"n = {report['n']}, p = {report['p']}, q = {report['q']}, "
        f"r = {report['r']}"
    )
    print(f"{'':<22}{'Estimate':>12}{'BSE':>12}")
    blocks = [
        ("Location model", "beta"),
        ("Scale model", "gamma"),
        ("Skewness model", "alpha"),
    ]
    bse = report["bse"]
    for title, key in blocks:
        print(title)
        for j, est in enumerate(report["estimates"][key]):
            se = _fmt(bse[key][j]) if bse else "-"
            print(f"  {key}_{j:<18}{_fmt(est):>12}{se:>12}")
    for name in ("loglik", "aic", "bic", "edc"):
        print(f"{name:<22}{_fmt(report[name]):>12}")
    print(
        f"iterations {report['iterations']}   "
        f"converged: {'yes' if report['converged'] else 'no'}"
    )
    for w in report["warnings"]:
        print(f"warning: {w}")


def cmd_fit(args) -> int:
    report, status = _fit_report(args)
    _print_fit_report(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    return status


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    case = _case_from_spec(args)
    n_list = tuple(int(v) for v in _split_cols(args.n))
    if not n_list:
        raise StructuralError("--n requires at least one sample size")
    try:
        config = SimConfig(case=case, n_list=n_list, N=args.reps, seed=args.seed)
    except ValueError as err:
        raise StructuralError(str(err)) from err
    table = run_mc(config)
    sys.stdout.write(table.to_text())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(table.to_tsv())
    return EXIT_OK


# ---------------------------------------------------------------------------
# sample
# ---------------------------------------------------------------------------

def cmd_sample(args) -> int:
    case = _case_from_spec(args)
    if args.n < 0:
        raise StructuralError("--n must be nonnegative")
    shift = 1 if case.intercept else 0
    names = (
        ["y"]
        + [f"x{j + 1}" for j in range(case.beta0.size - shift)]
        + [f"z{j + 1}" for j in range(case.gamma0.size - shift)]
        + [f"w{j + 1}" for j in range(case.alpha0.size - shift)]
    )
    lines = [",".join(names)]
    if args.n > 0:
        d = gen_dataset(case, args.n, args.seed)
        body = np.column_stack(
            [d.y, d.X[:, shift:], d.Z[:, shift:], d.W[:, shift:]]
        )
        lines += [",".join(_fmt(v) for v in row) for row in body]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slnreg",
        description=(
            "Joint location-scale-skewness regression under the skew "
            "Laplace normal distribution"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a model to a CSV file")
    p_fit.add_argument("--data", required=True, help="input CSV with header row")
    p_fit.add_argument("--response", required=True, help="response column name")
    p_fit.add_argument("--loc", default="", help="location columns, comma separated")
    p_fit.add_argument("--scale", default="", help="scale columns, comma separated")
    p_fit.add_argument("--skew", default="", help="skewness columns, comma separated")
    p_fit.add_argument(
        "--intercept-loc", action="store_true", help="prepend a constant to X"
    )
    p_fit.add_argument(
        "--intercept-scale", action="store_true", help="prepend a constant to Z"
    )
    p_fit.add_argument(
        "--intercept-skew", action="store_true", help="prepend a constant to W"
    )
    p_fit.add_argument("--tol", type=float, default=1e-6)
    p_fit.add_argument("--max-iter", type=int, default=1000)
    p_fit.add_argument(
        "--bootstrap", type=int, default=0, metavar="B",
        help="bootstrap resamples for standard errors (0 = skip)",
    )
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.add_argument("--out", help="write the JSON report here")
    p_fit.set_defaults(func=cmd_fit)

    p_sim = sub.add_parser("simulate", help="run the Monte Carlo study")
    p_sim.add_argument("--case", help="built-in scenario label (I, II, III)")
    p_sim.add_argument(
        "--case-file", help="JSON file with beta/gamma/alpha coefficient vectors"
    )
    p_sim.add_argument("--n", default="50,100,150,200", help="sample sizes, comma separated")
    p_sim.add_argument("--reps", type=int, default=1000, help="replications per n")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", help="write the TSV table here")
    p_sim.add_argument(
        "--no-intercept", action="store_true",
        help="draw every design column from U(-1,1), no constant column",
    )
    p_sim.set_defaults(func=cmd_simulate)

    p_sam = sub.add_parser("sample", help="write a synthetic CSV dataset")
    p_sam.add_argument("--case", help="built-in scenario label (I, II, III)")
    p_sam.add_argument(
        "--coeffs",
        help="JSON with beta/gamma/alpha vectors, inline or @file",
    )
    p_sam.add_argument("--n", type=int, required=True)
    p_sam.add_argument("--seed", type=int, default=0)
    p_sam.add_argument("--out", help="output CSV path (default: stdout)")
    p_sam.add_argument(
        "--no-intercept", action="store_true",
        help="attach every coefficient to a written U(-1,1) column",
    )
    p_sam.set_defaults(func=cmd_sample)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StructuralError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, InferenceError) as err:
        print(f"numeric error: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
