"""Command-line interface: ``margin-phase <subcommand> [flags]``.

Exit codes: 0 success, 1 domain error (JSON on stderr), 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from margin_phase import SCHEMA, __version__
from margin_phase.acceptance import Criterion, run_acceptance
from margin_phase.core import BlockSpec, MarginError, Margins, block_margins
from margin_phase.counting import BudgetExceeded, barvinok_log_bounds
from margin_phase.experiments import (
    CSV_FIELDS,
    CRITICAL_WINDOW,
    TrialPlan,
    clt_diagnostic,
    entry_law_experiment,
    independence_check,
    limit_means,
    phase_sweep,
    regime,
    slln_experiment,
    truncated_moment_experiment,
)
from margin_phase.sampling import METHODS, SamplerConfig, SamplerExhausted, uniform_samples
from margin_phase.typical import ConvergenceError, g_value, solve_typical, solve_typical_block

ACCEPT_FIELDS = ("id", "name", "status", "summary")


class UsageError(Exception):
    pass


class DomainError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error("usage", message)
        sys.exit(2)


def _emit_error(code: str, message: str) -> None:
    print(json.dumps({"schema": SCHEMA, "version": __version__, "error": {"code": code, "message": message}}),
          file=sys.stderr)


def _plain(x):
    """JSON default hook for numpy scalars and arrays."""
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (set, tuple)):
        return list(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, default=_plain, indent=2) + "\n"


def _csv_text(fields, rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(fields), lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for row in rows:
        w.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in fields})
    return buf.getvalue()


# --- argument helpers --------------------------------------------------------


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _spec(args) -> BlockSpec:
    missing = [f for f in ("n", "delta", "B", "C") if getattr(args, f, None) is None]
    if missing:
        raise UsageError(f"missing block parameters: {', '.join('--' + m for m in missing)}")
    try:
        return BlockSpec(args.n, args.delta, args.B, args.C)
    except ValueError as exc:
        raise DomainError("invalid_spec", str(exc)) from exc


def _margins(args, materialize: bool = True) -> tuple[Margins | None, BlockSpec | None]:
    """Margins from a file, or from block flags (left unbuilt unless ``materialize``)."""
    if getattr(args, "margins_file", None):
        path = Path(args.margins_file)
        if not path.exists():
            raise DomainError("file_not_found", f"no such file: {path}")
        try:
            return Margins.from_json(path.read_text()), None
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise DomainError("bad_margins_file", f"{path}: {exc}") from exc
    spec = _spec(args)
    return (block_margins(spec) if materialize else None), spec


def _sampler(args) -> SamplerConfig:
    return SamplerConfig(
        method=args.method,
        seed=args.seed,
        mcmc_burnin=args.burnin,
        mcmc_thin=args.thin,
        rejection_max_tries=args.max_tries,
        chains=args.chains,
    )


def _envelope(command: str, args, result) -> dict:
    config = {k: v for k, v in vars(args).items() if k not in ("out", "format", "gnuplot_hint", "func", "command")}
    return {"schema": SCHEMA, "version": __version__, "command": command, "config": config, "result": result}


def _write(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _hint(args, recipe: str) -> None:
    if args.gnuplot_hint:
        print(recipe, file=sys.stderr)


# --- subcommands -------------------------------------------------------------


def cmd_typical(args) -> int:
    margins, spec = _margins(args, materialize=False)
    if spec is not None:
        bt = solve_typical_block(spec, tol=args.tol)
        result = {"block": bt.to_dict(), "regime": regime(spec.B, spec.C), "limits": limit_means(spec.B, spec.C)}
        row = {"n": spec.n, "delta": spec.delta, "B": spec.B, "C": spec.C, "z11": bt.z11, "z1n1": bt.z1n1,
               "znn": bt.znn, "scaled_z11": bt.scaled_z11, "P": bt.P, "Q": bt.Q, "residual": bt.residual}
        fields = list(row)
        rows = [row]
    else:
        tt = solve_typical(margins, tol=args.tol, max_iter=args.max_iter)
        result = {**tt.to_dict(), "g": g_value(tt.z), "sweeps": tt.sweeps}
        fields = ["i", "j", "z"]
        rows = [{"i": i, "j": j, "z": tt.z[i, j]} for i in range(margins.m) for j in range(margins.n)]
    if args.format == "csv":
        _write(args, _csv_text(fields, rows))
    else:
        _write(args, dumps(_envelope("typical", args, result)))
    return 0


def cmd_count(args) -> int:
    margins, _ = _margins(args)
    res = barvinok_log_bounds(margins, tol=args.tol)
    if args.format == "csv":
        d = res.to_dict()
        row = {"exact": d.get("exact"), "log_exact": d.get("log_exact"), "log_upper": res.log_upper,
               "N": res.N, "m_plus_n": res.m_plus_n}
        _write(args, _csv_text(list(row), [row]))
    else:
        _write(args, dumps(_envelope("count", args, res.to_dict())))
    return 0


def cmd_sample(args) -> int:
    margins, _ = _margins(args)
    cfg = _sampler(args)
    tables = list(uniform_samples(margins, cfg, args.count))
    m, n = margins.shape
    if args.format == "csv":
        cells = [f"x_{i}_{j}" for i in range(m) for j in range(n)]
        fields = ["seed", "method", "index"] + cells
        rows = [{"seed": cfg.seed, "method": cfg.method, "index": t, **dict(zip(cells, tab.ravel().tolist()))}
                for t, tab in enumerate(tables)]
        _write(args, _csv_text(fields, rows))
    else:
        head = {k: v for k, v in _envelope("sample", args, None).items() if k != "result"}
        head["sampler"] = cfg.to_dict()
        lines = [json.dumps(head, default=_plain)]
        lines += [json.dumps({"index": t, "table": tab.tolist()}) for t, tab in enumerate(tables)]
        _write(args, "\n".join(lines) + "\n")
    return 0


def cmd_entrylaw(args) -> int:
    res = entry_law_experiment(TrialPlan(_spec(args), args.trials, _sampler(args)), args.threads)
    if args.format == "csv":
        _write(args, _csv_text(CSV_FIELDS, res.csv_rows()))
    else:
        _write(args, dumps(_envelope("entrylaw", args, res.to_dict())))
    _hint(args, "set logscale y; plot 'hist.csv' using 1:3 with impulses title 'empirical', "
                "(1/(1+L))*(L/(1+L))**x title 'Geom(L)'   # L = z_ref of the class")
    return 0


def cmd_sweep(args) -> int:
    if None in (args.n, args.delta, args.C):
        raise UsageError("sweep needs --n, --delta and --C")
    try:
        res = phase_sweep(args.C, args.delta, args.n, args.B_grid, args.trials, _sampler(args),
                          window=args.window, include_critical=args.include_critical, threads=args.threads)
    except ValueError as exc:
        raise DomainError("critical_window", str(exc)) from exc
    if args.format == "csv":
        _write(args, _csv_text(CSV_FIELDS, res.csv_rows()))
    else:
        _write(args, dumps(_envelope("sweep", args, res.to_dict())))
    _hint(args, "set datafile separator ','; plot 'sweep.csv' using 4:10 every ::0::0 "
                "with yerrorbars title 'mean X11'   # filter class == TL first")
    return 0


def cmd_slln(args) -> int:
    if None in (args.delta, args.C):
        raise UsageError("slln needs --delta and --C")
    n_grid = args.n_grid or ([args.n] if args.n else None)
    if not n_grid:
        raise UsageError("slln needs --n or --n-grid")
    specs = [BlockSpec(n, args.delta, B, args.C) for n in n_grid for B in args.B_grid]
    rows = slln_experiment(specs, args.trials, _sampler(args), args.threads)
    if args.format == "csv":
        fields = ["n", "delta", "B", "C", "trials", "seed", "sampler", "first_mean", "first_se", "first_ref",
                  "first_typical", "br_mean", "br_se", "br_ref", "br_typical"]
        out = [{**r.spec.to_dict(), "trials": r.trials, "seed": args.seed, "sampler": args.method,
                **{f: getattr(r, f) for f in fields[7:]}} for r in rows]
        _write(args, _csv_text(fields, out))
    else:
        _write(args, dumps(_envelope("slln", args, [r.to_dict() for r in rows])))
    return 0


def cmd_clt(args) -> int:
    try:
        res = clt_diagnostic(_spec(args), args.trials, _sampler(args), args.threads)
    except ValueError as exc:
        raise DomainError("critical_B", str(exc)) from exc
    if args.format == "csv":
        fields = ["statistic", "mean", "var", "skewness", "kurtosis"]
        rows = [{"statistic": k, **v} for k, v in res.items() if isinstance(v, dict) and "skewness" in v]
        _write(args, _csv_text(fields, rows))
    else:
        _write(args, dumps(_envelope("clt", args, res)))
    return 0


def cmd_indep(args) -> int:
    spec = _spec(args)
    if args.pair is None:
        k = spec.k
        pair = (k, k, k, k + 1)
    elif len(args.pair) != 4:
        raise UsageError("--pair takes four 0-based indices i1,j1,i2,j2")
    else:
        pair = tuple(args.pair)
    try:
        res = independence_check(spec, pair, args.trials, _sampler(args), null_reps=args.null_reps,
                                 relabel=not args.no_relabel, threads=args.threads)
    except IndexError as exc:
        raise DomainError("bad_index", str(exc)) from exc
    if args.format == "csv":
        d = res.to_dict()
        fields = ["n", "delta", "B", "C", "trials", "statistic", "stderr", "null_mean", "null_sd", "null_ratio", "eta"]
        _write(args, _csv_text(fields, [{**spec.to_dict(), **d}]))
    else:
        _write(args, dumps(_envelope("indep", args, res.to_dict())))
    return 0


def cmd_moments(args) -> int:
    res = truncated_moment_experiment(_spec(args), args.alpha, args.trials, _sampler(args), args.threads)
    if args.format == "csv":
        fields = ["class", "mean", "stderr", "truncated_mean", "excess_mean", "z_ref", "limit_ref",
                  "geom_truncated_mean"]
        _write(args, _csv_text(fields, [{"class": c, **v} for c, v in res["classes"].items()]))
    else:
        _write(args, dumps(_envelope("moments", args, res)))
    return 0


def _accept_outputs(args, crits) -> tuple[str, str]:
    payload = _envelope("accept", args, [c.to_dict() for c in crits])
    return dumps(payload), _csv_text(ACCEPT_FIELDS, [c.to_dict() for c in crits])


def cmd_accept(args) -> int:
    def log(c):
        print(f"[{c.status}] {c.id:>2} {c.name}: {c.summary}", flush=True)

    crits = run_acceptance(args.seed, args.threads, log=log)
    if args.repeat:
        again = run_acceptance(args.seed, args.threads)
        same = _accept_outputs(args, crits) == _accept_outputs(args, again)
        c14 = Criterion(14, "determinism", same, "two runs byte-identical" if same else "runs differ")
    else:
        c14 = Criterion(14, "determinism", None, "needs two runs; use --repeat or compare two output directories")
    log(c14)
    crits.append(c14)
    text_json, text_csv = _accept_outputs(args, crits)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "accept.json").write_text(text_json)
        (out / "accept.csv").write_text(text_csv)
    passed = sum(c.passed is True for c in crits)
    failed = sum(c.passed is False for c in crits)
    print(f"{passed} passed, {failed} failed, {len(crits) - passed - failed} skipped")
    return 0


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    common.add_argument("--out", help="output path (a directory for accept)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--gnuplot-hint", action="store_true", help="print a plot recipe on stderr")

    block = _Parser(add_help=False)
    block.add_argument("--n", type=int)
    block.add_argument("--delta", type=float)
    block.add_argument("--B", type=float)
    block.add_argument("--C", type=float)

    mfile = _Parser(add_help=False)
    mfile.add_argument("--margins-file", help='JSON file {"rows": [...], "cols": [...]}')

    def sampler_flags(p, seed_required=True, method="mcmc"):
        p.add_argument("--seed", type=int, required=seed_required, default=None if seed_required else 0)
        p.add_argument("--method", choices=METHODS, default=method)
        p.add_argument("--burnin", type=int, default=None)
        p.add_argument("--thin", type=int, default=None)
        p.add_argument("--max-tries", type=int, default=10**8)
        p.add_argument("--chains", type=int, default=1)

    parser = _Parser(prog="margin-phase", description="Typical tables, counting and sampling of contingency tables.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("typical", parents=[common, block, mfile], help="typical table")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=10_000)
    p.set_defaults(func=cmd_typical)

    p = sub.add_parser("count", parents=[common, block, mfile], help="exact count and g(Z) bound")
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("sample", parents=[common, block, mfile], help="uniform tables")
    sampler_flags(p)
    p.add_argument("--count", type=int, default=1)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("entrylaw", parents=[common, block], help="entry laws vs geometric references")
    sampler_flags(p)
    p.add_argument("--trials", type=int, default=10_000)
    p.set_defaults(func=cmd_entrylaw)

    p = sub.add_parser("sweep", parents=[common, block], help="E[X11] across B")
    sampler_flags(p)
    p.add_argument("--B-grid", type=_float_list, required=True)
    p.add_argument("--trials", type=int, default=2_000)
    p.add_argument("--window", type=float, default=CRITICAL_WINDOW)
    p.add_argument("--include-critical", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("slln", parents=[common, block], help="block row averages")
    sampler_flags(p)
    p.add_argument("--B-grid", type=_float_list, required=True)
    p.add_argument("--n-grid", type=_int_list)
    p.add_argument("--trials", type=int, default=50)
    p.set_defaults(func=cmd_slln)

    p = sub.add_parser("clt", parents=[common, block], help="fluctuation diagnostic (no pass/fail)")
    sampler_flags(p)
    p.add_argument("--trials", type=int, default=1_000)
    p.set_defaults(func=cmd_clt)

    p = sub.add_parser("indep", parents=[common, block], help="dependence between two entries")
    sampler_flags(p)
    p.add_argument("--pair", type=_int_list, help="i1,j1,i2,j2 (0-based); default two cells of the first light row")
    p.add_argument("--trials", type=int, default=50_000)
    p.add_argument("--null-reps", type=int, default=10)
    p.add_argument("--no-relabel", action="store_true")
    p.set_defaults(func=cmd_indep)

    p = sub.add_parser("moments", parents=[common, block], help="truncated moments per class")
    sampler_flags(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--trials", type=int, default=5_000)
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("accept", parents=[common], help="run the acceptance suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeat", action="store_true", help="run twice and compare outputs byte for byte")
    p.set_defaults(func=cmd_accept)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        _emit_error("usage", str(exc))
        return 2
    except DomainError as exc:
        _emit_error(exc.code, str(exc))
        return 1
    except MarginError as exc:
        _emit_error("infeasible_margins", str(exc))
        return 1
    except BudgetExceeded as exc:
        _emit_error("budget_exceeded", str(exc))
        return 1
    except SamplerExhausted as exc:
        _emit_error("sampler_exhausted", str(exc))
        return 1
    except ConvergenceError as exc:
        _emit_error("no_convergence", str(exc))
        return 1
    except ValueError as exc:
        _emit_error("invalid_value", str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
