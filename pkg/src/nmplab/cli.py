"""Command-line entry point.

Subcommands: ``model``, ``constants``, ``green``, ``isoperimetric``,
``verify``, ``suite``, ``report``.  Exit codes: 0 success / all pass,
1 genuine inequality violation, 2 usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import List, Optional

import numpy as np

from . import harness
from .constants import constant_set
from .exceptions import ModelError, NMPError, NumericalFailure, UsageError
from .io import load_or_build, write_kernel
from .isoperimetric import (
    cheeger_sweep,
    estimate_cstar,
    slab_candidate,
    sobolev_ratio_ascent,
)
from .kernels import (
    green_by_time_integral,
    green_function,
    green_lower_bound_check,
    heat_kernel,
    kernel_identities,
)
from .records import NUMERICAL, VIOLATION
from .solver import rescaled_theorem_A_rhs

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    """argparse parser that raises instead of exiting, so dispatch owns exit codes."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return str(obj)


def _finite(x):
    # JSON has no inf/nan; emit them as strings
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if isinstance(x, dict):
        return {k: _finite(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite(v) for v in x]
    return x


def _emit(payload: dict, as_json: bool, table: Optional[List[tuple]] = None) -> None:
    if not as_json and table is not None:
        width = max(len(k) for k, _ in table)
        for k, v in table:
            print(f"{k:<{width}}  {v!r}" if isinstance(v, float) else f"{k:<{width}}  {v}")
    if as_json or table is None:
        print(json.dumps(_finite(payload), sort_keys=True, default=_json_default))


def _resolve_cstar(model, value: str, seed: int):
    if value == "auto":
        est = estimate_cstar(model, seed=seed)
        return est.value, f"auto:{est.method}"
    try:
        c = float(value)
    except ValueError:
        raise UsageError(f"--cstar must be 'auto' or a number, got {value!r}")
    if not c > 0:
        raise UsageError("--cstar must be positive")
    return c, "user"


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_model(args) -> int:
    m = load_or_build(args.model, args.cache)
    info = {
        "spec": m.spec,
        "kind": m.kind,
        "nodes": m.size,
        "modes": m.n_modes,
        "n": m.n_intrinsic,
        "volume": m.volume,
        "diameter": m.diameter,
        "lambda1": float(m.eigenvalues[1]) if m.n_modes > 1 else None,
        "lambda_max": float(m.eigenvalues[-1]),
        "gram_residual": m.gram_residual(),
        "complete": m.is_complete,
        "has_gradient": m.has_gradient,
    }
    if args.export:
        from .io import write_model

        write_model(m, args.export)
        info["exported"] = args.export
    _emit(info, args.json, list(info.items()))
    return EXIT_OK


def cmd_constants(args) -> int:
    cs = constant_set(args.n, args.p, args.cstar, args.tol)
    d = cs.as_dict()
    if not args.json:
        _emit(d, False, list(d.items()))
    # the object is always printed so the table and JSON agree bit for bit
    print(json.dumps(d, sort_keys=True))
    return EXIT_OK


def cmd_green(args) -> int:
    m = load_or_build(args.model, args.cache)
    cstar, source = _resolve_cstar(m, args.cstar, args.seed)
    G = green_function(m)
    rec = green_lower_bound_check(m, cstar, G, cstar_source=source)
    out = {"record": json.loads(rec.to_json())}
    rep = kernel_identities(m, args.t, args.t)
    out["identities"] = dict(vars(rep))
    if args.time_integral:
        Gt = green_by_time_integral(m, panels=args.panels)
        out["time_integral"] = {
            "max_abs_diff": float(np.max(np.abs(Gt.matrix - G.matrix))),
            **Gt.meta,
        }
    if args.export:
        kernel = heat_kernel(m, args.t) if args.kind == "heat" else G
        write_kernel(kernel, args.export)
        out["exported"] = args.export
    table = [
        ("min_offdiag_G0", rec.extras["sigma"]),
        ("bound", -rec.rhs),
        ("slack_ratio", rec.slack_ratio),
        ("cstar", cstar),
        ("status", rec.status),
    ]
    _emit(out, args.json, table)
    return EXIT_OK if rec.passed else EXIT_VIOLATION


def cmd_isoperimetric(args) -> int:
    m = load_or_build(args.model, args.cache)
    methods = {"ascent": ("ascent",), "sweep": ("sweep",), "slab": ("slab",),
               "all": ("ascent", "sweep", "slab")}[args.method]
    found = {}
    for meth in methods:
        try:
            if meth == "ascent":
                est = sobolev_ratio_ascent(m, args.restarts, args.iters, seed=args.seed)
            elif meth == "sweep":
                est = cheeger_sweep(m)
            else:
                est = slab_candidate(m)
        except ModelError as exc:
            if args.method != "all":
                raise UsageError(str(exc)) from exc
            continue
        found[est.method] = est.as_dict()
    best = max(found.values(), key=lambda e: e["value"])
    out = {"cstar": best["value"], "method": best["method"], "estimates": found}
    _emit(out, args.json, [(k, v["value"]) for k, v in found.items()] + [("cstar", best["value"])])
    return EXIT_OK


def cmd_verify(args) -> int:
    m = load_or_build(args.model, args.cache)
    check = args.theorem
    cfg = harness.SuiteConfig(
        models=[m.spec],
        pairs=[(m.n_intrinsic, args.pexp)],
        checks=[check],
        trials=args.trials,
        seed=args.seed,
        cstar=args.cstar,
        band_limit=args.band_limit,
        workers=args.workers,
    )
    records = harness.run_suite(cfg, args.out)
    out = {
        "theorem": check,
        "model": m.spec,
        "trials": len(records),
        "passed": sum(r.passed for r in records),
        "violations": sum(r.status == VIOLATION for r in records),
        "shortfalls": sum(r.status == "estimator_shortfall" for r in records),
        "numerical_failures": sum(r.status == NUMERICAL for r in records),
        "min_slack_ratio": min(r.slack_ratio for r in records),
        "cstar": records[0].cstar,
        "cstar_source": records[0].cstar_source,
    }
    if args.rescale is not None:
        if check != "A":
            raise UsageError("--rescale applies to --theorem A only")
        band = min(args.band_limit, m.n_modes - 1)
        rows = []
        for r in records:
            inst = harness.random_instance(m, band, r.seed, args.pexp, r.trial)
            rows.append(rescaled_theorem_A_rhs(inst, r.cstar, args.rescale))
        out["rescale"] = rows
    table = [(k, v) for k, v in out.items() if k != "rescale"]
    _emit(out, args.json, table)
    if out["violations"]:
        return EXIT_VIOLATION
    if out["numerical_failures"]:
        return EXIT_NUMERICAL
    return EXIT_OK


def _suite_exit(records) -> int:
    if harness.any_violation(records):
        return EXIT_VIOLATION
    if harness.any_numerical(records):
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_suite(args) -> int:
    cfg = harness.load_config(args.config)
    out_dir = args.out or cfg.out
    if not out_dir:
        raise UsageError("suite needs --out or an 'out' config entry")
    records = harness.run_and_report(cfg, out_dir)
    summary = {
        "records": len(records),
        "out": out_dir,
        "violations": sum(r.status == VIOLATION for r in records),
        "min_slack": harness.min_slack(records),
    }
    _emit(summary, args.json, [(k, v) for k, v in summary.items() if k != "min_slack"])
    return _suite_exit(records)


def cmd_report(args) -> int:
    try:
        records = harness.read_records(args.records)
    except OSError as exc:
        raise UsageError(f"cannot read records {args.records}: {exc}") from exc
    formats = [f.strip() for f in args.format.split(",") if f.strip()]
    written = harness.render_report(records, args.out, formats)
    _emit({"written": written, "records": len(records)}, args.json,
          [("records", len(records))] + [("file", w) for w in written])
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nmplab", description="Explicit maximum-principle constants on spectral models.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def add(name, func, help_text, model=True):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--json", action="store_true", help="emit JSON only")
        if model:
            p.add_argument("--model", required=True, help="model spec, e.g. torus:3:8:1, sphere3:64, graph:g.json")
            p.add_argument("--cache", default=None, help="directory for NMPM1 model caches")
        p.set_defaults(func=func)
        return p

    p = add("model", cmd_model, "Build a model and print its summary.")
    p.add_argument("--export", help="write the model as an NMPM1 file")

    p = add("constants", cmd_constants, "Print the constant set for (n, p, C*).", model=False)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--cstar", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-12, help="tail tolerance on log A")

    p = add("green", cmd_green, "Green function lower bound and kernel identities.")
    p.add_argument("--cstar", default="auto")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t", type=float, default=0.05, help="time for the kernel identities")
    p.add_argument("--time-integral", action="store_true", help="cross-check the time-integral Green function")
    p.add_argument("--panels", type=int, default=2000)
    p.add_argument("--export", help="write a kernel as an NMPK1 file")
    p.add_argument("--kind", choices=("green", "heat"), default="green")

    p = add("isoperimetric", cmd_isoperimetric, "Estimate the normalized isoperimetric constant C*.")
    p.add_argument("--method", choices=("ascent", "sweep", "slab", "all"), default="all")
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--iters", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)

    p = add("verify", cmd_verify, "Run randomized checks of one estimate.")
    p.add_argument("--theorem", choices=("moser", "solution", "A", "green"), required=True)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pexp", type=float, default=2.0, help="integrability exponent p > n/2")
    p.add_argument("--cstar", default="auto")
    p.add_argument("--band-limit", type=int, default=30)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--rescale", type=float, default=None, help="also report both sides under g -> alpha g")
    p.add_argument("--out", default=None, help="append records to this JSON-lines file")

    p = add("suite", cmd_suite, "Run a configured suite and render reports.", model=False)
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)

    p = add("report", cmd_report, "Render reports from a records.jsonl file.", model=False)
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", default="csv,md", help="comma-separated subset of csv, md, tsv")
    return parser


def dispatch(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except NMPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
