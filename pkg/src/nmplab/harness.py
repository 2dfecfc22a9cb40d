"""Randomized verification runs, persistence and reports.

A suite is described by a plain-text ``key = value`` file::

    # models: comma separated model specs
    models = torus:3:8:1, sphere3:64, complete:4
    pairs = 3:2, 3:5            # (n, p) pairs; applied to models of matching n
    checks = moser, solution, A, green, identities, poincare
    trials = 20
    seed = 0
    cstar = auto                # or a number
    band_limit = 30
    inflation = 1.5
    workers = 1

Every trial draws its own seed from ``(seed, check, model, p, trial)`` so
serial and threaded runs give identical records.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .constants import gamma_schedule, product_A
from .exceptions import NMPError, NumericalFailure, UsageError
from .isoperimetric import estimate_cstar, poincare_sobolev_sides
from .kernels import green_function, green_lower_bound_check, kernel_identities
from .model import (
    ScalarField,
    SpectralModel,
    VectorField,
    build_from_spec,
    vector_dim,
)
from .records import NUMERICAL, PASS, SHORTFALL, VIOLATION, VerificationRecord
from .solver import (
    check_moser_bound,
    check_solution_bound,
    check_theorem_A,
    generate_subsolution,
)

ALL_CHECKS = ("moser", "solution", "A", "green", "identities", "poincare")
P_CHECKS = ("moser", "solution", "A")
IDENTITY_TOL = 1e-10


def trial_seed(base_seed: int, *parts) -> int:
    """Deterministic 63-bit seed from a base seed and identifying parts."""
    text = "|".join(str(x) for x in (base_seed, *parts))
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little") >> 1


def random_field(
    model: SpectralModel, band_limit: int, seed: int, zero_mean: bool = True
) -> ScalarField:
    """Normal coefficients on modes ``1..band_limit`` (plus the constant mode
    when ``zero_mean`` is false), synthesized to node values."""
    if band_limit < 1 or band_limit >= model.n_modes:
        raise UsageError(f"band_limit must be in [1, {model.n_modes - 1}], got {band_limit}")
    rng = np.random.default_rng(seed)
    c = np.zeros(model.n_modes)
    c[1 : band_limit + 1] = rng.standard_normal(band_limit)
    if not zero_mean:
        c[0] = rng.standard_normal()
    return ScalarField(model, model.synthesize(c))


def random_vector_field(model: SpectralModel, band_limit: int, seed: int) -> VectorField:
    d = vector_dim(model)
    comps = [
        random_field(model, band_limit, trial_seed(seed, "component", a), zero_mean=False).values
        for a in range(d)
    ]
    return VectorField(model, np.array(comps).reshape(d, model.size))


@dataclass
class SuiteConfig:
    models: List[str]
    pairs: List[tuple] = field(default_factory=lambda: [(3, 2.0)])
    checks: List[str] = field(default_factory=lambda: list(ALL_CHECKS))
    trials: int = 10
    seed: int = 0
    cstar: str = "auto"
    band_limit: int = 30
    inflation: float = 1.5
    workers: int = 1
    out: Optional[str] = None

    def __post_init__(self):
        if self.trials < 1:
            raise UsageError("trials must be >= 1")
        for n, p in self.pairs:
            if not p > n / 2:
                raise UsageError(f"pair (n={n}, p={p}) violates p > n/2")
        unknown = set(self.checks) - set(ALL_CHECKS)
        if unknown:
            raise UsageError(f"unknown checks: {sorted(unknown)}")
        if self.cstar != "auto":
            try:
                if not float(self.cstar) > 0:
                    raise ValueError
            except ValueError:
                raise UsageError(f"cstar must be 'auto' or a positive number, got {self.cstar!r}")


def parse_config(text: str) -> SuiteConfig:
    """Parse the ``key = value`` suite format (``#`` starts a comment)."""
    raw: Dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        raw[key] = value

    def listof(v):
        return [s.strip() for s in v.split(",") if s.strip()]

    if "models" not in raw:
        raise UsageError("config needs a 'models' entry")
    kw = {"models": listof(raw.pop("models"))}
    try:
        if "pairs" in raw:
            kw["pairs"] = [
                (int(a), float(b)) for a, b in (s.split(":") for s in listof(raw.pop("pairs")))
            ]
        if "checks" in raw:
            kw["checks"] = listof(raw.pop("checks"))
        for key, conv in (
            ("trials", int),
            ("seed", int),
            ("band_limit", int),
            ("workers", int),
            ("inflation", float),
            ("cstar", str),
            ("out", str),
        ):
            if key in raw:
                kw[key] = conv(raw.pop(key))
    except ValueError as exc:
        raise UsageError(f"bad config value: {exc}") from exc
    if raw:
        raise UsageError(f"unknown config keys: {sorted(raw)}")
    return SuiteConfig(**kw)


def load_config(path: str) -> SuiteConfig:
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc


# --------------------------------------------------------------------------
# running
# --------------------------------------------------------------------------


@dataclass
class _ModelContext:
    model: SpectralModel
    cstar: float
    cstar_source: str
    green: object


def _prepare(spec: str, cfg: SuiteConfig) -> _ModelContext:
    model = build_from_spec(spec)
    if cfg.cstar == "auto":
        est = estimate_cstar(model, seed=cfg.seed)
        cstar, source = est.value, f"auto:{est.method}"
    else:
        cstar, source = float(cfg.cstar), "user"
    return _ModelContext(model, cstar, source, green_function(model))


def random_instance(m: SpectralModel, band: int, seed: int, p: float = 2.0, trial: int = 1):
    """Random subsolution instance; every fourth trial has zero slack (a solution)."""
    u = random_field(m, band, trial_seed(seed, "u"), zero_mean=False)
    Phi = random_vector_field(m, band, trial_seed(seed, "Phi"))
    if trial % 4 == 0:
        slack = np.zeros(m.size)
    else:
        s = random_field(m, band, trial_seed(seed, "s"), zero_mean=False).values
        slack = np.abs(s) * np.random.default_rng(trial_seed(seed, "c")).uniform()
    return generate_subsolution(m, u, Phi, slack, p=p)


def _run_one(ctx: _ModelContext, check: str, p: Optional[float], trial: int, cfg: SuiteConfig, cstar: float):
    m = ctx.model
    seed = trial_seed(cfg.seed, check, m.spec, p, trial)
    band = min(cfg.band_limit, m.n_modes - 1)
    if check in ("moser", "A"):
        inst = random_instance(m, band, seed, p, trial)
        if check == "moser":
            return check_moser_bound(inst, cstar)
        return check_theorem_A(inst, cstar, green=ctx.green)
    if check == "solution":
        f = random_field(m, band, trial_seed(seed, "f"), zero_mean=False)
        Phi = random_vector_field(m, band, trial_seed(seed, "Phi"))
        return check_solution_bound(m, f, Phi, cstar, p)
    if check == "green":
        return green_lower_bound_check(m, cstar, ctx.green)
    if check == "identities":
        rep = kernel_identities(m, 0.05, 0.05)
        worst = max(
            rep.stochasticity, rep.centering, rep.symmetry, rep.semigroup, rep.square_formula
        )
        return VerificationRecord.from_sides(
            "identities", m.spec, worst, IDENTITY_TOL, extras=dict(vars(rep))
        )
    if check == "poincare":
        u = random_field(m, band, trial_seed(seed, "u"), zero_mean=False)
        lhs, rhs = poincare_sobolev_sides(m, u, cstar)["poincare"]
        return VerificationRecord.from_sides("poincare", m.spec, lhs, rhs)
    raise UsageError(f"unknown check {check!r}")


def _task(ctx, check, p, trial, cfg) -> VerificationRecord:
    start = time.perf_counter()
    seed = trial_seed(cfg.seed, check, ctx.model.spec, p, trial)
    try:
        rec = _run_one(ctx, check, p, trial, cfg, ctx.cstar)
        if not rec.passed:
            retry = _run_one(ctx, check, p, trial, cfg, ctx.cstar * cfg.inflation)
            rec.status = SHORTFALL if retry.passed else VIOLATION
    except NumericalFailure as exc:
        rec = VerificationRecord(
            check, ctx.model.spec, math.nan, math.nan, math.nan, False,
            status=NUMERICAL, extras={"error": str(exc)},
        )
    rec.seed = seed
    rec.trial = trial
    rec.cstar = ctx.cstar
    rec.cstar_source = ctx.cstar_source
    if p is not None:
        rec.extras["p"] = p
    rec.wall_time = time.perf_counter() - start
    return rec


def record_sort_key(rec: VerificationRecord):
    return (rec.check, rec.model, rec.extras.get("p", 0.0), -1 if rec.trial is None else rec.trial)


def run_suite(cfg: SuiteConfig, out_path: Optional[str] = None) -> List[VerificationRecord]:
    """Execute every configured check; append records to ``out_path`` (JSON lines)."""
    tasks = []
    contexts = {spec: _prepare(spec, cfg) for spec in cfg.models}
    for spec, ctx in contexts.items():
        n = ctx.model.n_intrinsic
        ps = [p for (nn, p) in cfg.pairs if nn == n]
        for check in cfg.checks:
            if check in P_CHECKS:
                tasks += [(ctx, check, p, t) for p in ps for t in range(cfg.trials)]
            elif check in ("green", "identities"):
                tasks.append((ctx, check, None, 0))
            else:
                tasks += [(ctx, check, None, t) for t in range(cfg.trials)]

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            records = list(pool.map(lambda a: _task(*a, cfg), tasks))
    else:
        records = [_task(*a, cfg) for a in tasks]
    records.sort(key=record_sort_key)

    if out_path:
        try:
            os.makedirs(os.path.dirname(os.path.abspath(out_path)), exist_ok=True)
            with open(out_path, "a") as fh:
                for rec in records:
                    fh.write(rec.to_json() + "\n")
        except OSError as exc:
            raise NMPError(f"cannot write records to {out_path}: {exc}") from exc
    return records


def read_records(path: str) -> List[VerificationRecord]:
    with open(path) as fh:
        return [VerificationRecord.from_json(line) for line in fh if line.strip()]


def any_violation(records: Iterable[VerificationRecord]) -> bool:
    return any(r.status == VIOLATION for r in records)


def any_numerical(records: Iterable[VerificationRecord]) -> bool:
    return any(r.status == NUMERICAL for r in records)


# --------------------------------------------------------------------------
# baselines and series
# --------------------------------------------------------------------------


def min_slack(records: Iterable[VerificationRecord]) -> Dict[str, float]:
    """Minimum slack ratio per ``check|model|p`` group."""
    out: Dict[str, float] = {}
    for r in records:
        key = f"{r.check}|{r.model}|{r.extras.get('p', '-')}"
        out[key] = min(out.get(key, math.inf), r.slack_ratio)
    return out


def baseline_drift(current: Dict[str, float], baseline: Dict[str, float]) -> Dict[str, float]:
    """Relative drift of each group's min slack against a stored baseline."""
    drift = {}
    for key, ref in baseline.items():
        cur = current.get(key)
        if cur is None:
            drift[key] = math.inf
        elif math.isinf(ref) and math.isinf(cur):
            drift[key] = 0.0
        else:
            drift[key] = abs(cur - ref) / abs(ref)
    return drift


def slack_vs_cstar(model: SpectralModel, check: str, grid: Sequence[float], p: float = 2.0,
                   band_limit: int = 20, seed: int = 0):
    """Slack ratio of one fixed instance as ``C*`` varies."""
    ctx = _ModelContext(model, 1.0, "grid", green_function(model))
    cfg = SuiteConfig(models=[model.spec], pairs=[(model.n_intrinsic, p)], seed=seed,
                      band_limit=band_limit)
    return [(float(c), _run_one(ctx, check, p, 1, cfg, float(c)).slack_ratio) for c in grid]


def a_vs_depth(n: int, p: float, cstar: float, depths: Sequence[int]):
    return [(int(k), product_A(n, p, cstar, k=int(k))[0]) for k in depths]


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------

CSV_FIELDS = ("check", "model", "p", "trial", "seed", "lhs", "rhs", "slack_ratio", "passed",
              "status", "cstar", "cstar_source", "wall_time")
FORMATS = ("csv", "md", "tsv")


def records_csv(records: Sequence[VerificationRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for r in records:
        writer.writerow([
            r.check, r.model, r.extras.get("p", ""), r.trial, r.seed, repr(r.lhs), repr(r.rhs),
            repr(r.slack_ratio), r.passed, r.status, r.cstar, r.cstar_source, r.wall_time,
        ])
    return buf.getvalue()


def summary_markdown(records: Sequence[VerificationRecord]) -> str:
    lines = [
        "| check | model | p | records | pass | shortfall | violation | min slack |",
        "|---|---|---|---|---|---|---|---|",
    ]
    groups: Dict[tuple, list] = {}
    for r in records:
        groups.setdefault((r.check, r.model, r.extras.get("p", "-")), []).append(r)
    for (check, model, p), rs in sorted(groups.items(), key=lambda kv: str(kv[0])):
        lines.append(
            f"| {check} | {model} | {p} | {len(rs)} | "
            f"{sum(r.status == PASS for r in rs)} | {sum(r.status == SHORTFALL for r in rs)} | "
            f"{sum(r.status == VIOLATION for r in rs)} | {min(r.slack_ratio for r in rs):.6g} |"
        )
    return "\n".join(lines) + "\n"


def render_report(
    records: Sequence[VerificationRecord],
    out_dir: str,
    formats: Sequence[str] = FORMATS,
    series: Optional[Dict[str, Sequence[tuple]]] = None,
) -> List[str]:
    """Write ``report.csv``, ``summary.md`` and ``series/<name>.tsv``; return paths."""
    bad = set(formats) - set(FORMATS)
    if bad:
        raise UsageError(f"unknown report formats: {sorted(bad)}")
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if "csv" in formats:
        path = os.path.join(out_dir, "report.csv")
        with open(path, "w") as fh:
            fh.write(records_csv(records))
        written.append(path)
    if "md" in formats:
        path = os.path.join(out_dir, "summary.md")
        with open(path, "w") as fh:
            fh.write(summary_markdown(records))
        written.append(path)
    if "tsv" in formats and series:
        sdir = os.path.join(out_dir, "series")
        os.makedirs(sdir, exist_ok=True)
        for name, rows in series.items():
            path = os.path.join(sdir, f"{name}.tsv")
            with open(path, "w") as fh:
                for x, y in rows:
                    fh.write(f"{x!r}\t{y!r}\n")
            written.append(path)
    return written


def default_series(cfg: SuiteConfig) -> Dict[str, list]:
    series = {}
    for n, p in cfg.pairs:
        k_star = gamma_schedule(n, p, 1e-12, 1.0)[2]
        depths = sorted({1, 2, 4, 8, 16, 32, k_star})
        series[f"A_vs_depth_n{n}_p{p:g}"] = a_vs_depth(n, p, 1.0, depths)
    grid = [0.1, 0.2, 0.5, 1.0, 2.0]
    for spec in cfg.models:
        model = build_from_spec(spec)
        tag = spec.replace(":", "_")
        for n, p in cfg.pairs:
            if n == model.n_intrinsic:
                series[f"slack_vs_cstar_A_{tag}_p{p:g}"] = slack_vs_cstar(
                    model, "A", grid, p, min(cfg.band_limit, model.n_modes - 1), cfg.seed
                )
    return series


def run_and_report(cfg: SuiteConfig, out_dir: str) -> List[VerificationRecord]:
    os.makedirs(out_dir, exist_ok=True)
    records = run_suite(cfg, os.path.join(out_dir, "records.jsonl"))
    render_report(records, out_dir, series=default_series(cfg))
    return records


__all__ = [
    "SuiteConfig",
    "parse_config",
    "load_config",
    "random_field",
    "random_vector_field",
    "random_instance",
    "trial_seed",
    "run_suite",
    "read_records",
    "render_report",
    "run_and_report",
    "min_slack",
    "baseline_drift",
    "slack_vs_cstar",
    "a_vs_depth",
    "records_csv",
    "summary_markdown",
    "any_violation",
    "any_numerical",
]
