"""Command-line interface.

Subcommands: ``test``, ``cv``, ``regimes``, ``mc`` and ``simulate`` (writes
a synthetic data set).  Every flag can also be given in a flat
``key = value`` config file passed with ``--config``; command-line flags
take precedence.  Exit code 0 on success, 1 on package errors, 2 on usage
errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DatasetError, DomainError, QuantGrangerError, SingularityError
from .grid import QuantileGrid, replication_rng

log = logging.getLogger("quantgranger")

MISSING = {"", "na", "nan", "null", "."}


@dataclass
class Dataset:
    """Numeric columns keyed by name; ``labels`` holds a ``date`` column if present."""

    names: list
    columns: np.ndarray
    labels: list | None = None
    dropped: int = 0

    def __post_init__(self):
        self.columns = np.asarray(self.columns, dtype=float)
        if self.columns.ndim != 2 or self.columns.shape[1] != len(self.names):
            raise DatasetError("column matrix does not match the header")
        if self.labels is not None and len(self.labels) != self.columns.shape[0]:
            raise DatasetError("label column has the wrong length")

    @property
    def n(self) -> int:
        return self.columns.shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.columns[:, self.names.index(name)]
        except ValueError:
            raise DatasetError(f"no column named {name!r}; have {', '.join(self.names)}") from None


@dataclass(frozen=True)
class AdlSpec:
    """Autoregressive distributed lag layout.

    The tested block holds lags ``1..lags_causal`` of every causal series
    (``0..lags_causal - 1`` with ``contemporaneous``);
    the controls are the intercept, lags ``1..lags_dep`` of the dependent
    series, contemporaneous ``controls`` and polynomial trends ``(i/n)^j``.
    """

    dependent: str
    causal: tuple
    controls: tuple = ()
    lags_dep: int = 1
    lags_causal: int = 1
    include_intercept: bool = True
    trend_terms: int = 0
    contemporaneous: bool = False

    def __post_init__(self):
        if self.lags_dep < 1 or self.lags_causal < 1:
            raise DomainError("lag orders must be at least 1")
        if not self.causal:
            raise DomainError("need at least one causal series")
        if self.trend_terms < 0:
            raise DomainError("trend_terms must be nonnegative")

    @property
    def p(self) -> int:
        return self.lags_causal * len(self.causal)


def ingest_csv(path) -> Dataset:
    """Read a comma-separated file with a header line.

    Rows with a missing cell are dropped (with a logged warning).  A column
    named ``date`` is kept as row labels instead of data.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    date_col = header.index("date") if "date" in header else None
    names = [h for i, h in enumerate(header) if i != date_col]
    data, labels, dropped = [], [], 0
    for r, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DatasetError(f"{path}: row {r} has {len(row)} cells, expected {len(header)}")
        vals, missing = [], False
        for c, cell in enumerate(row):
            if c == date_col:
                continue
            cell = cell.strip()
            if cell.lower() in MISSING:
                missing = True
                continue
            try:
                vals.append(float(cell))
            except ValueError:
                raise DatasetError(f"{path}: cannot parse {cell!r} at row {r}, column {header[c]!r}") from None
        if missing:
            dropped += 1
            continue
        data.append(vals)
        if date_col is not None:
            labels.append(row[date_col].strip())
    if not data:
        raise DatasetError(f"{path}: no data rows")
    if dropped:
        log.warning("dropped %d row(s) with missing cells", dropped)
    return Dataset(names, np.array(data), labels if date_col is not None else None, dropped)


def build_adl(dataset: Dataset, spec: AdlSpec):
    """Regressand and design ``X = (z, w)`` for the ADL layout; drops the first ``q`` rows."""
    q = max(spec.lags_dep, spec.lags_causal)
    n = dataset.n
    if n - q < 2:
        raise DatasetError(f"{n} rows are too few for {q} lags")
    dep = dataset.column(spec.dependent)
    y = dep[q:]
    rows = n - q
    first = 0 if spec.contemporaneous else 1
    z = [dataset.column(c)[q - j: n - j] for c in spec.causal for j in range(first, first + spec.lags_causal)]
    w = []
    if spec.include_intercept:
        w.append(np.ones(rows))
    w += [dep[q - j: n - j] for j in range(1, spec.lags_dep + 1)]
    w += [dataset.column(c)[q:] for c in spec.controls]
    t = np.arange(1, rows + 1) / rows
    w += [t**j for j in range(1, spec.trend_terms + 1)]
    X = np.column_stack(z + w)
    try:
        from .numcore import cholesky

        cholesky(X.T @ X)
    except SingularityError as exc:
        raise SingularityError(f"design is rank deficient: {exc}", pivot=exc.pivot) from None
    labels = dataset.labels[q:] if dataset.labels is not None else None
    return y, X, labels


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def _csv_list(text: str) -> tuple:
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _add_data_args(sp):
    g = sp.add_argument_group("data")
    g.add_argument("--data", required=False, help="CSV file with a header line")
    g.add_argument("--dependent", help="dependent column")
    g.add_argument("--causal", type=_csv_list, help="comma-separated tested columns")
    g.add_argument("--controls", type=_csv_list, default=(), help="comma-separated control columns")
    g.add_argument("--lags", type=int, default=1, help="lags of the dependent and causal series")
    g.add_argument("--trend", type=int, default=0, help="number of polynomial trend terms")
    g.add_argument("--no-intercept", action="store_true")
    g.add_argument("--contemporaneous", action="store_true", help="test lags 0..q-1 of the causal series")


def _add_common(sp):
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--out", help="write machine-readable JSON here")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quantgranger", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="flat key = value file with default flag values")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="run one test")
    _add_data_args(t)
    taus = t.add_mutually_exclusive_group()
    taus.add_argument("--tau", type=float, help="single quantile level (fixed-level LM)")
    taus.add_argument("--tau-range", help="lo:hi:step (default 0.05:0.95:0.01)")
    t.add_argument("--stat", choices=["lm", "sup", "exp", "supwald"], default="exp")
    t.add_argument("--method", choices=["asy", "adj", "boot"], help="default boot, or adj for lm")
    t.add_argument("--B", type=int, default=499)
    t.add_argument("--reps", type=int, default=9999, help="null simulation size")
    t.add_argument("--alpha", type=float, default=0.05)
    _add_common(t)

    c = sub.add_parser("cv", help="simulate and cache a critical-value table")
    c.add_argument("--family", choices=["LM_fixed", "supLM", "expLM", "supWald", "expCUSUM", "supCUSUM"],
                   required=True)
    c.add_argument("--p", type=int, default=1)
    c.add_argument("--k", type=int, default=1)
    c.add_argument("--tau", type=float)
    c.add_argument("--tau-range", default="0.05:0.95:0.01")
    c.add_argument("--lambda-steps", type=int, default=1000)
    c.add_argument("--reps", type=int, default=9999)
    c.add_argument("--copies", type=int, default=1)
    c.add_argument("--bridge-correction", action="store_true")
    c.add_argument("--cache", required=False, help="output table file")
    c.add_argument("--alpha", type=float, default=0.05)
    _add_common(c)

    r = sub.add_parser("regimes", help="identify Granger-causality regimes")
    _add_data_args(r)
    r.add_argument("--tau-range", default="0.05:0.95:0.01")
    r.add_argument("--alpha", type=float, default=0.05)
    r.add_argument("--method", choices=["asy", "adj", "boot"], default="boot")
    r.add_argument("--B", type=int, default=499)
    r.add_argument("--reps", type=int, default=999, help="CUSUM null simulation size")
    r.add_argument("--refine", action="store_true", help="extra CUSUM pass after two breaks")
    _add_common(r)

    m = sub.add_parser("mc", help="run a Monte Carlo profile")
    m.add_argument("profile", choices=["table1", "fig3", "table3", "appB"])
    m.add_argument("scale", nargs="?", choices=["desk", "full"], default="desk")
    m.add_argument("--table", help="write the delimited table here (default stdout)")
    m.add_argument("--plot-data", help="write long-format rates for plotting (fig3)")
    _add_common(m)

    s = sub.add_parser("simulate", help="write a synthetic location-scale data set")
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--panel", choices=["a", "b", "c"], default="a")
    s.add_argument("--scenario", default="C", help="A, B, C or a regime tuple such as 0,0,1")
    s.add_argument("--gamma", type=float, default=0.0)
    s.add_argument("--file", required=True, help="output CSV")
    s.add_argument("--seed", type=int, default=0)
    return parser


def _subparser(parser, name):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def read_config(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; keys use flag spelling."""
    out = {}
    for i, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DatasetError(f"{path}: line {i} is not key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = val
    return out


def _apply_config(parser, command, cfg):
    sp = _subparser(parser, command)
    actions = {a.dest: a for a in sp._actions}
    defaults = {}
    for key, val in cfg.items():
        if key not in actions:
            raise DomainError(f"config key {key!r} is not a flag of {command!r}")
        a = actions[key]
        if isinstance(a, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            defaults[key] = val.lower() in ("1", "true", "yes", "on")
        elif a.type is not None:
            defaults[key] = a.type(val)
        else:
            defaults[key] = val
    sp.set_defaults(**defaults)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def _load_design(args):
    if not (args.data and args.dependent and args.causal):
        raise DomainError("--data, --dependent and --causal are required")
    ds = ingest_csv(args.data)
    spec = AdlSpec(args.dependent, tuple(args.causal), tuple(args.controls), args.lags, args.lags,
                   not args.no_intercept, args.trend, args.contemporaneous)
    y, X, labels = build_adl(ds, spec)
    return y, X, spec.p, labels


def _write_json(path, obj):
    if path:
        Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def cmd_test(args) -> int:
    from . import stats

    y, X, p, _ = _load_design(args)
    method = args.method or ("adj" if args.stat == "lm" else "boot")
    if args.stat == "lm":
        if args.tau is None:
            raise DomainError("--stat lm needs --tau")
        res = stats.lm_fixed_tau(y, X, args.tau, p, method=method, level=args.alpha, reps=args.reps,
                                 seed=args.seed)
    else:
        if args.tau is not None:
            grid = QuantileGrid.single(args.tau)
        else:
            grid = QuantileGrid.parse(args.tau_range or "0.05:0.95:0.01")
        if args.stat == "supwald":
            res = stats.sup_wald(y, X, grid, args.B, p, level=args.alpha, seed=args.seed,
                                 reps=args.reps, threads=args.threads)
        else:
            fn = stats.sup_lm if args.stat == "sup" else stats.exp_lm
            res = fn(y, X, grid, p, method=method, level=args.alpha, B=args.B, seed=args.seed,
                     reps=args.reps, threads=args.threads)
    print(f"statistic      {res.family}")
    print(f"method         {res.method}")
    print(f"value          {res.value:.6g}")
    print(f"critical value {res.critical_value:.6g}  (level {res.level:g})")
    print(f"p-value        {res.p_value:.4f}")
    print(f"decision       {'reject' if res.reject else 'do not reject'}")
    _write_json(args.out, res.to_dict())
    return 0


def cmd_cv(args) -> int:
    from .limitsim import NullSampler, critical_value, null_table

    grid = QuantileGrid.single(args.tau) if args.tau is not None else QuantileGrid.parse(args.tau_range)
    sampler = NullSampler(args.family, p=args.p, k=args.k, grid=grid, lambda_steps=args.lambda_steps,
                          reps=args.reps, seed=args.seed, copies=args.copies,
                          bridge_correction=args.bridge_correction)
    table = null_table(sampler)
    if args.cache:
        table.save(args.cache)
    cv = critical_value(table, args.alpha)
    print(f"{args.family}  reps {table.samples.size}  {1 - args.alpha:g}-quantile {cv:.6g}")
    _write_json(args.out, {"key": list(table.key), "alpha": args.alpha, "critical_value": cv})
    return 0


def cmd_regimes(args) -> int:
    from .regimes import detect_regimes

    y, X, p, labels = _load_design(args)
    rep = detect_regimes(y, X, QuantileGrid.parse(args.tau_range), p, alpha=args.alpha, method=args.method,
                         B=args.B, reps=args.reps, seed=args.seed, refine=args.refine,
                         threads=args.threads, labels=labels)
    print(rep.to_text())
    _write_json(args.out, rep.to_dict())
    return 0


def cmd_mc(args) -> int:
    from .montecarlo import plot_data, run_profile, to_delimited

    rows = run_profile(args.profile, args.scale, seed=args.seed, threads=args.threads)
    text = to_delimited(rows)
    if args.table:
        Path(args.table).write_text(text)
    else:
        sys.stdout.write(text)
    if args.plot_data:
        if args.profile != "fig3":
            raise DomainError("--plot-data is only available for the fig3 profile")
        Path(args.plot_data).write_text(plot_data(rows))
    _write_json(args.out, {"profile": args.profile, "scale": args.scale, "seed": args.seed, "rows": rows})
    return 0


def cmd_simulate(args) -> int:
    from .montecarlo import PANELS, DgpSpec, gamma_path

    scen = args.scenario
    if "," in scen:
        scen = tuple(float(v) for v in scen.split(","))
    a, corr = PANELS[args.panel]
    spec = DgpSpec("location_scale", args.n, a, corr, gamma_path(scen, args.gamma, args.n), args.seed)
    y, X = spec.generate(replication_rng(args.seed, 0))
    with open(args.file, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["y", "z", "w"])
        for i in range(args.n):
            wr.writerow([repr(float(y[i])), repr(float(X[i, 0])), repr(float(X[i, 2]))])
    return 0


COMMANDS = {"test": cmd_test, "cv": cmd_cv, "regimes": cmd_regimes, "mc": cmd_mc, "simulate": cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        if args.config:
            _apply_config(parser, args.command, read_config(args.config))
            args = parser.parse_args(argv)
        if getattr(args, "threads", 1) < 1:
            raise DomainError("--threads must be at least 1")
        return COMMANDS[args.command](args)
    except (QuantGrangerError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
