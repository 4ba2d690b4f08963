"""Command-line entry point: ``mstvtp <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 a mandatory fit did
not converge.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .empirical import ingest_yields, run_empirical
from .errors import IngestionError, MSError
from .estimation import estimate
from .evaluation import forecast_metrics, profile_loglik
from .filtering import Dataset, classify_regimes, run_filter
from .model import Dynamics, ModelSpec, Params
from .montecarlo import McScenario, default_grid, run_scenarios
from .simulate import dgp_preset, simulate

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NONCONVERGED = 0, 1, 2, 3

log = logging.getLogger("mstvtp")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=d(0), help="base random seed")
    g.add_argument("--threads", type=int, default=d(1), help="worker count")
    g.add_argument("--cutoff", type=int, default=d(None),
                   help="likelihood terms excluded at the start (default 10; empirical uses --burn-in)")
    g.add_argument("--burn-in", type=int, default=d(100), help="simulation burn-in")
    g.add_argument("--out-dir", type=Path, default=d(Path(".")), help="output directory")
    g.add_argument("-v", "--verbose", action="store_true", default=d(False))


def _model_flags(p: argparse.ArgumentParser, params: bool) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--dgp", type=int, help="use a study preset (1..9) for spec and parameters")
    g.add_argument("--K", type=int, help="number of regimes")
    g.add_argument("--parameterization", choices=["diagonal", "offdiagonal"], default="offdiagonal")
    g.add_argument("--variance", choices=["common", "regime"], default="regime")
    g.add_argument("--dynamics", default="const", help="const, tvp, exog or gas")
    if params:
        g.add_argument("--params", type=Path,
                       help="JSON parameters (a Params dict or a fit result with params_hat)")


def _data_flag(p):
    p.add_argument("--data", type=Path, required=True, help="CSV with a y column and optional x")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mstvtp", description="Markov-switching models with time-varying "
                     "transition probabilities.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a series to CSV")
    _model_flags(p, params=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--output", type=Path, help="CSV path (default OUT_DIR/simulated.csv)")

    p = sub.add_parser("fit", help="multi-start maximum likelihood fit to JSON")
    _model_flags(p, params=False)
    _data_flag(p)
    p.add_argument("--n-starts", type=int, default=10)
    p.add_argument("--no-se", action="store_true", help="skip standard errors")
    p.add_argument("--output", type=Path, help="JSON path (default OUT_DIR/fit.json)")

    p = sub.add_parser("filter", help="filtered probabilities to CSV")
    _model_flags(p, params=True)
    _data_flag(p)
    p.add_argument("--output", type=Path, help="CSV path (default OUT_DIR/filtered.csv)")

    p = sub.add_parser("forecast-metrics", help="one-step forecast errors as JSON")
    _model_flags(p, params=True)
    _data_flag(p)

    p = sub.add_parser("mc", help="Monte Carlo grid to summary tables")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="JSON scenario or list of scenarios")
    src.add_argument("--paper-grid", action="store_true", help="all 18 DGP x T cells")
    p.add_argument("--replications", type=int, help="override R")
    p.add_argument("--n-starts", type=int, help="override starts per fit")
    p.add_argument("--records", type=Path, help="JSON-lines record file (default OUT_DIR/mc_records.jsonl)")

    p = sub.add_parser("profile", help="profile log-likelihood grid to CSV")
    _model_flags(p, params=True)
    _data_flag(p)
    p.add_argument("--dim", action="append", required=True,
                   help="coordinate name (sigma2[0], A[1]) or direction A[0]=1,A[1]=-1; repeat for 2-D")
    p.add_argument("--grid", action="append", required=True,
                   help="start:stop:num for each --dim, in order")
    p.add_argument("--output", type=Path, help="CSV path (default OUT_DIR/profile.csv)")

    p = sub.add_parser("empirical", help="three-regime yield-change fits")
    p.add_argument("--yields", type=Path, required=True, help="yields CSV")
    p.add_argument("--maturities", default="1,12,36,72")
    p.add_argument("--models", default="const,tvp,exog,gas")
    p.add_argument("--n-starts", type=int, default=100)
    p.add_argument("--date-range", help="FIRST:LAST as YYYY-MM:YYYY-MM")

    for name, sp in sub.choices.items():
        _global_flags(sp, suppress=True)
    return parser


def _csv_ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def _spec_and_params(args, need_params: bool):
    if args.dgp is not None:
        spec, truth = dgp_preset(args.dgp)
        if getattr(args, "params", None):
            return spec, _load_params(args.params)
        return spec, truth
    if args.K is None:
        raise UsageError("give either --dgp or --K")
    try:
        spec = ModelSpec(args.K, args.parameterization, args.variance, _dynamics(args.dynamics))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    params = None
    if need_params:
        if not getattr(args, "params", None):
            raise UsageError("--params is required without --dgp")
        params = _load_params(args.params)
    return spec, params


def _dynamics(name):
    try:
        return Dynamics.parse(name)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_params(path: Path) -> Params:
    with open(path) as fh:
        d = json.load(fh)
    return Params.from_dict(d.get("params_hat", d))


def read_dataset(path: Path) -> Dataset:
    """Read a CSV with a ``y`` column and an optional ``x`` column."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "y" not in rows[0]:
        raise IngestionError(f"{path}: expected a header with a 'y' column")
    cols = {"y": [], "x": []}
    has_x = "x" in rows[0] and rows[0]["x"] not in ("", None)
    for r, row in enumerate(rows, start=2):
        for c in ("y", "x") if has_x else ("y",):
            try:
                cols[c].append(float(row[c]))
            except (TypeError, ValueError):
                raise IngestionError(f"{path}: bad value {row[c]!r} at row {r}, column {c!r}") from None
    return Dataset(np.array(cols["y"]), np.array(cols["x"]) if has_x else None, label=path.stem)


def _out(args, given, default_name) -> Path:
    path = given or args.out_dir / default_name
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _grid(text: str) -> np.ndarray:
    try:
        a, b, n = text.split(":")
        return np.linspace(float(a), float(b), int(n))
    except ValueError:
        raise UsageError(f"grid must be start:stop:num, got {text!r}") from None


def _dim(text: str):
    if "=" not in text:
        return text.strip()
    out = {}
    for part in text.split(","):
        name, _, w = part.partition("=")
        try:
            out[name.strip()] = float(w)
        except ValueError:
            raise UsageError(f"bad direction weight in {text!r}") from None
    return out


def cmd_simulate(args) -> int:
    spec, params = _spec_and_params(args, need_params=True)
    sim = simulate(spec, params, args.T, args.burn_in, seed=args.seed)
    path = _out(args, args.output, "simulated.csv")
    sim.to_csv(path)
    print(json.dumps({"output": str(path), "T": args.T}))
    return EXIT_OK


def cmd_fit(args) -> int:
    spec, _ = _spec_and_params(args, need_params=False)
    data = read_dataset(args.data)
    cutoff = 10 if args.cutoff is None else args.cutoff
    res = estimate(data, spec, n_starts=args.n_starts, seed=args.seed, cutoff=cutoff,
                   threads=args.threads, compute_se=not args.no_se)
    text = res.to_json(indent=2)
    _out(args, args.output, "fit.json").write_text(text + "\n")
    print(text)
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def cmd_filter(args) -> int:
    spec, params = _spec_and_params(args, need_params=True)
    data = read_dataset(args.data)
    cutoff = 10 if args.cutoff is None else args.cutoff
    out = run_filter(data, spec, params, cutoff, on_degenerate="flag")
    regime = classify_regimes(out)
    K = spec.K
    path = _out(args, args.output, "filtered.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "y"] + [f"pred_{k}" for k in range(1, K + 1)]
                   + [f"filt_{k}" for k in range(1, K + 1)] + ["pred_mean", "pred_var", "regime"])
        for t in range(data.y.size):
            w.writerow([t + 1, repr(float(data.y[t]))]
                       + [repr(float(v)) for v in out.xi_pred[t]]
                       + [repr(float(v)) for v in out.xi_filt[t]]
                       + [repr(float(out.pred_mean[t])), repr(float(out.pred_var[t])),
                          int(regime[t]) + 1])
    print(json.dumps({"output": str(path), "loglik": out.loglik,
                      "n_degenerate": out.n_degenerate}))
    return EXIT_OK


def cmd_forecast(args) -> int:
    spec, params = _spec_and_params(args, need_params=True)
    data = read_dataset(args.data)
    cutoff = 10 if args.cutoff is None else args.cutoff
    out = run_filter(data, spec, params, cutoff, on_degenerate="flag")
    m = asdict(forecast_metrics(out, data.y, cutoff))
    text = json.dumps(m, indent=2)
    _out(args, None, "forecast_metrics.json").write_text(text + "\n")
    print(text)
    return EXIT_OK


def _load_scenarios(path: Path) -> list[dict]:
    with open(path) as fh:
        cfg = json.load(fh)
    if isinstance(cfg, dict):
        cfg = cfg.get("scenarios", [cfg])
    return cfg


def cmd_mc(args) -> int:
    overrides = {}
    if args.replications is not None:
        overrides["R"] = args.replications
    if args.n_starts is not None:
        overrides["n_starts"] = args.n_starts
    if args.cutoff is not None:
        overrides["cutoff"] = args.cutoff
    try:
        if args.paper_grid:
            scen = [McScenario(**{**s.to_dict(), "burn_in": args.burn_in, "base_seed": args.seed,
                                  **overrides}) for s in default_grid()]
        else:
            scen = [McScenario(**{"burn_in": args.burn_in, "base_seed": args.seed, **d, **overrides})
                    for d in _load_scenarios(args.config)]
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad scenario: {exc}") from None
    records = _out(args, args.records, "mc_records.jsonl")
    result = run_scenarios(scen, records, threads=args.threads)
    paths = result.write_tables(args.out_dir)
    print(json.dumps({"records": str(records), "tables": [str(p) for p in paths],
                      "n_records": len(result.records)}))
    return EXIT_OK


def cmd_profile(args) -> int:
    spec, params = _spec_and_params(args, need_params=True)
    if len(args.dim) != len(args.grid):
        raise UsageError("give one --grid per --dim")
    data = read_dataset(args.data)
    cutoff = 10 if args.cutoff is None else args.cutoff
    dims = [_dim(d) for d in args.dim]
    grids = [_grid(g) for g in args.grid]
    try:
        prof = profile_loglik(data, spec, params, dims, grids[0] if len(grids) == 1 else grids, cutoff)
    except KeyError as exc:
        raise UsageError(str(exc)) from None
    path = _out(args, args.output, "profile.csv")
    prof.to_csv(path)
    best = prof.argmax() if np.any(np.isfinite(prof.loglik)) else None
    print(json.dumps({"output": str(path), "argmax": None if best is None else [float(v) for v in best],
                      "n_converged": int(prof.converged.sum()), "n_cells": int(prof.converged.size)}))
    return EXIT_OK


def cmd_empirical(args) -> int:
    maturities = _csv_ints(args.maturities)
    models = [_dynamics(m) for m in args.models.split(",") if m.strip()]
    date_range = None
    if args.date_range:
        parts = args.date_range.split(":")
        if len(parts) != 2:
            raise UsageError("--date-range must be FIRST:LAST")
        date_range = (parts[0], parts[1])
    series = ingest_yields(args.yields, maturities, date_range)
    cutoff = args.burn_in if args.cutoff is None else args.cutoff
    report = run_empirical(series, maturities, models, n_starts=args.n_starts, seed=args.seed,
                           cutoff=cutoff, threads=args.threads)
    paths = report.write(args.out_dir)
    n_levels = len(next(iter(series.values())))
    print(json.dumps({"levels": n_levels, "differences": n_levels - 1,
                      "fits": report.fit_rows(), "outputs": [str(p) for p in paths]}, default=float))
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "filter": cmd_filter,
            "forecast-metrics": cmd_forecast, "mc": cmd_mc, "profile": cmd_profile,
            "empirical": cmd_empirical}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"mstvtp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MSError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"mstvtp: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
