"""Command-line interface.

Subcommands: simulate, fit, test, power, baseline (ripley | expgd),
report (qq | roc). Exit codes: 0 success, 1 usage error, 2 data or
file error, 3 numerical failure.

Progress and timing go to stderr; files named by --out/--out-dir hold
the results. Output files depend only on inputs and seeds, never on
timing, so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import io as seq_io
from .asymptotics import chi2_quantile
from .baselines import exp_mle_gd, residual_process, ripley_k
from .em import em_fit_full, em_fit_null
from .errors import (
    DataError,
    DomainError,
    HawkesGofError,
    NumericalError,
    ParseError,
)
from .kernels import (
    ExponentialKernel,
    GRID_PRESETS,
    HawkesModel,
    PiecewiseKernel,
    PowerKernel,
    grid_from_spec,
)
from .likelihood import NullParams
from .pipeline import (
    RunReport,
    TestConfig,
    auc,
    emit_report,
    power_curve,
    qq_table,
    roc_points,
    run_gof,
    write_csv,
)
from .simulate import simulate_dataset

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    """argparse variant whose usage failures exit 1, not 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _build_parser() -> _Parser:
    top = _Parser(prog="hawkes-gof", description=__doc__)
    sub = top.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    sim = sub.add_parser("simulate", help="simulate a dataset to a sequence file")
    sim.add_argument("--kernel", required=True,
                     choices=["exp", "power", "piecewise"])
    sim.add_argument("--mu", type=float, required=True)
    sim.add_argument("--amplitude", type=float,
                     help="exp kernel value at lag 0")
    sim.add_argument("--decay", type=float, help="exp kernel decay rate")
    sim.add_argument("--alpha", type=float,
                     help="branching ratio (power and piecewise kernels)")
    sim.add_argument("--cutoff", type=float, help="power kernel offset c")
    sim.add_argument("--exponent", type=float, help="power kernel exponent")
    sim.add_argument("--bins", help="piecewise grid: preset name or endpoints")
    sim.add_argument("--g", help="piecewise weights, comma-separated")
    sim.add_argument("--horizon", type=float, required=True)
    sim.add_argument("--n-seqs", type=int, required=True)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--stream-offset", type=int, default=0)
    sim.add_argument("--id-prefix", default="seq")
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=_cmd_simulate)

    fit = sub.add_parser("fit", help="EM fit of the histogram kernel(s)")
    fit.add_argument("--data", required=True, help="sequence file")
    fit.add_argument("--data2", help="second file; merged pairwise with --data")
    fit.add_argument("--bins", required=True)
    fit.add_argument("--full", action="store_true",
                     help="fit per-stream kernels (needs --data2)")
    fit.add_argument("--em-tol", type=float, default=1e-3)
    fit.add_argument("--em-max-iter", type=int, default=500)
    fit.add_argument("--out", required=True, help="output fit.jsonl path")
    fit.set_defaults(func=_cmd_fit)

    test = sub.add_parser("test", help="paired two-sample run (K statistics)")
    test.add_argument("--config", help="flat key = value config file")
    test.add_argument("--d1", help="first dataset file")
    test.add_argument("--d2", help="second dataset file")
    test.add_argument("--bins")
    test.add_argument("--n", type=int, help="sequences per statistic")
    test.add_argument("--k", type=int, help="number of statistics")
    test.add_argument("--level", type=float)
    test.add_argument("--seed", type=int)
    test.add_argument("--em-tol", type=float)
    test.add_argument("--em-max-iter", type=int)
    test.add_argument("--dof-override", type=int)
    test.add_argument("--threads", type=int)
    test.add_argument("--out-dir")
    test.add_argument("--format", choices=["csv", "jsonl"], default="csv")
    test.set_defaults(func=_cmd_test)

    power = sub.add_parser("power", help="asymptotic power curve to CSV")
    power.add_argument("--r", type=int, required=True)
    power.add_argument("--scale", type=float, required=True,
                       help="effective observation length")
    power.add_argument("--level", type=float, default=0.05)
    power.add_argument("--critical", type=float,
                       help="override the chi-square critical value")
    power.add_argument("--deltas",
                       help="comma-separated kernel-difference norms")
    power.add_argument("--delta-max", type=float,
                       help="sweep 0..delta-max instead of --deltas")
    power.add_argument("--steps", type=int, default=50)
    power.add_argument("--out", required=True)
    power.set_defaults(func=_cmd_power)

    base = sub.add_parser("baseline", help="competing diagnostics")
    base_sub = base.add_subparsers(dest="baseline", parser_class=_Parser)
    base_sub.required = True

    rip = base_sub.add_parser("ripley", help="Ripley K per sequence")
    rip.add_argument("--data", required=True)
    rip.add_argument("--t", type=float, required=True)
    rip.add_argument("--mu", type=float,
                     help="rate for the K normalization; default: per-sequence "
                          "event count / horizon")
    rip.add_argument("--fit", help="fit.jsonl with a null_fit record; uses its "
                                   "mu and, with --residual, its kernel")
    rip.add_argument("--residual", action="store_true",
                     help="thin with the fitted model before scoring")
    rip.add_argument("--seed", type=int, default=0)
    rip.add_argument("--out", required=True)
    rip.set_defaults(func=_cmd_ripley)

    gd = base_sub.add_parser("expgd", help="exponential-kernel MLE by ascent")
    gd.add_argument("--data", required=True)
    gd.add_argument("--init", required=True, help="mu,alpha,beta")
    gd.add_argument("--lr", type=float, default=1e-3)
    gd.add_argument("--steps", type=int, default=200)
    gd.add_argument("--freeze-alpha", action="store_true")
    gd.add_argument("--out", required=True, help="trace CSV path")
    gd.set_defaults(func=_cmd_expgd)

    rep = sub.add_parser("report", help="derive tables from gs.csv files")
    rep_sub = rep.add_subparsers(dest="report", parser_class=_Parser)
    rep_sub.required = True

    qq = rep_sub.add_parser("qq", help="sample vs chi-square quantiles")
    qq.add_argument("--gs", required=True, help="gs.csv from a test run")
    qq.add_argument("--dof", type=int, required=True)
    qq.add_argument("--out", required=True)
    qq.set_defaults(func=_cmd_qq)

    roc = rep_sub.add_parser("roc", help="ROC curve from two gs.csv files")
    roc.add_argument("--pos", required=True, help="gs.csv of the positive class")
    roc.add_argument("--neg", required=True, help="gs.csv of the negative class")
    roc.add_argument("--out", required=True)
    roc.set_defaults(func=_cmd_roc)

    return top


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise DomainError(f"cannot parse {text!r} as numbers: {exc}") from None


def _cmd_simulate(args) -> int:
    if args.kernel == "exp":
        if args.amplitude is None or args.decay is None:
            raise DomainError("exp kernel needs --amplitude and --decay")
        kern = ExponentialKernel(amplitude=args.amplitude, decay=args.decay)
    elif args.kernel == "power":
        if args.alpha is None or args.cutoff is None or args.exponent is None:
            raise DomainError(
                "power kernel needs --alpha, --cutoff, --exponent"
            )
        kern = PowerKernel(alpha=args.alpha, cutoff=args.cutoff,
                           exponent=args.exponent)
    else:
        if args.alpha is None or args.bins is None or args.g is None:
            raise DomainError("piecewise kernel needs --alpha, --bins, --g")
        kern = PiecewiseKernel(alpha=args.alpha, g=_parse_floats(args.g),
                               grid=grid_from_spec(args.bins))
    model = HawkesModel(mu=args.mu, kernel=kern)
    seqs = simulate_dataset(
        model, args.horizon, args.n_seqs, args.seed,
        id_prefix=args.id_prefix, stream_offset=args.stream_offset,
    )
    seq_io.emit(seqs, args.out)
    total = sum(s.n_events for s in seqs)
    print(f"wrote {len(seqs)} sequences ({total} events) to {args.out}",
          file=sys.stderr)
    return 0


def _fit_records(args):
    grid = grid_from_spec(args.bins)
    seqs = seq_io.ingest(args.data)
    if args.data2:
        other = seq_io.ingest(args.data2)
        if len(other) != len(seqs):
            raise DataError(
                f"{args.data} has {len(seqs)} sequences, "
                f"{args.data2} has {len(other)}"
            )
        from .sequences import merge_sequences

        seqs = [merge_sequences(a, b) for a, b in zip(seqs, other)]
    elif args.full:
        raise DomainError("--full needs --data2 (two labeled streams)")
    fitter = em_fit_full if args.full else em_fit_null
    report = fitter(seqs, grid, tol=args.em_tol, max_iter=args.em_max_iter)
    params = report.params
    if args.full:
        fitted = {
            "record": "full_fit", "mu": params.mu,
            "alpha1": params.alpha1, "g1": [float(v) for v in params.g1],
            "alpha2": params.alpha2, "g2": [float(v) for v in params.g2],
            "endpoints": list(grid.endpoints),
        }
    else:
        fitted = {
            "record": "null_fit", "mu": params.mu, "alpha": params.alpha,
            "g": [float(v) for v in params.g],
            "endpoints": list(grid.endpoints),
        }
    em_rec = {
        "record": "em", "iterations": report.n_iter,
        "final_change": report.final_change, "converged": report.converged,
    }
    return fitted, em_rec


def _cmd_fit(args) -> int:
    fitted, em_rec = _fit_records(args)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(fitted, separators=(",", ":")) + "\n")
        fh.write(json.dumps(em_rec, separators=(",", ":")) + "\n")
    print(
        f"EM finished in {em_rec['iterations']} iterations "
        f"(converged: {em_rec['converged']}); wrote {args.out}",
        file=sys.stderr,
    )
    return 0


def _cmd_test(args) -> int:
    raw = seq_io.read_config(args.config) if args.config else {}
    cfg = TestConfig.from_mapping(
        raw,
        bins=grid_from_spec(args.bins).endpoints if args.bins else None,
        n=args.n, k=args.k, level=args.level, seed=args.seed,
        em_tol=args.em_tol, em_max_iter=args.em_max_iter,
        dof_override=args.dof_override, threads=args.threads,
        out_dir=args.out_dir, d1=args.d1, d2=args.d2,
    )
    if not cfg.d1 or not cfg.d2:
        raise DomainError("test needs --d1 and --d2 (flags or config file)")
    d1 = seq_io.ingest(cfg.d1)
    d2 = seq_io.ingest(cfg.d2)
    report = run_gof(d1, d2, cfg)
    paths = emit_report(report, format=args.format)
    _print_summary(report)
    print("wrote " + ", ".join(paths), file=sys.stderr)
    return 0


def _print_summary(report: RunReport) -> None:
    vals = report.gs_values()
    failed = sum(t.failed for t in report.trials)
    mean = float(vals.mean()) if vals.size else float("nan")
    print(
        f"K={len(report.trials)} trials, mean GS {mean:.3f}, "
        f"rejection rate {report.rejection_rate():.3f}, "
        f"{failed} failed, EM iterations {report.em_iterations}, "
        f"wall {report.wall_time:.1f}s",
        file=sys.stderr,
    )


def _cmd_power(args) -> int:
    if args.deltas:
        deltas = _parse_floats(args.deltas)
    elif args.delta_max is not None:
        if args.steps < 2:
            raise DomainError("--steps must be >= 2")
        deltas = list(np.linspace(0.0, args.delta_max, args.steps))
    else:
        raise DomainError("power needs --deltas or --delta-max")
    rows = power_curve(args.r, deltas, args.scale, level=args.level,
                       critical=args.critical)
    write_csv(args.out, ["delta", "power"], rows)
    print(f"wrote {len(rows)} rows to {args.out}", file=sys.stderr)
    return 0


def _load_null_fit(path: str) -> NullParams:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec.get("record") == "null_fit":
                from .kernels import BinGrid

                return NullParams(
                    mu=rec["mu"], alpha=rec["alpha"], g=rec["g"],
                    grid=BinGrid(tuple(rec["endpoints"])),
                )
    raise ParseError(0, f"no null_fit record in {path}")


def _cmd_ripley(args) -> int:
    seqs = seq_io.ingest(args.data)
    model = None
    if args.fit:
        model = _load_null_fit(args.fit).as_model()
    if args.residual and model is None:
        raise DomainError("--residual needs --fit")
    rows = []
    for i, seq in enumerate(seqs):
        scored = seq
        if args.residual:
            scored = residual_process(seq, model, args.seed + i)
        if args.mu is not None:
            mu_hat = args.mu
        elif model is not None:
            mu_hat = model.mu
        else:
            mu_hat = seq.n_events / seq.horizon
        if scored.n_events == 0 or mu_hat <= 0:
            rows.append((seq.id, float("nan")))
            continue
        rows.append((seq.id, ripley_k(scored, args.t, mu_hat)))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("id,khat\n")
        for sid, val in rows:
            fh.write(f"{sid},{val!r}\n")
    print(f"wrote {len(rows)} rows to {args.out}", file=sys.stderr)
    return 0


def _cmd_expgd(args) -> int:
    seqs = seq_io.ingest(args.data)
    init = _parse_floats(args.init)
    if len(init) != 3:
        raise DomainError("--init must be mu,alpha,beta")
    fit = exp_mle_gd(seqs, tuple(init), lr=args.lr, steps=args.steps,
                     freeze_alpha=args.freeze_alpha)
    write_csv(args.out, ["step", "loglik"],
              ((i, v) for i, v in enumerate(fit.loglik_trace)))
    print(json.dumps(
        {"mu": fit.mu, "alpha": fit.alpha, "beta": fit.beta,
         "steps": fit.steps, "loglik": fit.loglik_trace[-1]},
        separators=(",", ":"),
    ))
    return 0


def _read_gs_csv(path: str) -> np.ndarray:
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        try:
            col = header.index("gs")
        except ValueError:
            raise ParseError(1, f"no gs column in {path}") from None
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                values.append(float(parts[col]))
            except (IndexError, ValueError):
                raise ParseError(lineno, f"bad row in {path}") from None
    arr = np.asarray(values)
    return arr[np.isfinite(arr)]


def _cmd_qq(args) -> int:
    vals = _read_gs_csv(args.gs)
    if vals.size == 0:
        raise DataError(f"no finite statistics in {args.gs}")
    table = qq_table(vals, args.dof)
    write_csv(args.out, ["theoretical", "empirical"], table)
    print(f"wrote {len(table)} rows to {args.out}", file=sys.stderr)
    return 0


def _cmd_roc(args) -> int:
    pos = _read_gs_csv(args.pos)
    neg = _read_gs_csv(args.neg)
    if pos.size == 0 or neg.size == 0:
        raise DataError("need finite statistics in both classes")
    rows = roc_points(pos, neg)
    write_csv(args.out, ["fpr", "tpr", "threshold"], rows)
    print(f"auc={auc(pos, neg)!r}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except HawkesGofError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
