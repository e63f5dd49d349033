"""Command-line entry point: ``pollnet <verb> [options]``.

Exit codes: 0 success, 1 a tolerance check failed, 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import sys

from . import harness
from .model import ModelError, SingularSystemError
from .modelfile import ModelFileError, load_model
from .simulator import SimConfig, SimConfigError, export_samples, run

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def _rho_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of loads: {text!r}") from None


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pollnet", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(p, rho_default=None, sim=True):
        p.add_argument("--model", default="katayama", help="model JSON file or bundled model name")
        p.add_argument("--rho", type=_rho_list, default=rho_default, help="comma-separated loads")
        p.add_argument("--out", help="CSV output path")
        if sim:
            p.add_argument("--served", type=int, default=1_000_000, help="post-warmup completions per point")
            p.add_argument("--seed", type=int, default=1)
            p.add_argument("--batches", type=int, default=20)
            p.add_argument("--workers", type=int, default=1, help="parallel simulations (compare only)")

    common(sub.add_parser("analyze", help="LT/HT limits and approximation over a load grid"),
           list(harness.TABLE1_RHO), sim=False)
    p = sub.add_parser("simulate", help="simulate one or more loads")
    common(p, [0.5])
    p.add_argument("--dump", help="prefix for raw polling-vector and waiting-time CSV dumps")
    common(sub.add_parser("compare", help="approximation against simulation"), list(harness.TABLE1_RHO))
    common(sub.add_parser("ht-verify", help="heavy-traffic gamma laws against simulation"), [0.98])
    p = sub.add_parser("reproduce-table1", help="rerun the three-queue tandem example")
    p.add_argument("--analytic-only", action="store_true")
    p.add_argument("--served", type=int, default=None, help="override completions per point")
    p.add_argument("--seed", type=int, default=2011)
    p.add_argument("--batches", type=int, default=20)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="CSV output path")
    return ap


def _write_analytic(rows, out):
    if out is None:
        w = csv.writer(sys.stdout)
    else:
        fh = open(out, "w", newline="")
        w = csv.writer(fh)
    w.writerow(["rho", "queue", "w_lt", "w_ht", "approx"])
    for r in rows:
        w.writerow([r.rho, r.queue, f"{r.w_lt:.6f}", f"{r.w_ht:.6f}", f"{r.approx:.6f}"])
    if out is not None:
        fh.close()


def _cmd(args) -> int:
    if args.verb == "reproduce-table1":
        report, analytic, checks = harness.reproduce_table1(
            analytic_only=args.analytic_only, seed=args.seed, served=args.served,
            batches=args.batches, workers=args.workers)
        if report is not None:
            print(report.format_table())
            if args.out:
                report.write_csv(args.out)
        elif args.out:
            _write_analytic(analytic, args.out)
        for c in checks:
            print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}")
        ok = all(c.passed for c in checks)
        print(f"{sum(c.passed for c in checks)}/{len(checks)} checks passed")
        return EXIT_OK if ok else EXIT_FAIL

    model = load_model(args.model)
    if args.verb == "analyze":
        _write_analytic(harness.analyze(model, args.rho), args.out)
        return EXIT_OK

    cfg = SimConfig(seed=args.seed, target_served=args.served, batches=args.batches)
    if args.verb == "simulate":
        for k, rho in enumerate(args.rho):
            res = run(model, SimConfig(seed=harness.point_seed(args.seed, k), rho_target=rho,
                                       target_served=args.served, batches=args.batches,
                                       record_polling_vectors=bool(args.dump), record_waits=bool(args.dump)))
            print(f"rho={rho} realized={res.realized_rho:.5f} cycle={res.mean_cycle:.5f} +- {res.cycle_ci:.5f}"
                  f" wall={res.wall_time:.2f}s")
            for i in range(model.n):
                print(f"  Q{i + 1}: E[W]={res.mean_wait[i]:.5f} +- {res.wait_ci[i]:.5f}  served={res.served[i]}")
            if args.dump:
                for path in export_samples(res, f"{args.dump}_rho{rho}"):
                    print(f"  wrote {path}")
        return EXIT_OK
    if args.verb == "compare":
        report = harness.compare(model, args.rho, cfg, workers=args.workers)
        print(report.format_table())
        for rho, err in report.failures.items():
            print(f"simulation failed at rho={rho}: {err}", file=sys.stderr)
        if args.out:
            report.write_csv(args.out)
        return EXIT_OK if not report.failures else EXIT_FAIL
    if args.verb == "ht-verify":
        for rho in args.rho:
            print(harness.ht_verify(model, rho, cfg).format_table())
        return EXIT_OK
    raise AssertionError(args.verb)  # pragma: no cover


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _cmd(args)
    except (ModelFileError, ModelError, SingularSystemError, SimConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
