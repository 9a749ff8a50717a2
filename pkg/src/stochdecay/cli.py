"""Command line front door: regime, simulate, ito, accept, report."""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import acceptance
from . import analysis as an
from . import io
from .config import ExperimentConfig, check_statistics, load_config
from .engine import run_ensemble
from .errors import ConfigurationError, EstimatorError, StochDecayError
from .model import classify_regime
from .noise import make_noise
from .oracle import ITO_COLUMNS, ito_error_scan, ito_ray_scan

EXIT_OK, EXIT_ACCEPT, EXIT_SIM, EXIT_QUAD, EXIT_CONFIG = 0, 1, 2, 3, 4

CITATIONS = {
    "terminal": "Theorems 4.1/4.2",
    "loglog_slope": "Corollary 5.5",
    "comparison_ratio_g": "Theorem 5.4(a)",
    "comparison_ratio_f": "Theorem 5.4(b)",
    "exact_rate": "Theorem 6.2",
    "oscillation": "Theorem 6.4",
    "martingale": "Lemma 2.2",
}


def _load(args):
    if args.config is None:
        raise ConfigurationError("--config PATH is required")
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "threads", None) is not None:
        cfg.threads = args.threads
    if getattr(args, "force", False):
        cfg.force = True
    cfg.validate()
    return cfg


def _fmt_num(v):
    return "none" if v is None else f"{v:.6g}"


def cmd_regime(cfg, out=None):
    out = out or sys.stdout
    rep = classify_regime(cfg.model)
    print(f"regime: {rep.case_tag}", file=out)
    print(f"  beta = sup 2f/g^2 = {_fmt_num(rep.beta)}", file=out)
    print(f"  L = lim f/g^2 at 0 = {_fmt_num(rep.L)}", file=out)
    print(f"  decay exponent lambda = {_fmt_num(rep.lam)}", file=out)
    print(f"  exact-rate constant = {_fmt_num(rep.exact_constant)}", file=out)
    print(f"  oscillatory = {rep.oscillatory}", file=out)
    if rep.comparison_sum:
        print(f"  ln|x_n| / sum {rep.comparison_sum} -> {_fmt_num(rep.comparison_limit)}", file=out)
    for c in rep.citations:
        print(f"  cites: {c}", file=out)
    for n in rep.notes:
        print(f"  note: {n}", file=out)
    os.makedirs(cfg.output_dir, exist_ok=True)
    with open(os.path.join(cfg.output_dir, "regime.json"), "w") as fh:
        json.dump({"experiment": cfg.name, "config_sha256": cfg.digest, **rep.to_dict()},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    return rep


def cmd_simulate(cfg, out=None):
    out = out or sys.stdout
    rep = classify_regime(cfg.model)
    for p in check_statistics(cfg, rep):
        print(f"warning (forced): {p}", file=out)
    src = make_noise(cfg.noise, cfg.seed)
    records, summary = run_ensemble(cfg.model, src, cfg.n_paths, cfg.n_steps,
                                    lam=cfg.lam, mu=cfg.mu, threads=cfg.threads)
    os.makedirs(cfg.output_dir, exist_ok=True)
    meta = io.meta_line(cfg)
    # single collector: records are already sorted by stream
    for r in records:
        io.write_path(r, cfg.output_dir, meta)
    io.write_summary(summary, os.path.join(cfg.output_dir, "summary.csv"), meta)
    print(f"wrote {len(records)} paths and summary.csv to {cfg.output_dir}", file=out)
    return records, summary


def _statistic_rows(cfg, rep, records):
    rows = []
    name = cfg.name
    src = None
    table = None
    for stat in cfg.statistics:
        cite = CITATIONS[stat]
        for r in records:
            s = r.meta["stream"]
            n_hi = int(r.n[-1])
            try:
                if stat == "terminal":
                    rows.append([name, s, "log_abs_x", f"N={n_hi}", r.log_abs_x[-1], "", cite])
                    rows.append([name, s, "min_log_abs_x_last_decade", f"N={n_hi}",
                                 _liminf(r), "", "Remark 4.3"])
                elif stat == "loglog_slope":
                    est = an.loglog_slope(r)
                    target = -1.0 / rep.lam if rep.lam else ""
                    rows.append([name, s, stat, f"{est.window[0]}-{est.window[1]}", est.slope,
                                 target, cite])
                elif stat == "comparison_ratio_g":
                    rows.append([name, s, stat, f"N={n_hi}", an.comparison_ratio_g(r),
                                 rep.comparison_limit, cite])
                elif stat == "comparison_ratio_f":
                    rows.append([name, s, stat, f"N={n_hi}", an.comparison_ratio_f(r),
                                 rep.comparison_limit, cite])
                elif stat == "exact_rate":
                    v = an.exact_rate_statistic(r, cfg.model.mu_f, rep.exact_constant)[-1, 1]
                    rows.append([name, s, stat, f"N={n_hi}", v, 1.0, cite])
                elif stat == "oscillation":
                    for d in an.oscillation_records(r):
                        rows.append([name, s, "decade_max", f"decade={d.decade}", d.max_stat,
                                     "", cite])
                        rows.append([name, s, "decade_min", f"decade={d.decade}", d.min_stat,
                                     "", cite])
                elif stat == "martingale":
                    if table is None:
                        src = make_noise(cfg.noise, cfg.seed)
                        table = an.ExpectationTable(cfg.model, cfg.noise)
                    dg = an.log_martingale_diag(cfg.model, src, s, n_hi, table)
                    rows.append([name, s, "sum_d_over_qv", f"N={n_hi}", dg.m_over_qv, 0.0, cite])
                    rows.append([name, s, "qv_over_h_acc_g2", f"N={n_hi}", dg.qv_over_h_acc_g2,
                                 1.0, "characteristic estimate"])
            except EstimatorError as e:
                rows.append([name, s, stat, f"N={n_hi}", "nan", "", f"{cite}; {e}"])
    return rows


def _liminf(record):
    n = record.n
    sel = n >= max(1, int(n[-1]) // 10)
    return float(np.min(record.log_abs_x[sel]))


def cmd_report(cfg, out=None):
    out = out or sys.stdout
    rep = classify_regime(cfg.model)
    check_statistics(cfg, rep)
    streams = io.list_streams(cfg.output_dir)
    if not streams:
        raise ConfigurationError(f"output_dir {cfg.output_dir!r} holds no path CSVs; "
                                 "run `simulate` first")
    mu = cfg.mu if cfg.mu is not None else (rep.lam or 1.0)
    records = [io.read_path(cfg.output_dir, s, {"mu": mu}) for s in streams]
    rows = _statistic_rows(cfg, rep, records)
    path = os.path.join(cfg.output_dir, "statistics.csv")
    io.write_csv(path, io.REPORT_COLUMNS, rows, io.meta_line(cfg))
    for stat in sorted({r[2] for r in rows}):
        vals = [float(r[4]) for r in rows if r[2] == stat]
        print(f"{stat}: median {np.nanmedian(vals):.6g} over {len(vals)} rows", file=out)
    print(f"wrote {path}", file=out)
    return rows


def cmd_ito(cfg, out=None):
    out = out or sys.stdout
    if cfg.ito is None:
        raise ConfigurationError("ito section is required for the ito subcommand")
    it = cfg.ito
    scan = ito_error_scan(it.phi, it.f, it.g, it.h_grid, cfg.noise)
    scans = [("h", scan)]
    if it.t_grid:
        h = it.h_fixed if it.h_fixed is not None else it.h_grid[-1]
        scans.append(("t", ito_ray_scan(it.phi, it.f, it.g, h, it.t_grid, cfg.noise)))
    os.makedirs(cfg.output_dir, exist_ok=True)
    rows = [[axis, *rep.row()] for axis, s in scans for rep in s]
    path = os.path.join(cfg.output_dir, "ito_scan.csv")
    io.write_csv(path, ("scan", *ITO_COLUMNS), rows, io.meta_line(cfg))
    ok = True
    for axis, s in scans:
        msg = "PASS" if s.passed else "FAIL"
        print(f"{axis}-scan norm_err monotone: {msg}" + (f" ({s.note})" if s.note else ""), file=out)
        ok &= s.passed
    print(f"wrote {path}", file=out)
    return ok


def cmd_accept(args, out=None):
    out = out or sys.stdout
    seed = acceptance.DEFAULT_SEED if args.seed is None else args.seed
    threads = args.threads or 1
    echo = lambda line: print(line, file=out, flush=True)
    results = acceptance.run_suite(args.filter, seed=seed, threads=threads, echo=echo)
    print("", file=out)
    print(f"{'criterion':<10}{'check':<34}{'target':<32}{'measured':<44}{'tolerance':<20}result",
          file=out)
    for row in acceptance.table_rows(results):
        print(f"{row[0]:<10}{row[1]:<34}{row[2]:<32}{row[3]:<44}{row[4]:<20}{row[5]}", file=out)
    for r in results:
        if not r.within_budget:
            print(f"{r.name}: runtime {r.runtime:.1f}s exceeds budget {r.budget:.0f}s", file=out)
    n_ok = sum(r.passed for r in results)
    print(f"{n_ok}/{len(results)} criteria passed", file=out)
    return all(r.passed for r in results)


def build_parser():
    p = argparse.ArgumentParser(prog="stochdecay",
                                description="Decay and stability experiments for stochastic "
                                            "difference equations.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("regime", "classify the model and print its predictions"),
                           ("simulate", "run the path ensemble and write CSVs"),
                           ("report", "compute statistics from simulate output"),
                           ("ito", "quadrature check of the Ito expansion"),
                           ("accept", "run the acceptance suite")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", metavar="PATH", required=name != "accept")
        sp.add_argument("--seed", type=int, default=None, help="override the master seed")
        sp.add_argument("--threads", type=int, default=None)
        sp.add_argument("--force", action="store_true",
                        help="run statistics outside their regime or noise assumptions")
        if name == "accept":
            sp.add_argument("--filter", metavar="NAME", default=None,
                            help="comma separated criteria, e.g. A1,A10")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "accept":
            return EXIT_OK if cmd_accept(args) else EXIT_ACCEPT
        cfg = _load(args)
        if args.command == "regime":
            cmd_regime(cfg)
        elif args.command == "simulate":
            cmd_simulate(cfg)
        elif args.command == "report":
            cmd_report(cfg)
        elif args.command == "ito":
            return EXIT_OK if cmd_ito(cfg) else EXIT_ACCEPT
        return EXIT_OK
    except KeyError as e:
        print(f"error: {e.args[0]}", file=sys.stderr)
        return EXIT_CONFIG
    except StochDecayError as e:
        kind = {EXIT_CONFIG: "configuration error", EXIT_SIM: "simulation fault",
                EXIT_QUAD: "oracle accuracy fault"}.get(e.exit_code, "error")
        print(f"{kind}: {e}", file=sys.stderr)
        return e.exit_code

if __name__ == "__main__":
    sys.exit(main())
