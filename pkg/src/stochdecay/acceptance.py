"""Acceptance suite A1..A10.

Each criterion runs at its stated size and tolerance.  Ensembles shared between
criteria (A5 with A6 and A9, A7 with the A8 control) are simulated once per run.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import analysis as an
from .engine import run_ensemble, simulate_path
from .model import ModelSpec, classify_regime, predict_general_rate
from .noise import NoiseSpec, make_noise
from .oracle import PhiSpec, ito_error_scan, ito_ray_scan, ito_report

DEFAULT_SEED = 20261016
NORMAL = NoiseSpec("standard_normal")

STABLE = ModelSpec(a_f=1.0, mu_f=1.0, a_g=1.0, mu_g=2.0)
UNSTABLE = ModelSpec(a_f=-1.0, mu_f=1.0, a_g=1.0, mu_g=2.0)
NOISE_DOMINATED = ModelSpec(a_f=0.0, mu_f=1.0, a_g=1.0, mu_g=2.0)
CASE_II = ModelSpec(a_f=-0.3, mu_f=2.0, a_g=1.0, mu_g=2.0)
CASE_III = ModelSpec(a_f=1.0, mu_f=1.0, a_g=1.0, mu_g=4.0)
OSCILLATORY = ModelSpec(a_f=1.0, mu_f=3.0, a_g=1.0, mu_g=2.0)


@dataclass
class Check:
    label: str
    target: str
    measured: str
    tolerance: str
    passed: bool


@dataclass
class CriterionResult:
    name: str
    title: str
    citation: str
    checks: list
    runtime: float
    budget: float

    @property
    def within_budget(self):
        return self.runtime <= self.budget

    @property
    def passed(self):
        return self.within_budget and all(c.passed for c in self.checks)

    def line(self):
        measured = "; ".join(f"{c.label}={c.measured}" for c in self.checks)
        target = "; ".join(f"{c.label}: {c.target} ({c.tolerance})" for c in self.checks)
        verdict = "PASS" if self.passed else "FAIL"
        return (f"{self.name:<4} {verdict}  [{self.citation}] target {target} | measured {measured}"
                f" | runtime {self.runtime:.1f}s / {self.budget:.0f}s")


@dataclass
class Context:
    seed: int = DEFAULT_SEED
    threads: int = 1
    _cache: dict = field(default_factory=dict)

    def ensemble(self, model, n_paths, n_steps, mu=None):
        key = (model, n_paths, n_steps, mu)
        if key not in self._cache:
            src = make_noise(NORMAL, self.seed)
            self._cache[key] = run_ensemble(model, src, n_paths, n_steps, mu=mu,
                                            threads=self.threads)
        return self._cache[key]

    @property
    def source(self):
        return make_noise(NORMAL, self.seed)


def _rel(measured, target, tol):
    return abs(measured - target) <= tol * abs(target)


def _frac_check(label, frac, bound, at_least=True):
    op = ">=" if at_least else "<="
    ok = frac >= bound if at_least else frac <= bound
    return Check(label, f"{op} {bound}", f"{frac:.4f}", "fraction of paths", ok)


def a1(ctx):
    phi = PhiSpec("square")
    f, g, h = -0.5, 0.3, 0.01
    want = f * f * h * h
    out = []
    for kind in ("standard_normal", "uniform_symmetric", "rademacher"):
        r = ito_report(phi, f, g, h, NoiseSpec(kind))
        out.append(Check(f"err-f2h2[{kind}]", "0", f"{r.err - want:.3e}", "abs 1e-12",
                         abs(r.err - want) <= 1e-12))
    return out


def a2(ctx):
    phi = PhiSpec("power_alpha", 0.5)
    scan = ito_error_scan(phi, -0.3, 0.4, [1e-1, 1e-2, 1e-3, 1e-4], NORMAL, tie_tol=0.0)
    ray = ito_ray_scan(phi, -0.3, 0.4, 1e-2, [1.0, 0.1, 0.01], NORMAL, tie_tol=0.0)
    fmt = lambda s: ",".join(f"{r.norm_err:.3e}" for r in s)
    return [Check("h-scan", "strictly decreasing |norm_err|", fmt(scan), "strict", scan.passed),
            Check("t-ray", "decreasing |norm_err|", fmt(ray), "strict", ray.passed)]


def a3(ctx):
    _, summ = ctx.ensemble(STABLE, 200, 10 ** 5)
    return [_frac_check("P(|x_N|<0.05)", summ.fraction_below(0.05), 0.95)]


def a4(ctx):
    _, summ = ctx.ensemble(UNSTABLE, 200, 10 ** 5)
    return [_frac_check("P(|x_N|<0.05)", summ.fraction_below(0.05), 0.05, at_least=False)]


def a5(ctx):
    recs, _ = ctx.ensemble(NOISE_DOMINATED, 64, 10 ** 6)
    slope = float(np.median([an.loglog_slope(r).slope for r in recs]))
    return [Check("median slope", "[-0.6, -0.4]", f"{slope:.4f}", "interval",
                  -0.6 <= slope <= -0.4)]


def a6(ctx):
    out = []
    for label, model, target, tol, n_paths in (("ratio_g[L=0]", NOISE_DOMINATED, -0.005, 0.10, 64),
                                               ("ratio_g[L=0.3]", CASE_II, -0.002, 0.15, 64)):
        recs, _ = ctx.ensemble(model, n_paths, 10 ** 6)
        med = float(np.median([an.comparison_ratio_g(r) for r in recs]))
        out.append(Check(label, f"{target}", f"{med:.5f}", f"rel {tol:.0%}", _rel(med, target, tol)))
    return out


def a7(ctx):
    rep = classify_regime(CASE_III)
    const = rep.exact_constant
    recs, _ = ctx.ensemble(CASE_III, 64, 10 ** 6)
    rf = float(np.median([an.comparison_ratio_f(r) for r in recs]))
    ex = float(np.median([an.exact_rate_statistic(r, CASE_III.mu_f, const)[-1, 1] for r in recs]))
    det_model = ModelSpec(a_f=1.0, mu_f=1.0, a_g=0.0, mu_g=4.0)
    det = simulate_path(det_model, ctx.source, 0, 10 ** 6, mu=1.0)
    det_stat = float(an.exact_rate_statistic(det, 1.0, const)[-1, 1])
    return [Check("ratio_f", "-0.01", f"{rf:.5f}", "rel 10%", _rel(rf, -0.01, 0.10)),
            Check("exact_rate", "1", f"{ex:.4f}", "abs 0.05", abs(ex - 1) <= 0.05),
            Check("g=0 exact_rate", "1", f"{det_stat:.5f}", "rel 1%", abs(det_stat - 1) <= 0.01)]


def a8(ctx):
    recs, _ = ctx.ensemble(OSCILLATORY, 32, 10 ** 7, mu=2.0)
    both = 0
    for r in recs:
        mx_early, mn_early = an.window_extremes(r, range(2, 5))
        mx_late, mn_late = an.window_extremes(r, range(5, 8))
        both += (mx_late > mx_early) and (mn_late < mn_early)
    ctrl_recs, _ = ctx.ensemble(CASE_III, 64, 10 ** 6)
    quiet = sum(not an.new_record_in_final_decade(r) for r in ctrl_recs)
    return [_frac_check("new max and min (dec 5-7 vs 2-4)", both / len(recs), 0.75),
            _frac_check("control quiet final decade", quiet / len(ctrl_recs), 0.75)]


def a9(ctx):
    src = ctx.source
    table = an.ExpectationTable(NOISE_DOMINATED, NORMAL)
    diags = [an.log_martingale_diag(NOISE_DOMINATED, src, s, 10 ** 6, table) for s in range(64)]
    small = np.mean([abs(d.m_over_qv) < 0.05 for d in diags])
    qv_ok = np.mean([abs(d.qv_over_h_acc_g2 - 1) <= 0.1 for d in diags])
    return [_frac_check("|sum d/qv|<0.05", float(small), 0.90),
            _frac_check("qv/(h acc_g2) in 1+-0.1", float(qv_ok), 0.90)]


def gamma_recurrence(n_terms, c=1.0, gamma=1.0, y0=1.0):
    """y_{k+1} = y_k + c y_k^(-gamma), returned as an array of n_terms values."""
    y = np.empty(n_terms)
    cur = y0
    for k in range(n_terms):
        y[k] = cur
        cur += c * cur ** -gamma
    return y


def a10(ctx):
    y = gamma_recurrence(10 ** 6)
    gl = an.gamma_limit_check(y, 1.0)
    pr = predict_general_rate(lambda u: u * u, 1e4)
    i = np.arange(1, 10 ** 6 + 1, dtype=float)
    ta = an.toeplitz_average(np.ones_like(i), 1 + 1 / i)
    return [Check("gamma_limit", f"{math.sqrt(2):.6f}", f"{gl:.6f}", "abs 1e-3",
                  abs(gl - math.sqrt(2)) <= 1e-3),
            Check("general_rate", "7.0708e-03", f"{pr:.7e}", "abs 1e-7", abs(pr - 7.0708e-3) <= 1e-7),
            Check("toeplitz", "1", f"{ta:.7f}", "abs 2e-5", abs(ta - 1) <= 2e-5)]


@dataclass(frozen=True)
class Criterion:
    name: str
    title: str
    citation: str
    budget: float
    run: Callable


CRITERIA = {c.name: c for c in (
    Criterion("A1", "Ito identity for phi=square", "Ito expansion", 1, a1),
    Criterion("A2", "Ito error scaling", "Theorem 3.1", 10, a2),
    Criterion("A3", "stability", "Theorem 4.1", 30, a3),
    Criterion("A4", "instability", "Theorem 4.2", 30, a4),
    Criterion("A5", "decay exponent, noise dominated", "Corollary 5.5(b)", 120, a5),
    Criterion("A6", "comparison limit hL - h/2", "Theorem 5.4(a)", 120, a6),
    Criterion("A7", "comparison limit -h and exact rate", "Theorems 5.4(b), 6.2", 120, a7),
    Criterion("A8", "oscillation record trend", "Theorem 6.4", 600, a8),
    Criterion("A9", "martingale strong law", "Lemma 2.2", 300, a9),
    Criterion("A10", "sequence utilities", "Corollary 5.4, Toeplitz lemma", 5, a10),
)}


def select(filter_names=None):
    if not filter_names:
        return list(CRITERIA.values())
    names = [n.strip().upper() for n in filter_names.split(",") if n.strip()]
    unknown = [n for n in names if n not in CRITERIA]
    if unknown:
        raise KeyError(f"unknown criterion {unknown}; known {list(CRITERIA)}")
    return [CRITERIA[n] for n in names]


def run_criterion(crit, ctx):
    t0 = time.perf_counter()
    checks = crit.run(ctx)
    return CriterionResult(crit.name, crit.title, crit.citation, checks,
                           time.perf_counter() - t0, crit.budget)


def run_suite(filter_names=None, seed=DEFAULT_SEED, threads=1, echo=print):
    ctx = Context(seed=seed, threads=threads)
    results = []
    for crit in select(filter_names):
        res = run_criterion(crit, ctx)
        results.append(res)
        if echo:
            echo(res.line())
    return results


def table_rows(results):
    """(criterion, check, target, measured, tolerance, pass) rows."""
    return [(r.name, c.label, c.target, c.measured, c.tolerance, "pass" if c.passed else "fail")
            for r in results for c in r.checks]
