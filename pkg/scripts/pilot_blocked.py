"""Diagnostics behind the three acceptance criteria that fail at their stated tolerance.

Reuses the acceptance ensembles and seed, then prints:
  A6  median ln|x_n| / sum g^2 against n for L=0, and the case_ii escape fraction
  A8  how often each window condition holds on its own
  A9  the spread of sum d / qv against the 1/sqrt(qv) prediction
"""
import argparse
import math

import numpy as np

from stochdecay import analysis as an
from stochdecay.acceptance import CASE_II, DEFAULT_SEED, NOISE_DOMINATED, NORMAL, OSCILLATORY, Context
from stochdecay.model import classify_regime


def a6(ctx):
    recs, _ = ctx.ensemble(NOISE_DOMINATED, 64, 10 ** 6)
    target = classify_regime(NOISE_DOMINATED).comparison_limit
    print(f"A6 L=0: target {target}")
    for n in (10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6):
        vals = []
        for r in recs:
            k = int(np.searchsorted(r.n, n))
            vals.append(r.log_abs_x[k] / r.acc_g2[k])
        med_acc = np.median([r.acc_g2[int(np.searchsorted(r.n, n))] for r in recs])
        print(f"  n={n:>8}  median ratio {np.median(vals):+.5f}  median sum g^2 {med_acc:8.1f}")
    recs, _ = ctx.ensemble(CASE_II, 64, 10 ** 6)
    rep = classify_regime(CASE_II)
    esc = np.mean([r.log_abs_x[-1] > 0 for r in recs])
    print(f"A6 case_ii: beta {rep.beta:.3f}, paths ending with |x_N| > 1 (clamped region): {esc:.3f}")
    ratios = [an.comparison_ratio_g(r) for r in recs if r.log_abs_x[-1] <= 0]
    if ratios:
        print(f"  median ratio over paths that stayed below 1: {np.median(ratios):+.5f}")


def a8(ctx):
    recs, _ = ctx.ensemble(OSCILLATORY, 32, 10 ** 7, mu=2.0)
    new_max = new_min = both = 0
    for r in recs:
        mx0, mn0 = an.window_extremes(r, range(2, 5))
        mx1, mn1 = an.window_extremes(r, range(5, 8))
        new_max += mx1 > mx0
        new_min += mn1 < mn0
        both += (mx1 > mx0) and (mn1 < mn0)
    k = len(recs)
    print(f"A8: new max {new_max / k:.3f}  new min {new_min / k:.3f}  both {both / k:.3f}")


def a9(ctx):
    table = an.ExpectationTable(NOISE_DOMINATED, NORMAL)
    diags = [an.log_martingale_diag(NOISE_DOMINATED, ctx.source, s, 10 ** 6, table) for s in range(64)]
    qv = np.array([d.qv for d in diags])
    z = np.array([d.sum_d / math.sqrt(d.qv) for d in diags])
    print(f"A9: qv range [{qv.min():.2f}, {qv.max():.2f}], median {np.median(qv):.2f}")
    print(f"  sd of sum d / sqrt(qv) = {z.std():.3f} (1 if sum d is a martingale with that qv)")
    print(f"  predicted P(|sum d/qv| < 0.05) at median qv: "
          f"{math.erf(0.05 * math.sqrt(np.median(qv)) / math.sqrt(2)):.3f}")


if __name__ == "__main__":
    p = argparse.ArgumentParser()
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args()
    ctx = Context(seed=args.seed, threads=args.threads)
    a6(ctx)
    a8(ctx)
    a9(ctx)
