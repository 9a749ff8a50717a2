"""Limit statistics on simulated paths, and sequence-limit utilities.

Estimators read a ``PathRecord``; the martingale diagnostic replays a path
from its seed with an expectation table built by the quadrature oracle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numba
import numpy as np
from scipy import stats

from .engine import coefficients
from .errors import EstimatorError
from .oracle import conditional_log_moments

BURN_IN = 1000
# records in a converged statistic must beat the running extreme by this much (log units)
RECORD_MARGIN = math.log(1.01)


@dataclass
class DecayEstimate:
    slope: float
    stderr: float
    window: tuple
    r_squared: float
    n_points: int = 0


def default_window(record, burn_in=BURN_IN, decades=2):
    n_hi = int(record.n[-1])
    return (max(burn_in, n_hi // 10 ** decades), n_hi)


def loglog_slope(record, window=None, burn_in=BURN_IN):
    """Least-squares slope of ln|x_n| against ln n over checkpoints in ``window``."""
    if window is None:
        window = default_window(record, burn_in)
    n_lo, n_hi = window
    ns = record.n
    sel = (ns >= n_lo) & (ns <= n_hi) & (ns >= 1)
    absorbed = record.absorbed_at
    if absorbed is not None and absorbed <= n_hi:
        raise EstimatorError(f"path absorbed at 0 at step {absorbed}, inside the fit window")
    if sel.sum() < 8:
        raise EstimatorError(f"window {window} holds {int(sel.sum())} checkpoints, need >= 8")
    res = stats.linregress(np.log(ns[sel].astype(float)), record.log_abs_x[sel])
    return DecayEstimate(float(res.slope), float(res.stderr), (int(n_lo), int(n_hi)),
                         float(res.rvalue ** 2), int(sel.sum()))


def comparison_ratio_g(record):
    """ln|x_n| / sum_{i<n} g^2(x_i) at the terminal checkpoint."""
    acc = record.acc_g2[-1]
    if not acc > 0:
        raise EstimatorError("sum of g^2 is zero (g vanishes along the path)")
    return float(record.log_abs_x[-1] / acc)


def comparison_ratio_f(record):
    """ln|x_n| / sum_{i<n} |f(x_i)| at the terminal checkpoint."""
    acc = record.acc_absf[-1]
    if not acc > 0:
        raise EstimatorError("sum of |f| is zero (f vanishes along the path)")
    return float(record.log_abs_x[-1] / acc)


def exact_rate_statistic(record, mu, constant):
    """Rows (n, |x_n| n^(1/mu) / constant) over checkpoints with n >= 1."""
    if not (mu > 0 and constant > 0):
        raise EstimatorError("mu and constant must be positive")
    ns = record.n
    pos = ns >= 1
    with np.errstate(over="ignore"):
        val = np.exp(record.log_abs_x[pos] + np.log(ns[pos]) / mu - math.log(constant))
    return np.column_stack([ns[pos].astype(float), val])


class DecadeExtreme(NamedTuple):
    decade: int
    max_stat: float
    min_stat: float
    new_max: bool
    new_min: bool


def oscillation_records(record, margin=0.0):
    """Per-decade extremes of |x_n| n^(1/mu) with record-breaking flags.

    A decade sets a new max (min) when its extreme beats every earlier decade by
    more than ``margin`` in log units.  The first decade always counts as a record.
    """
    ext = record.decade_extremes
    out = []
    run_max, run_min = -math.inf, math.inf
    for d, lmax, lmin in ext:
        new_max = lmax > run_max + margin if math.isfinite(run_max) else True
        new_min = lmin < run_min - margin if math.isfinite(run_min) else True
        run_max, run_min = max(run_max, lmax), min(run_min, lmin)
        with np.errstate(over="ignore"):
            out.append(DecadeExtreme(int(d), float(np.exp(lmax)), float(np.exp(lmin)),
                                     bool(new_max), bool(new_min)))
    return out


def window_extremes(record, decades):
    """(max, min) of ln|x_n| + ln(n)/mu over the listed decades."""
    ext = record.decade_extremes
    sel = np.isin(ext[:, 0].astype(int), list(decades))
    if not sel.any():
        raise EstimatorError(f"no decade extremes recorded for decades {list(decades)}")
    return float(ext[sel, 1].max()), float(ext[sel, 2].min())


def last_complete_decade(record):
    n_steps = int(record.meta.get("n_steps", record.n[-1]))
    return int(math.floor(math.log10(n_steps + 1))) - 1


def new_record_in_final_decade(record, margin=RECORD_MARGIN):
    d = last_complete_decade(record)
    for row in oscillation_records(record, margin):
        if row.decade == d:
            return row.new_max or row.new_min
    raise EstimatorError(f"decade {d} not recorded")


# --- martingale diagnostic ---------------------------------------------------

class ExpectationTable:
    """Conditional moments of ln|bracket| tabulated on a grid of ln|x|.

    Stores E[lam | x] and Var[lam | x] divided by s(x) = h (|f(x)| + g(x)^2),
    which tend to constants in the power-law regime, and interpolates them
    linearly.  Outside the grid the normalised values are held flat: above it
    f and g are both clamped, below it the power laws have converged.
    """

    def __init__(self, model, noise, log_lo=math.log(1e-9), step=2e-3, n_nodes=64):
        self.model = model
        self.noise = noise
        tops = [math.log(t) for t in (model.f_threshold, model.g_threshold) if math.isfinite(t)]
        log_hi = max(tops + [0.0]) + 0.5
        self.grid = np.arange(log_lo, log_hi + step, step)
        self.step = step
        fg = [coefficients(u, model.a_f, model.mu_f, model.a_g, model.mu_g, model.cap)
              for u in self.grid]
        f = np.array([p[0] for p in fg])
        g = np.array([p[1] for p in fg])
        mean, var = conditional_log_moments(f, g, model.h, noise, n_nodes)
        scale = model.h * (np.abs(f) + g * g)
        with np.errstate(invalid="ignore", divide="ignore"):
            self.mean_norm = np.where(scale > 0, mean / scale, 0.0)
            self.var_norm = np.where(scale > 0, var / scale, 0.0)

    def lookup(self, log_abs_x):
        """(E[lam], Var[lam]) at the given ln|x| values."""
        u = np.atleast_1d(np.asarray(log_abs_x, dtype=float))
        out = [_table_moments(v, self.model.h, self.model.a_f, self.model.mu_f, self.model.a_g,
                              self.model.mu_g, self.model.cap, self.grid[0], self.step,
                              self.mean_norm, self.var_norm) for v in u]
        return np.array([o[0] for o in out]), np.array([o[1] for o in out])


@numba.njit(cache=True, nogil=True)
def _table_moments(logx, h, a_f, mu_f, a_g, mu_g, cap, u0, du, mean_norm, var_norm):
    f, g = coefficients(logx, a_f, mu_f, a_g, mu_g, cap)
    if g == 0.0:
        return math.log(abs(1.0 + h * f)), 0.0
    s = h * (abs(f) + g * g)
    pos = (logx - u0) / du
    last = mean_norm.shape[0] - 1
    if pos <= 0.0:
        return mean_norm[0] * s, var_norm[0] * s
    if pos >= last:
        return mean_norm[last] * s, var_norm[last] * s
    i = int(pos)
    t = pos - i
    mn = mean_norm[i] + t * (mean_norm[i + 1] - mean_norm[i])
    vn = var_norm[i] + t * (var_norm[i + 1] - var_norm[i])
    return mn * s, vn * s


@numba.njit(cache=True, nogil=True)
def _martingale_advance(xi, fstate, istate, params, grid0, du, mean_norm, var_norm,
                        dec_sqrt_max, dec_sum_d, dec_qv):
    # fstate: logx, sum_d, qv, acc_g2, sum_xi ; istate: n, sign, dec_idx, dec_next, below_grid
    h, sqrt_h, a_f, mu_f, a_g, mu_g, cap = (params[0], params[1], params[2], params[3],
                                            params[4], params[5], params[6])
    logx, sum_d, qv, acc_g2, sum_xi = fstate[0], fstate[1], fstate[2], fstate[3], fstate[4]
    n, sign, dec_idx, dec_next, below = istate[0], istate[1], istate[2], istate[3], istate[4]
    for k in range(xi.shape[0]):
        if sign != 0:
            f, g = coefficients(logx, a_f, mu_f, a_g, mu_g, cap)
            if logx < grid0:
                below += 1
            phi, var = _table_moments(logx, h, a_f, mu_f, a_g, mu_g, cap, grid0, du,
                                      mean_norm, var_norm)
            acc_g2 += g * g
            b = 1.0 + h * f + sqrt_h * g * xi[k]
            if b == 0.0:
                sign = 0
                logx = -np.inf
            else:
                lam = math.log(abs(b))
                sum_d += lam - phi
                qv += var
                logx += lam
                if b < 0.0:
                    sign = -sign
        sum_xi += xi[k]
        n += 1
        while n >= dec_next:
            dec_idx += 1
            dec_next *= 10
        r = abs(sum_xi) / math.sqrt(n)
        if r > dec_sqrt_max[dec_idx]:
            dec_sqrt_max[dec_idx] = r
        dec_sum_d[dec_idx] = sum_d
        dec_qv[dec_idx] = qv
    fstate[0], fstate[1], fstate[2], fstate[3], fstate[4] = logx, sum_d, qv, acc_g2, sum_xi
    istate[0], istate[1], istate[2], istate[3], istate[4] = n, sign, dec_idx, dec_next, below


@dataclass
class MartingaleDiag:
    """Replay statistics of d_{i+1} = ln|B_i| - E[ln|B_i| | x_i].

    ``m_over_sqrt_n[d]`` is the largest |sum xi| / sqrt(n) seen in decade d.
    """

    qv: float
    sum_d: float
    m_over_qv: float
    m_over_sqrt_n: np.ndarray
    acc_g2: float
    qv_over_h_acc_g2: float
    log_abs_x: float
    qv_by_decade: np.ndarray = field(default=None)
    sum_d_by_decade: np.ndarray = field(default=None)
    steps_below_grid: int = 0


def log_martingale_diag(model, source, stream, n_steps, table=None):
    """Replay one path and accumulate the log-martingale and its quadratic variation."""
    if table is None:
        table = ExpectationTable(model, source.spec)
    n_dec = int(math.floor(math.log10(n_steps))) + 2
    dec_sqrt_max = np.zeros(n_dec)
    dec_sum_d = np.full(n_dec, np.nan)
    dec_qv = np.full(n_dec, np.nan)
    x0 = model.x0
    fstate = np.array([math.log(abs(x0)) if x0 else -np.inf, 0.0, 0.0, 0.0, 0.0])
    istate = np.array([0, 0 if x0 == 0 else (1 if x0 > 0 else -1), 0, 10, 0], dtype=np.int64)
    params = np.array([model.h, math.sqrt(model.h), model.a_f, model.mu_f, model.a_g,
                       model.mu_g, model.cap])
    chunk = 1 << 18
    for start in range(0, n_steps, chunk):
        xi = source.block(stream, start, min(chunk, n_steps - start))
        _martingale_advance(xi, fstate, istate, params, table.grid[0], table.step,
                            table.mean_norm, table.var_norm, dec_sqrt_max, dec_sum_d, dec_qv)
    logx, sum_d, qv, acc_g2, _ = fstate
    h_acc = model.h * acc_g2
    return MartingaleDiag(
        qv=float(qv), sum_d=float(sum_d),
        m_over_qv=float(sum_d / qv) if qv > 0 else math.nan,
        m_over_sqrt_n=dec_sqrt_max, acc_g2=float(acc_g2),
        qv_over_h_acc_g2=float(qv / h_acc) if h_acc > 0 else math.nan,
        log_abs_x=float(logx), qv_by_decade=dec_qv, sum_d_by_decade=dec_sum_d,
        steps_below_grid=int(istate[4]))


# --- sequence utilities ------------------------------------------------------

def toeplitz_average(a, kappa):
    """sum a_i kappa_i / sum a_i."""
    a = np.asarray(a, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    if np.any(a < 0):
        raise EstimatorError("weights a_i must be nonnegative")
    den = math.fsum(a)
    if den == 0:
        raise EstimatorError("weights sum to zero")
    # normalise first so tiny weights times tiny values cannot underflow
    return math.fsum((a / den) * kappa)


def gamma_limit_check(y, gamma):
    """y_n / n^(1/(1+gamma)) at the terminal index n = len(y) - 1."""
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0) or np.any(np.diff(y) <= 0):
        raise EstimatorError("y must be positive and strictly increasing")
    n = len(y) - 1
    return float(y[-1] / n ** (1.0 / (1.0 + gamma)))


def gamma_limit_value(c, gamma):
    return (c * (1.0 + gamma)) ** (1.0 / (1.0 + gamma))


class LnInvertResult(NamedTuple):
    ratio_b: float
    slope: float
    applicable: bool


def ln_invert_check(x, lam, stability_band=(0.5, 2.0)):
    """For x_1..x_N: b = -ln x_N / sum x_i^lam and the slope ln x_N / ln N.

    The log-inversion only applies while b settles at a positive limit; b is
    compared at N and N // 10, and a ratio outside ``stability_band`` marks the
    sequence as outside the polynomial regime.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise EstimatorError("x must be positive")
    n = len(x)
    csum = np.cumsum(x ** lam)

    def b_at(k):
        return -math.log(x[k - 1]) / csum[k - 1]

    b = b_at(n)
    slope = math.log(x[-1]) / math.log(n)
    k = max(n // 10, 2)
    b_prev = b_at(k)
    ok = b > 0 and b_prev > 0 and stability_band[0] <= b / b_prev <= stability_band[1]
    return LnInvertResult(float(b), float(slope), bool(ok))
