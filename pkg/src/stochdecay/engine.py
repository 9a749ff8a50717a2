"""Path simulation in (sign, ln|x|) form.

A decaying path over 1e7 steps leaves the range of direct floating point
products, so the state is carried as ``ln|x_n|`` and each step adds
``ln|1 + h f(x_n) + sqrt(h) g(x_n) xi_{n+1}|``.  The inner loop is a numba
kernel; ``step`` runs the same compiled coefficient code, so a replay through
``step`` reproduces kernel accumulators exactly.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numba
import numpy as np

from .errors import SimulationError
from .model import classify_regime

CHECKPOINT_COLUMNS = ("n", "sign", "log_abs_x", "acc_g2", "acc_absf", "acc_xlam")
DEFAULT_PER_DECADE = 32
DEFAULT_CEILING = 700.0
_CHUNK = 1 << 18


@numba.njit(cache=True, nogil=True)
def coefficients(log_abs_x, a_f, mu_f, a_g, mu_g, cap):
    """(f(x), g(x)) for |x| = exp(log_abs_x), powers taken in log space."""
    f = 0.0
    g = 0.0
    if a_f != 0.0 and log_abs_x != -np.inf:
        v = a_f * math.exp(mu_f * log_abs_x)
        if v > cap:
            v = cap
        elif v < -cap:
            v = -cap
        f = -v
    if a_g != 0.0 and log_abs_x != -np.inf:
        g = math.sqrt(a_g) * math.exp(0.5 * mu_g * log_abs_x)
        if g > cap:
            g = cap
    return f, g


@numba.njit(cache=True, nogil=True)
def _advance(xi, fstate, istate, params, ckpt_n, ckpt_out, dec_max, dec_min):
    # fstate: log_abs_x, acc_g2, acc_absf, acc_xlam
    # istate: n, sign, ckpt_pos, dec_idx, dec_next, absorbed_at, ceiling_at, nan_at
    h, sqrt_h, a_f, mu_f, a_g, mu_g, cap, lam, inv_mu, ceiling = (
        params[0], params[1], params[2], params[3], params[4],
        params[5], params[6], params[7], params[8], params[9])
    logx, acc_g2, acc_absf, acc_xlam = fstate[0], fstate[1], fstate[2], fstate[3]
    n, sign, ckpt_pos, dec_idx, dec_next = istate[0], istate[1], istate[2], istate[3], istate[4]
    absorbed_at, ceiling_at, nan_at = istate[5], istate[6], istate[7]
    n_ckpt = ckpt_n.shape[0]
    for k in range(xi.shape[0]):
        if sign != 0:
            f, g = coefficients(logx, a_f, mu_f, a_g, mu_g, cap)
            acc_g2 += g * g
            acc_absf += abs(f)
            acc_xlam += math.exp(lam * logx)
            b = 1.0 + h * f + sqrt_h * g * xi[k]
            if b == 0.0:
                sign = 0
                logx = -np.inf
                absorbed_at = n + 1
            else:
                logx += math.log(abs(b))
                if b < 0.0:
                    sign = -sign
            if logx != logx:
                nan_at = n + 1
                n += 1
                break
            if logx > ceiling and ceiling_at < 0:
                ceiling_at = n + 1
        n += 1
        while n >= dec_next:
            dec_idx += 1
            dec_next *= 10
        stat = logx + inv_mu * math.log(n)
        if stat > dec_max[dec_idx]:
            dec_max[dec_idx] = stat
        if stat < dec_min[dec_idx]:
            dec_min[dec_idx] = stat
        if ckpt_pos < n_ckpt and ckpt_n[ckpt_pos] == n:
            ckpt_out[ckpt_pos, 0] = n
            ckpt_out[ckpt_pos, 1] = sign
            ckpt_out[ckpt_pos, 2] = logx
            ckpt_out[ckpt_pos, 3] = acc_g2
            ckpt_out[ckpt_pos, 4] = acc_absf
            ckpt_out[ckpt_pos, 5] = acc_xlam
            ckpt_pos += 1
    fstate[0], fstate[1], fstate[2], fstate[3] = logx, acc_g2, acc_absf, acc_xlam
    istate[0], istate[1], istate[2], istate[3], istate[4] = n, sign, ckpt_pos, dec_idx, dec_next
    istate[5], istate[6], istate[7] = absorbed_at, ceiling_at, nan_at


@dataclass(frozen=True)
class PathState:
    n: int = 0
    sign: int = 1
    log_abs_x: float = 0.0
    acc_g2: float = 0.0
    acc_absf: float = 0.0
    acc_xlam: float = 0.0

    @classmethod
    def initial(cls, x0):
        if x0 == 0:
            return cls(0, 0, -math.inf)
        return cls(0, 1 if x0 > 0 else -1, math.log(abs(x0)))

    @property
    def absorbed(self):
        return self.sign == 0

    @property
    def x(self):
        return self.sign * math.exp(self.log_abs_x) if self.sign else 0.0


def step(state, model, xi, lam=1.0):
    """One step of the recursion; accumulators take the pre-step x."""
    if state.absorbed:
        return replace(state, n=state.n + 1)
    f, g = coefficients(state.log_abs_x, model.a_f, model.mu_f, model.a_g, model.mu_g, model.cap)
    b = 1.0 + model.h * f + math.sqrt(model.h) * g * xi
    acc = dict(acc_g2=state.acc_g2 + g * g, acc_absf=state.acc_absf + abs(f),
               acc_xlam=state.acc_xlam + math.exp(lam * state.log_abs_x))
    if b == 0.0:
        return PathState(state.n + 1, 0, -math.inf, **acc)
    sign = -state.sign if b < 0 else state.sign
    return PathState(state.n + 1, sign, state.log_abs_x + math.log(abs(b)), **acc)


def geometric_checkpoints(n_steps, per_decade=DEFAULT_PER_DECADE):
    top = math.log10(max(n_steps, 1))
    k = np.arange(0, int(math.ceil(top * per_decade)) + 1)
    ns = np.unique(np.round(10.0 ** (k / per_decade)).astype(np.int64))
    ns = ns[ns <= n_steps]
    return np.unique(np.concatenate([[0], ns, [n_steps]])).astype(np.int64)


@dataclass
class PathRecord:
    """Thinned trajectory plus per-decade extremes of ln|x_n| + ln(n)/mu.

    ``checkpoints`` has one row per checkpoint with ``CHECKPOINT_COLUMNS``;
    ``decade_extremes`` has rows ``(decade, max_stat, min_stat)`` where decade
    ``d`` covers ``10^d <= n < 10^(d+1)``.
    """

    checkpoints: np.ndarray
    decade_extremes: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.checkpoints[:, 0].astype(np.int64)

    @property
    def sign(self):
        return self.checkpoints[:, 1]

    @property
    def log_abs_x(self):
        return self.checkpoints[:, 2]

    @property
    def acc_g2(self):
        return self.checkpoints[:, 3]

    @property
    def acc_absf(self):
        return self.checkpoints[:, 4]

    @property
    def acc_xlam(self):
        return self.checkpoints[:, 5]

    @property
    def terminal(self):
        return dict(zip(CHECKPOINT_COLUMNS, self.checkpoints[-1]))

    @property
    def absorbed_at(self):
        return self.meta.get("absorbed_at")

    @classmethod
    def from_sequence(cls, log_abs_x, mu=1.0, ns=None, acc_g2=None, acc_absf=None,
                      acc_xlam=None, sign=None, meta=None):
        """Build a record from an explicit sequence (every entry a checkpoint).

        Decade extremes are computed from the same entries, which for a synthetic
        sequence given at every n equals the online per-step tracking.
        """
        log_abs_x = np.asarray(log_abs_x, dtype=float)
        ns = np.arange(len(log_abs_x)) if ns is None else np.asarray(ns)
        zeros = np.zeros_like(log_abs_x)
        cols = [ns.astype(float), np.ones_like(log_abs_x) if sign is None else np.asarray(sign, float),
                log_abs_x,
                zeros if acc_g2 is None else np.asarray(acc_g2, float),
                zeros if acc_absf is None else np.asarray(acc_absf, float),
                zeros if acc_xlam is None else np.asarray(acc_xlam, float)]
        ckpt = np.column_stack(cols)
        pos = ns >= 1
        stat = log_abs_x[pos] + np.log(ns[pos]) / mu
        dec = np.floor(np.log10(ns[pos]) + 1e-12).astype(int)
        rows = [(d, stat[dec == d].max(), stat[dec == d].min()) for d in np.unique(dec)]
        m = {"mu": mu, "absorbed_at": None}
        m.update(meta or {})
        return cls(ckpt, np.array(rows, dtype=float).reshape(-1, 3), m)


def simulate_path(model, source, stream, n_steps, lam=None, mu=None,
                  per_decade=DEFAULT_PER_DECADE, ceiling=DEFAULT_CEILING):
    """Iterate the recursion for ``n_steps`` using noise stream ``stream``.

    ``lam`` (exponent of the |x|^lam accumulator) and ``mu`` (normalisation of
    the decade extremes) default to the classifier's prediction, else 1.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if lam is None or mu is None:
        try:
            report = classify_regime(model)
        except Exception:
            report = None
        default = report.lam if report is not None and report.lam is not None else 1.0
        lam = default if lam is None else lam
        mu = default if mu is None else mu

    ckpt_n = geometric_checkpoints(n_steps, per_decade)
    ckpt_out = np.full((len(ckpt_n), 6), np.nan)
    init = PathState.initial(model.x0)
    ckpt_out[0] = (0, init.sign, init.log_abs_x, 0.0, 0.0, 0.0)
    n_dec = int(math.floor(math.log10(n_steps))) + 2
    dec_max = np.full(n_dec, -np.inf)
    dec_min = np.full(n_dec, np.inf)
    fstate = np.array([init.log_abs_x, 0.0, 0.0, 0.0])
    istate = np.array([0, init.sign, 1, 0, 10, -1, -1, -1], dtype=np.int64)
    if init.sign == 0:
        istate[5] = 0
    params = np.array([model.h, math.sqrt(model.h), model.a_f, model.mu_f, model.a_g,
                       model.mu_g, model.cap, float(lam), 1.0 / float(mu), float(ceiling)])
    for start in range(0, n_steps, _CHUNK):
        xi = source.block(stream, start, min(_CHUNK, n_steps - start))
        _advance(xi, fstate, istate, params, ckpt_n, ckpt_out, dec_max, dec_min)
        if istate[7] >= 0:
            raise SimulationError(
                f"stream {stream}: NaN state at step {istate[7]}", stream=stream, step=int(istate[7]))

    decs = np.flatnonzero(dec_min <= dec_max)
    extremes = np.column_stack([decs.astype(float), dec_max[decs], dec_min[decs]])
    meta = {
        "model": model.to_dict(), "noise": source.spec.to_dict(), "seed": source.master_seed,
        "stream": int(stream), "n_steps": int(n_steps), "lam": float(lam), "mu": float(mu),
        "absorbed_at": int(istate[5]) if istate[5] >= 0 else None,
        "ceiling_at": int(istate[6]) if istate[6] >= 0 else None,
    }
    return PathRecord(ckpt_out, extremes, meta)


@dataclass
class EnsembleSummary:
    """Terminal statistics keyed by stream; merging is a disjoint union."""

    terminals: dict = field(default_factory=dict)

    @classmethod
    def from_records(cls, records):
        return cls({r.meta["stream"]: r.terminal for r in records})

    def merge(self, other):
        overlap = set(self.terminals) & set(other.terminals)
        for s in overlap:
            if self.terminals[s] != other.terminals[s]:
                raise ValueError(f"conflicting terminal statistics for stream {s}")
        merged = dict(self.terminals)
        merged.update(other.terminals)
        return EnsembleSummary(dict(sorted(merged.items())))

    @property
    def streams(self):
        return sorted(self.terminals)

    @property
    def n_paths(self):
        return len(self.terminals)

    def column(self, name):
        return np.array([self.terminals[s][name] for s in self.streams])

    def fraction_below(self, threshold):
        lx = self.column("log_abs_x")
        return float(np.mean(lx < math.log(threshold)))

    def stats(self, threshold=0.05):
        lx = self.column("log_abs_x")
        q = np.quantile(lx, [0.05, 0.25, 0.5, 0.75, 0.95])
        return {
            "n_paths": self.n_paths,
            "mean_log_abs_x": float(np.mean(lx)),
            "median_log_abs_x": float(q[2]),
            "q05_log_abs_x": float(q[0]), "q25_log_abs_x": float(q[1]),
            "q75_log_abs_x": float(q[3]), "q95_log_abs_x": float(q[4]),
            "fraction_below_threshold": self.fraction_below(threshold),
            "threshold": threshold,
            "n_absorbed": int(np.sum(self.column("sign") == 0)),
        }

    def __eq__(self, other):
        if not isinstance(other, EnsembleSummary) or self.streams != other.streams:
            return False
        return all(np.array_equal(np.array(list(self.terminals[s].values())),
                                  np.array(list(other.terminals[s].values())), equal_nan=True)
                   for s in self.streams)


def run_ensemble(model, source, n_paths, n_steps, lam=None, mu=None, threads=1,
                 streams=None, **kwargs):
    """Simulate paths on streams ``0 .. n_paths-1`` (or ``streams``).

    Records come back sorted by stream whatever the thread count.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    streams = list(range(n_paths)) if streams is None else sorted(streams)

    def one(s):
        return simulate_path(model, source, s, n_steps, lam=lam, mu=mu, **kwargs)

    if threads <= 1:
        records = [one(s) for s in streams]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(one, streams))
    records.sort(key=lambda r: r.meta["stream"])
    return records, EnsembleSummary.from_records(records)
