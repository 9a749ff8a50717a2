"""Clamped power-law nonlinearities and the regime classifier.

The recursion is ``x_{n+1} = x_n (1 + h f(x_n) + sqrt(h) g(x_n) xi_{n+1})`` with

    f(u) = -a_f |u|^mu_f,      g(u) = sqrt(a_g) |u|^(mu_g / 2),

both clamped in magnitude at ``cap``.  ``a_f > 0`` is a stabilising drift.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize

from .errors import ConfigurationError

CASES = ("case_i", "case_ii", "case_iii", "unstable", "out_of_theory")


@dataclass(frozen=True)
class ModelSpec:
    h: float = 0.01
    x0: float = 0.5
    a_f: float = 1.0
    mu_f: float = 1.0
    a_g: float = 1.0
    mu_g: float = 2.0
    cap: float = 1.0

    def __post_init__(self):
        for name in ("h", "x0", "a_f", "mu_f", "a_g", "mu_g", "cap"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ConfigurationError(f"model.{name} must be finite, got {v}")
            object.__setattr__(self, name, v)
        if self.h <= 0:
            raise ConfigurationError("model.h must be positive")
        if self.mu_f <= 0:
            raise ConfigurationError("model.mu_f must be positive")
        if self.mu_g <= 0:
            raise ConfigurationError("model.mu_g must be positive")
        if self.a_g < 0:
            raise ConfigurationError("model.a_g must be nonnegative (it scales g^2)")
        if not 0 < self.cap <= 1:
            raise ConfigurationError("model.cap must lie in (0, 1]")

    @property
    def f_threshold(self):
        """|u| beyond which f is clamped (inf when f vanishes)."""
        if self.a_f == 0:
            return math.inf
        return _root(self.cap / abs(self.a_f), self.mu_f)

    @property
    def g_threshold(self):
        if self.a_g == 0:
            return math.inf
        return _root(self.cap * self.cap / self.a_g, self.mu_g)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def _root(v, mu):
    """v^(1/mu), saturating at inf instead of overflowing."""
    e = math.log(v) / mu
    return math.exp(e) if e < 700 else math.inf


def eval_f(model, u):
    if model.a_f == 0 or u == 0:
        return 0.0
    v = model.a_f * abs(u) ** model.mu_f
    return -min(v, model.cap) if v > 0 else min(-v, model.cap)


def eval_g(model, u):
    if model.a_g == 0 or u == 0:
        return 0.0
    return min(math.sqrt(model.a_g) * abs(u) ** (0.5 * model.mu_g), model.cap)


@dataclass
class RegimeReport:
    beta: float
    L: float
    case_tag: str
    lam: Optional[float]
    exact_constant: Optional[float]
    oscillatory: bool
    comparison_limit: Optional[float] = None
    comparison_sum: Optional[str] = None
    stability_guaranteed: bool = False
    citations: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def to_dict(self):
        d = asdict(self)
        for k in ("beta", "L"):
            if math.isinf(d[k]):
                d[k] = "inf" if d[k] > 0 else "-inf"
        return d


def _ratio_sup(model):
    """sup_u 2 f(u) / g^2(u) over the clamped family.

    On each piece between the clamp breakpoints the ratio is a pure power of u,
    so the supremum sits at u -> 0, u -> inf, or a breakpoint.
    """
    if model.a_g == 0:
        # g vanishes identically; the condition holds iff f < 0 off the origin
        return -math.inf if model.a_f > 0 else math.inf
    if model.a_f == 0:
        return 0.0

    def ratio(u):
        return 2.0 * eval_f(model, u) / eval_g(model, u) ** 2

    if model.mu_f > model.mu_g:
        at_zero = 0.0
    elif model.mu_f == model.mu_g:
        at_zero = -2.0 * model.a_f / model.a_g
    else:
        at_zero = -math.inf if model.a_f > 0 else math.inf
    at_inf = -2.0 * math.copysign(1.0, model.a_f) / model.cap
    candidates = [at_zero, at_inf]
    for u in (model.f_threshold, model.g_threshold):
        if math.isfinite(u):
            candidates.append(ratio(u))
    return max(candidates)


def _limit_L(model):
    if model.a_g == 0 or model.mu_f < model.mu_g:
        return -math.inf if model.a_f > 0 else (math.inf if model.a_f < 0 else 0.0)
    if model.a_f == 0 or model.mu_f > model.mu_g:
        return 0.0
    return -model.a_f / model.a_g


def classify_regime(model):
    """Regime of the clamped power-law model near the origin."""
    if model.a_g == 0 and model.a_f <= 0:
        raise ConfigurationError(
            "model has a_g = 0 and a_f <= 0: no noise and no stabilising drift, "
            "neither the stability nor the decay-rate results apply")
    h = model.h
    beta = _ratio_sup(model)
    L = _limit_L(model)
    a_f, a_g, mu_f, mu_g = model.a_f, model.a_g, model.mu_f, model.mu_g
    notes = []
    citations = []

    if model.a_g == 0 or (a_f > 0 and mu_f < mu_g):
        tag = "case_iii"
    elif a_f == 0:
        tag = "case_i"
        notes.append("f vanishes identically; treated as the mu_f > mu_g limit (noise-dominated)")
    elif mu_f == mu_g and -2.0 * a_f < a_g:
        tag = "case_ii"
    elif mu_f > mu_g:
        tag = "case_i"
        if a_f < 0:
            notes.append("destabilising drift dominated by noise: tagged case_i, "
                         "hypotheses of the oscillation theorem not obviously satisfied")
    elif a_f < 0 and (mu_f < mu_g or -2.0 * a_f > a_g):
        tag = "unstable"
    else:
        tag = "out_of_theory"

    lam = None
    if L == -math.inf:
        lam = mu_f
    elif math.isfinite(L) and L < 0.5:
        lam = mu_g

    exact_constant = None
    comparison_limit = None
    comparison_sum = None
    if tag == "case_iii":
        exact_constant = (1.0 / (h * a_f * mu_f)) ** (1.0 / mu_f)
    if L == -math.inf:
        comparison_limit, comparison_sum = -h, "abs_f"
    elif math.isfinite(L):
        comparison_limit, comparison_sum = h * (L - 0.5), "g2"

    stable = beta < 1.0
    if stable:
        citations.append("Theorem 4.1 (stability): sup 2f/g^2 = beta < 1, x_n -> 0 a.s. for small h")
    if tag == "unstable":
        citations.append("Theorem 4.2 (instability): f > 0 and liminf 2|f|/g^2 > 1, x_n does not tend to 0")
    if comparison_sum == "g2":
        citations.append(f"Theorem 5.4(a): ln|x_n| / sum g^2(x_i) -> h(L - 1/2) = {comparison_limit:g}")
    elif comparison_sum == "abs_f" and tag == "case_iii":
        citations.append(f"Theorem 5.4(b): ln|x_n| / sum |f(x_i)| -> -h = {comparison_limit:g}")
    if lam is not None and tag != "unstable":
        citations.append(f"Corollary 5.5: ln|x_n| / ln n -> -1/lambda = {-1.0 / lam:g}")
    if tag == "case_iii":
        citations.append(f"Theorem 6.2 (exact rate): |x_n| n^(1/mu_f) -> {exact_constant:g}")
    elif tag in ("case_i", "case_ii"):
        citations.append("Theorem 6.4 (oscillation): limsup |x_n| n^(1/mu_g) = inf, liminf = 0")

    return RegimeReport(
        beta=beta, L=L, case_tag=tag, lam=lam, exact_constant=exact_constant,
        oscillatory=tag in ("case_i", "case_ii"), comparison_limit=comparison_limit,
        comparison_sum=comparison_sum, stability_guaranteed=stable,
        citations=citations, notes=notes)


def _check_monotone(a_profile, n_probe=257):
    u = np.logspace(-12, 0, n_probe)
    vals = np.array([a_profile(float(v)) for v in u])
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
        raise ConfigurationError("a_profile must be finite and positive on (0, 1]")
    if np.any(np.diff(vals) < 0):
        raise ConfigurationError("a_profile is not monotone increasing on (0, 1]")


def general_rate_integral(a_profile, z):
    """A(z) = int_z^1 du / (u a(u)), integrated in t = ln u."""
    if z >= 1.0:
        return 0.0
    t0 = math.log(z)
    val, _ = integrate.quad(lambda t: 1.0 / a_profile(math.exp(t)), t0, 0.0,
                            epsabs=0.0, epsrel=1e-13, limit=500)
    return val


def predict_general_rate(a_profile: Callable[[float], float], n: float) -> float:
    """Solve A(z) = n for z, i.e. the decay profile A^{-1}(n).

    A is strictly decreasing in z, so the root is bracketed in ln z and found by
    bisection-safe Brent iteration to about 1e-13 in ln z.
    """
    _check_monotone(a_profile)
    if n <= 0:
        return 1.0
    lo = -1.0
    while general_rate_integral(a_profile, math.exp(lo)) < n:
        lo *= 2.0
        if lo < -700:
            raise ConfigurationError("A(z) stays below n for all representable z")
    t = optimize.brentq(lambda t: general_rate_integral(a_profile, math.exp(t)) - n,
                        lo, 0.0, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    return math.exp(t)
