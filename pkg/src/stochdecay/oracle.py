"""Expectations E[phi(1 + f h + g sqrt(h) xi)] by quadrature, and the
second-order expansion they are checked against.

Smooth integrands use a Gauss rule matched to the noise law (Hermite for the
normal, Legendre for the uniform, the exact two-point rule for Rademacher) with
a node-doubling check.  When the bracket ``1 + f h + g sqrt(h) xi`` can vanish
with non-negligible probability, the integral is split at the zero
``xi* = -(1 + f h) / (g sqrt(h))`` and done adaptively; for ``|y|^-alpha`` the
pieces next to ``xi*`` use ``xi = xi* +- t^(1/(1-alpha))``, which turns the
integrable pole into a bounded integrand.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .errors import ConfigurationError, QuadratureAccuracyError
from .noise import NoiseSpec

PHI_KINDS = ("power_alpha", "inv_power_alpha", "log_abs", "log_abs_squared", "square")

QUAD_RTOL = 1e-10
DEFAULT_NODES = 64
# bracket zeros whose tail mass is below this are invisible to the Gauss rule
_TAIL_NEGLIGIBLE = 1e-17
# |y|^-alpha is integrable for alpha < 1; quadrature is only trusted up to here
INV_ALPHA_MAX = 0.9


@dataclass(frozen=True)
class PhiSpec:
    kind: str
    alpha: float = None

    def __post_init__(self):
        if self.kind not in PHI_KINDS:
            raise ConfigurationError(f"phi.kind must be one of {PHI_KINDS}, got {self.kind!r}")
        if self.kind == "power_alpha":
            if self.alpha is None or not self.alpha > 0:
                raise ConfigurationError("phi.alpha: power_alpha needs alpha > 0")
        elif self.kind == "inv_power_alpha":
            if self.alpha is None or not 0 < self.alpha <= INV_ALPHA_MAX:
                raise ConfigurationError(
                    f"phi.alpha: inv_power_alpha needs 0 < alpha <= {INV_ALPHA_MAX} "
                    "(|y|^-alpha must stay comfortably integrable at 0)")
        if self.alpha is not None:
            object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def derivatives(self):
        """(phi(1), phi'(1), phi''(1))."""
        a = self.alpha
        return {
            "power_alpha": lambda: (1.0, a, a * (a - 1.0)),
            "inv_power_alpha": lambda: (1.0, -a, a * (a + 1.0)),
            "log_abs": lambda: (0.0, 1.0, -1.0),
            "log_abs_squared": lambda: (0.0, 0.0, 2.0),
            "square": lambda: (1.0, 2.0, 2.0),
        }[self.kind]()

    @property
    def smooth(self):
        """True when phi is C-infinity across y = 0."""
        if self.kind == "square":
            return True
        if self.kind == "power_alpha":
            return float(self.alpha).is_integer() and int(self.alpha) % 2 == 0
        return False

    def of_increment(self, v):
        """phi(1 + v), accurate for small v."""
        v = np.asarray(v, dtype=float)
        if self.kind == "square":
            return (1.0 + v) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            lg = np.where(v > -1.0, np.log1p(np.maximum(v, -1.0)), np.log(np.abs(1.0 + v)))
        if self.kind == "log_abs":
            return lg
        if self.kind == "log_abs_squared":
            return lg * lg
        if self.kind == "power_alpha":
            return np.exp(self.alpha * lg)
        return np.exp(-self.alpha * lg)

    def to_dict(self):
        return asdict(self)


@dataclass
class ItoReport:
    phi: PhiSpec
    f: float
    g: float
    h: float
    lhs: float
    rhs: float
    err: float
    norm_err: float

    def row(self):
        return [self.phi.kind, "" if self.phi.alpha is None else self.phi.alpha,
                self.f, self.g, self.h, self.lhs, self.rhs, self.err, self.norm_err]


ITO_COLUMNS = ("phi_kind", "alpha", "f", "g", "h", "lhs", "rhs", "err", "norm_err")


@lru_cache(maxsize=32)
def gauss_rule(kind, n):
    """Nodes and probability weights of an n-point rule for the noise law."""
    if kind == "standard_normal":
        x, w = np.polynomial.hermite_e.hermegauss(n)
        return x, w / math.sqrt(2.0 * math.pi)
    if kind == "uniform_symmetric":
        x, w = np.polynomial.legendre.leggauss(n)
        return math.sqrt(3.0) * x, w / 2.0
    if kind == "rademacher":
        return np.array([-1.0, 1.0]), np.array([0.5, 0.5])
    raise ConfigurationError(f"no Gauss rule for {kind} noise")


def _tail_mass(noise, xi_star):
    """Probability mass on the far side of the bracket zero."""
    if noise.kind == "standard_normal":
        return float(special.ndtr(-abs(xi_star)))
    if noise.kind == "uniform_symmetric":
        b = math.sqrt(3.0)
        return max(0.0, (b - abs(xi_star)) / (2 * b))
    if noise.kind == "student_t":
        return float(special.stdtr(noise.nu, -abs(xi_star) / math.sqrt((noise.nu - 2) / noise.nu)))
    return 0.0


def _needs_split(phi, noise, xi_star):
    if noise.kind == "rademacher" or phi.smooth:
        return False
    if phi.kind == "inv_power_alpha" or noise.kind == "student_t":
        return True
    return _tail_mass(noise, xi_star) > _TAIL_NEGLIGIBLE


def _gauss_expect(phi, m, c, noise, n_nodes):
    def at(n):
        x, w = gauss_rule(noise.kind, n)
        vals = phi.of_increment(m + c * x)
        return float(vals @ w), float(np.abs(vals) @ w)

    if noise.kind == "rademacher":
        return at(2)[0]
    coarse, _ = at(n_nodes)
    fine, scale = at(2 * n_nodes)
    if abs(fine - coarse) > QUAD_RTOL * abs(fine) + 64 * np.finfo(float).eps * scale:
        raise QuadratureAccuracyError(
            f"node doubling {n_nodes}->{2 * n_nodes} changed E[{phi.kind}] from {coarse!r} to {fine!r}",
            coarse=coarse, fine=fine)
    return fine


def _breakpoints(noise, xi_star, delta):
    lo, hi = noise.support
    if noise.kind == "student_t":
        anchors = [-1e3, -50.0, -10.0, -3.0, 0.0, 3.0, 10.0, 50.0, 1e3]
    elif noise.kind == "standard_normal":
        anchors = [-40.0, -10.0, -3.0, 0.0, 3.0, 10.0, 40.0]
    else:
        anchors = [0.0]
    pts = {lo, hi}
    pts.update(a for a in anchors if lo < a < hi)
    if lo < xi_star < hi:
        pts.update(p for p in (xi_star - delta, xi_star, xi_star + delta) if lo < p < hi)
    return sorted(pts)


def _split_expect(phi, m, c, noise):
    pdf = noise.pdf
    xi_star = -(1.0 + m) / c
    delta = 1.0
    pts = _breakpoints(noise, xi_star, delta)
    opts = dict(epsabs=0.0, epsrel=1e-12, limit=400)
    total = 0.0
    err = 0.0
    abs_scale = 0.0

    def plain(a, b):
        fn = lambda xi: float(phi.of_increment(m + c * xi) * pdf(xi))
        # quad's error estimate is checked below, its warning adds nothing
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            return integrate.quad(fn, a, b, **opts)

    for a, b in zip(pts[:-1], pts[1:]):
        touches = (a == xi_star) or (b == xi_star)
        if touches and phi.kind == "inv_power_alpha":
            # 1 + m + c xi = c (xi - xi*); substitute xi - xi* = +-t^(1/(1-alpha))
            alpha = phi.alpha
            p = 1.0 / (1.0 - alpha)
            side = 1.0 if a == xi_star else -1.0
            width = b - a
            coef = abs(c) ** (-alpha) * p

            def fn(t, side=side):
                return coef * float(pdf(xi_star + side * t ** p))

            val, e = integrate.quad(fn, 0.0, width ** (1.0 - alpha), **opts)
        else:
            val, e = plain(a, b)
        total += val
        err += e
        abs_scale += abs(val)
    if err > max(QUAD_RTOL * abs(total), 1e-14 * abs_scale, 1e-300):
        raise QuadratureAccuracyError(
            f"adaptive quadrature error estimate {err:.3g} too large for E[{phi.kind}] = {total!r}",
            coarse=total - err, fine=total)
    return total


def expect_phi(phi, f, g, h, noise, n_nodes=DEFAULT_NODES):
    """E[phi(1 + f h + g sqrt(h) xi)] for constant f, g."""
    if not isinstance(noise, NoiseSpec):
        noise = NoiseSpec.from_dict(noise)
    if h <= 0:
        raise ConfigurationError("h must be positive")
    m = f * h
    c = g * math.sqrt(h)
    if c == 0.0:
        return float(phi.of_increment(m))
    if phi.kind == "inv_power_alpha" and not noise.has_density:
        raise ConfigurationError(
            f"|y|^-alpha needs a noise density to be integrable; {noise.kind} has none")
    xi_star = -(1.0 + m) / c
    if noise.kind == "student_t" or _needs_split(phi, noise, xi_star):
        return _split_expect(phi, m, c, noise)
    return _gauss_expect(phi, m, c, noise, n_nodes)


def ito_expansion(phi, f, g, h):
    p0, p1, p2 = phi.derivatives
    return p0 + p1 * f * h + 0.5 * p2 * g * g * h


def ito_report(phi, f, g, h, noise, n_nodes=DEFAULT_NODES):
    lhs = expect_phi(phi, f, g, h, noise, n_nodes)
    rhs = ito_expansion(phi, f, g, h)
    err = lhs - rhs
    denom = h * max(abs(f), g * g)
    return ItoReport(phi, f, g, h, lhs, rhs, err, err / denom if denom > 0 else math.nan)


@dataclass
class ItoScan:
    reports: list
    passed: bool
    note: str = ""

    def __iter__(self):
        return iter(self.reports)

    def __len__(self):
        return len(self.reports)


def _decreasing(values, tie_tol):
    a = np.abs(np.asarray(values, dtype=float))
    return bool(np.all(a[1:] < a[:-1] + tie_tol))


def ito_error_scan(phi, f, g, h_grid, noise, tie_tol=1e-12):
    """ItoReports along a decreasing h grid; passes iff |norm_err| decreases."""
    h_grid = [float(h) for h in h_grid]
    if any(h <= 0 for h in h_grid):
        raise ConfigurationError("h_grid must be positive")
    if any(b >= a for a, b in zip(h_grid, h_grid[1:])):
        raise ConfigurationError("h_grid must be strictly decreasing")
    reports = [ito_report(phi, f, g, h, noise) for h in h_grid]
    if len(reports) < 2:
        return ItoScan(reports, True, "grid of length 1: trend check skipped")
    return ItoScan(reports, _decreasing([r.norm_err for r in reports], tie_tol))


def ito_ray_scan(phi, f0, g0, h, t_grid, noise, tie_tol=1e-12):
    """ItoReports at (t f0, t g0) for decreasing t; passes iff |norm_err| decreases."""
    t_grid = [float(t) for t in t_grid]
    if any(b >= a for a, b in zip(t_grid, t_grid[1:])) or any(t <= 0 for t in t_grid):
        raise ConfigurationError("t_grid must be positive and strictly decreasing")
    reports = [ito_report(phi, t * f0, t * g0, h, noise) for t in t_grid]
    if len(reports) < 2:
        return ItoScan(reports, True, "grid of length 1: trend check skipped")
    return ItoScan(reports, _decreasing([r.norm_err for r in reports], tie_tol))


def expect_phi_mc(phi, f, g, h, source, n, stream=0):
    """Monte Carlo estimate (mean, standard error) from indexed noise samples."""
    xi = source.block(stream, 0, n)
    vals = phi.of_increment(f * h + g * math.sqrt(h) * xi)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n))


def _r3(v):
    """log1p(v) - v + v^2/2 without cancellation for small |v|."""
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    small = np.abs(v) < 0.1
    vs = v[small]
    acc = np.zeros_like(vs)
    term = vs ** 3
    for k in range(3, 40):
        acc += term / k if k % 2 else -term / k
        term = term * vs
    out[small] = acc
    vb = v[~small]
    with np.errstate(divide="ignore", invalid="ignore"):
        lg = np.where(vb > -1.0, np.log1p(np.maximum(vb, -1.0)), np.log(np.abs(1.0 + vb)))
    out[~small] = lg - vb + 0.5 * vb * vb
    return out


def conditional_log_moments(f, g, h, noise, n_nodes=DEFAULT_NODES):
    """Vectorised (E[lam], Var[lam]) for lam = ln|1 + f h + g sqrt(h) xi|.

    Uses E[xi] = 0 and E[xi^2] = 1 exactly and integrates only the cubic
    remainder of ln(1 + v), so both moments keep full relative accuracy when
    the increment is tiny.  Entries whose bracket zero carries probability mass
    fall back to the split adaptive route.
    """
    if not isinstance(noise, NoiseSpec):
        noise = NoiseSpec.from_dict(noise)
    f = np.atleast_1d(np.asarray(f, dtype=float))
    g = np.atleast_1d(np.asarray(g, dtype=float))
    m = f * h
    c = g * math.sqrt(h)
    mean = np.empty_like(m)
    var = np.zeros_like(m)

    zero = c == 0.0
    with np.errstate(divide="ignore"):
        mean[zero] = np.log(np.abs(1.0 + m[zero]))

    log_phi = PhiSpec("log_abs")
    log2_phi = PhiSpec("log_abs_squared")
    split = np.zeros_like(zero)
    if noise.kind in ("standard_normal", "uniform_symmetric", "rademacher"):
        for i in np.flatnonzero(~zero):
            split[i] = _needs_split(log_phi, noise, -(1.0 + m[i]) / c[i])
    else:
        split = ~zero
    for i in np.flatnonzero(split):
        mu1 = _split_expect(log_phi, m[i], c[i], noise)
        mu2 = _split_expect(log2_phi, m[i], c[i], noise)
        mean[i], var[i] = mu1, max(mu2 - mu1 * mu1, 0.0)

    idx = np.flatnonzero(~zero & ~split)
    if idx.size:
        mi, ci = m[idx, None], c[idx, None]

        def at(n):
            x, w = gauss_rule(noise.kind, n)
            v = mi + ci * x[None, :]
            r3 = _r3(v)
            er3 = r3 @ w
            mu = m[idx] - 0.5 * (m[idx] ** 2 + c[idx] ** 2) + er3
            dev = (ci * x[None, :] - 0.5 * (2.0 * mi * ci * x[None, :] + ci ** 2 * (x[None, :] ** 2 - 1.0))
                   + (r3 - er3[:, None]))
            return mu, (dev * dev) @ w

        if noise.kind == "rademacher":
            mu, vv = at(2)
        else:
            mu0, v0 = at(n_nodes)
            mu, vv = at(2 * n_nodes)
            scale = np.abs(m[idx]) + c[idx] ** 2
            bad = (np.abs(mu - mu0) > QUAD_RTOL * scale) | (np.abs(vv - v0) > QUAD_RTOL * vv + 1e-300)
            if np.any(bad):
                j = int(np.flatnonzero(bad)[0])
                raise QuadratureAccuracyError(
                    "node doubling disagreement in conditional log moments",
                    coarse=(mu0[j], v0[j]), fine=(mu[j], vv[j]))
        mean[idx], var[idx] = mu, vv
    return mean, var
