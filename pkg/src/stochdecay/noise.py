"""Driving noise: zero-mean, unit-variance laws with indexed sampling.

Every sample is a pure function of ``(master_seed, stream, index)``.  Streams
are Philox-4x64 keys ``(seed, stream)`` and the index addresses the raw 64-bit
output of that keyed counter stream, so blocks can be read at any offset and
parallel ensembles never depend on scheduling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import special

from .errors import ConfigurationError

KINDS = ("standard_normal", "uniform_symmetric", "rademacher", "student_t")

_SQRT3 = math.sqrt(3.0)
_MASK64 = (1 << 64) - 1
_TWO_M53 = 2.0 ** -53


@dataclass(frozen=True)
class NoiseSpec:
    """Distribution of the i.i.d. noise, standardised to mean 0 and variance 1.

    ``params`` holds the degrees of freedom for ``student_t`` and is empty
    otherwise.
    """

    kind: str = "standard_normal"
    params: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.kind not in KINDS:
            raise ConfigurationError(f"noise.kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind == "student_t":
            if len(self.params) != 1:
                raise ConfigurationError("noise.params: student_t needs exactly one value (nu)")
            if not self.params[0] > 2.0:
                raise ConfigurationError(
                    f"noise.params: student_t with nu={self.params[0]} has no finite variance "
                    "(unit variance needs nu > 2)")
        elif self.params:
            raise ConfigurationError(f"noise.params: {self.kind} takes no parameters")

    @property
    def nu(self):
        return self.params[0] if self.kind == "student_t" else math.inf

    @property
    def assumption1_ok(self):
        # density with x^3 p(x) -> 0; nu > 4 keeps a margin over the bare E|xi|^3 condition
        if self.kind == "rademacher":
            return False
        if self.kind == "student_t":
            return self.nu > 4.0
        return True

    @property
    def assumption2_ok(self):
        return self.kind != "student_t"

    @property
    def has_density(self):
        return self.kind != "rademacher"

    @property
    def support(self):
        if self.kind == "uniform_symmetric":
            return (-_SQRT3, _SQRT3)
        if self.kind == "rademacher":
            return (-1.0, 1.0)
        return (-math.inf, math.inf)

    def _t_scale(self):
        nu = self.nu
        return math.sqrt((nu - 2.0) / nu)

    def pdf(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.kind == "standard_normal":
            return np.exp(-0.5 * xi * xi) / math.sqrt(2.0 * math.pi)
        if self.kind == "uniform_symmetric":
            return np.where(np.abs(xi) <= _SQRT3, 1.0 / (2.0 * _SQRT3), 0.0)
        if self.kind == "student_t":
            s = self._t_scale()
            nu = self.nu
            logc = (special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2)
                    - 0.5 * math.log(nu * math.pi))
            t = xi / s
            # t*t overflows far in the tail; the density is 0 there either way
            with np.errstate(over="ignore"):
                return np.exp(logc - (nu + 1) / 2 * np.log1p(t * t / nu)) / s
        raise ConfigurationError("rademacher noise has no density")

    def abs_moment(self, m):
        """Analytic E|xi|^m (``inf`` when it does not exist)."""
        if self.kind == "standard_normal":
            return 2.0 ** (m / 2) * math.gamma((m + 1) / 2) / math.sqrt(math.pi)
        if self.kind == "uniform_symmetric":
            return _SQRT3 ** m / (m + 1)
        if self.kind == "rademacher":
            return 1.0
        nu = self.nu
        if m >= nu:
            return math.inf
        raw = math.exp(0.5 * m * math.log(nu) + special.gammaln((m + 1) / 2)
                       + special.gammaln((nu - m) / 2)
                       - 0.5 * math.log(math.pi) - special.gammaln(nu / 2))
        return raw * self._t_scale() ** m

    def from_raw(self, raw):
        """Map raw uint64 draws to noise values (inverse-CDF for continuous laws)."""
        raw = np.asarray(raw, dtype=np.uint64)
        if self.kind == "rademacher":
            return np.where(raw >> np.uint64(63), 1.0, -1.0)
        u = ((raw >> np.uint64(11)).astype(float) + 0.5) * _TWO_M53
        return self.quantile(u)

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "standard_normal":
            return special.ndtri(u)
        if self.kind == "uniform_symmetric":
            return _SQRT3 * (2.0 * u - 1.0)
        if self.kind == "student_t":
            return special.stdtrit(self.nu, u) * self._t_scale()
        return np.where(u < 0.5, -1.0, 1.0)

    def to_dict(self):
        return {"kind": self.kind, "params": list(self.params)}

    @classmethod
    def from_dict(cls, d):
        return cls(kind=d.get("kind", "standard_normal"), params=tuple(d.get("params", ())))


@dataclass(frozen=True)
class NoiseSource:
    spec: NoiseSpec
    master_seed: int

    def __post_init__(self):
        if not (0 <= int(self.master_seed) <= _MASK64):
            raise ConfigurationError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "master_seed", int(self.master_seed))

    def _key(self, stream):
        return np.array([self.master_seed, int(stream) & _MASK64], dtype=np.uint64)

    def raw_block(self, stream, start, count):
        """Raw 64-bit words ``start .. start+count-1`` of a stream."""
        start = int(start)
        lead = start % 4
        counter = np.zeros(4, dtype=np.uint64)
        block = start // 4
        counter[0] = block & _MASK64
        counter[1] = (block >> 64) & _MASK64
        bg = np.random.Philox(key=self._key(stream), counter=counter)
        return bg.random_raw(count + lead)[lead:]

    def block(self, stream, start, count):
        return self.spec.from_raw(self.raw_block(stream, start, count))

    def sample(self, stream, index):
        return float(self.block(stream, index, 1)[0])


def make_noise(spec, master_seed):
    if not isinstance(spec, NoiseSpec):
        spec = NoiseSpec.from_dict(spec)
    return NoiseSource(spec, master_seed)


def sample(source, stream, index):
    return source.sample(stream, index)


class MomentEstimate(NamedTuple):
    value: float
    stderr: float
    analytic: float


def moment_estimate(source, m, n, stream=0, chunk=1 << 20):
    """Empirical E|xi|^m over ``n`` indexed samples of one stream, with its standard error."""
    if m < 1:
        raise ConfigurationError("moment order m must be >= 1")
    if n < 1000:
        raise ConfigurationError("moment estimate needs n >= 1000 samples")
    s1 = s2 = 0.0
    for start in range(0, n, chunk):
        xi = source.block(stream, start, min(chunk, n - start))
        v = np.abs(xi) ** m
        s1 += float(v.sum())
        s2 += float((v * v).sum())
    mean = s1 / n
    var = max(s2 / n - mean * mean, 0.0)
    return MomentEstimate(mean, math.sqrt(var / (n - 1)), source.spec.abs_moment(m))
