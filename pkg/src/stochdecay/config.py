"""Experiment configuration: one YAML file fully determines one experiment."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields
from typing import Optional

import yaml

from .errors import ConfigurationError
from .model import ModelSpec, classify_regime
from .noise import NoiseSpec
from .oracle import PhiSpec

# statistic -> (regime requirement, noise assumption it leans on)
STATISTICS = {
    "terminal": (None, None),
    "loglog_slope": ("lam", "assumption1"),
    "comparison_ratio_g": ("g2", "assumption1"),
    "comparison_ratio_f": ("abs_f", "assumption1"),
    "exact_rate": ("case_iii", "assumption2"),
    "oscillation": ("oscillatory", "assumption2"),
    "martingale": ("g2", "assumption1"),
}


@dataclass
class ItoConfig:
    phi: PhiSpec
    f: float
    g: float
    h_grid: list = field(default_factory=list)
    t_grid: list = field(default_factory=list)
    h_fixed: Optional[float] = None

    def to_dict(self):
        d = {"phi": {"kind": self.phi.kind}, "f": self.f, "g": self.g,
             "h_grid": list(self.h_grid)}
        if self.phi.alpha is not None:
            d["phi"]["alpha"] = self.phi.alpha
        if self.t_grid:
            d["t_grid"] = list(self.t_grid)
            d["h_fixed"] = self.h_fixed
        return d

    @classmethod
    def from_dict(cls, d):
        try:
            phi = d["phi"]
            return cls(PhiSpec(phi["kind"], phi.get("alpha")), float(d["f"]), float(d["g"]),
                       [float(h) for h in d.get("h_grid", [])],
                       [float(t) for t in d.get("t_grid", [])],
                       None if d.get("h_fixed") is None else float(d["h_fixed"]))
        except KeyError as e:
            raise ConfigurationError(f"ito.{e.args[0]} is required") from None


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    model: ModelSpec = field(default_factory=ModelSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0
    n_paths: int = 1
    n_steps: int = 1000
    statistics: list = field(default_factory=lambda: ["terminal"])
    output_dir: str = "out"
    tolerances: dict = field(default_factory=dict)
    force: bool = False
    threads: int = 1
    lam: Optional[float] = None
    mu: Optional[float] = None
    ito: Optional[ItoConfig] = None

    def to_dict(self):
        d = {
            "name": self.name,
            "model": self.model.to_dict(),
            "noise": {**self.noise.to_dict(), "seed": self.seed},
            "n_paths": self.n_paths,
            "n_steps": self.n_steps,
            "statistics": list(self.statistics),
            "output_dir": self.output_dir,
            "tolerances": dict(self.tolerances),
            "force": self.force,
            "threads": self.threads,
        }
        if self.lam is not None:
            d["lam"] = self.lam
        if self.mu is not None:
            d["mu"] = self.mu
        if self.ito is not None:
            d["ito"] = self.ito.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigurationError("config must be a mapping")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config field(s): {sorted(unknown)}")
        noise = dict(d.get("noise", {}))
        seed = noise.pop("seed", 0)
        try:
            model = ModelSpec(**d.get("model", {}))
        except TypeError as e:
            raise ConfigurationError(f"model: {e}") from None
        cfg = cls(
            name=str(d.get("name", "experiment")),
            model=model,
            noise=NoiseSpec.from_dict(noise),
            seed=_int(seed, "noise.seed"),
            n_paths=_int(d.get("n_paths", 1), "n_paths"),
            n_steps=_int(d.get("n_steps", 1000), "n_steps"),
            statistics=list(d.get("statistics", ["terminal"])),
            output_dir=str(d.get("output_dir", "out")),
            tolerances=dict(d.get("tolerances", {})),
            force=bool(d.get("force", False)),
            threads=_int(d.get("threads", 1), "threads"),
            lam=None if d.get("lam") is None else float(d["lam"]),
            mu=None if d.get("mu") is None else float(d["mu"]),
            ito=None if d.get("ito") is None else ItoConfig.from_dict(d["ito"]),
        )
        cfg.validate()
        return cfg

    def validate(self):
        if self.n_paths < 1:
            raise ConfigurationError("n_paths must be >= 1")
        if self.n_steps < 1:
            raise ConfigurationError("n_steps must be >= 1")
        if self.threads < 1:
            raise ConfigurationError("threads must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigurationError("noise.seed must be an unsigned 64-bit integer")
        bad = [s for s in self.statistics if s not in STATISTICS]
        if bad:
            raise ConfigurationError(f"statistics: unknown name(s) {bad}; known {sorted(STATISTICS)}")

    def dumps(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def loads(cls, text):
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ConfigurationError(f"config is not valid YAML: {e}") from None
        return cls.from_dict(data or {})

    @property
    def digest(self):
        # execution settings do not change the output, so they stay out of the hash
        d = self.to_dict()
        for k in ("threads", "force"):
            d.pop(k, None)
        text = yaml.safe_dump(d, sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _int(v, name):
    try:
        return int(v)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{name} must be an integer, got {v!r}") from None


def load_config(path):
    with open(path) as fh:
        return ExperimentConfig.loads(fh.read())


def dump_config(config, path):
    with open(path, "w") as fh:
        fh.write(config.dumps())


def check_statistics(config, report=None):
    """Refuse statistics the regime or the noise law cannot support, unless forced."""
    report = report or classify_regime(config.model)
    problems = []
    for name in config.statistics:
        need, assumption = STATISTICS[name]
        if need == "lam" and report.lam is None:
            problems.append(f"{name}: regime {report.case_tag} predicts no decay exponent")
        elif need == "g2" and (report.comparison_sum != "g2" or config.model.a_g == 0):
            problems.append(f"{name}: needs a finite limit L of f/g^2 and g != 0")
        elif need == "abs_f" and report.comparison_sum != "abs_f":
            problems.append(f"{name}: needs f/g^2 -> -inf (drift-dominated regime)")
        elif need == "case_iii" and report.case_tag != "case_iii":
            problems.append(f"{name}: exact rate holds only in case_iii, model is {report.case_tag}")
        elif need == "oscillatory" and not report.oscillatory:
            problems.append(f"{name}: oscillation holds only in case_i/case_ii, model is {report.case_tag}")
        if assumption == "assumption1" and not config.noise.assumption1_ok:
            problems.append(f"{name}: {config.noise.kind} noise violates Assumption 1 "
                            "(density with x^3 p(x) -> 0)")
        if assumption == "assumption2" and not config.noise.assumption2_ok:
            problems.append(f"{name}: {config.noise.kind} noise violates Assumption 2 "
                            "(all moments finite)")
    if problems and not (config.force):
        raise ConfigurationError("refusing statistics (pass --force to override): "
                                 + "; ".join(problems))
    return problems
