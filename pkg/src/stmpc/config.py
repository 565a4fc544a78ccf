"""Experiment configuration documents (YAML, flat keys, matrix literals).

Example::

    A: [[0, 1], [-2, 0]]
    B: [[0], [1]]
    u_bounds: [8]
    Q: [[1, 0], [0, 1]]
    R: [[0.5]]
    delta: 0.1
    N_p: 80
    M: 30
    beta: 1
    gamma: 0.5
    x0: [2.5, 0]
    t_end: 40

Optional keys: ``sample_resolution``, ``terminal_file`` (ingredients written
by ``synthesize``), ``output``, ``seed``, ``betas``.
"""
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
import yaml

from .discretization import CostWeights, LinearSystem
from .exceptions import ConfigError, STMPCError
from .simulator import SimulationConfig
from .terminal import TerminalIngredients
from .trigger import TriggerParams

REQUIRED = ("A", "B", "u_bounds", "Q", "R", "delta", "N_p", "M", "beta", "gamma", "x0", "t_end")
OPTIONAL = ("sample_resolution", "terminal_file", "output", "seed", "betas")


def _number(value, key):
    # PyYAML reads "1e-3" (no dot) as a string
    if isinstance(value, bool):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None
    if not np.isfinite(out):
        raise ConfigError(f"{key}: must be finite")
    return out


def _matrix(value, key):
    if not isinstance(value, list):
        return [[_number(value, key)]]
    if not value or not all(isinstance(r, list) for r in value):
        raise ConfigError(f"{key}: expected a list of rows")
    width = len(value[0])
    if width == 0 or any(len(r) != width for r in value):
        raise ConfigError(f"{key}: ragged or empty rows")
    return [[_number(v, key) for v in r] for r in value]


def _vector(value, key):
    if not isinstance(value, list):
        return [_number(value, key)]
    if any(isinstance(v, list) for v in value):
        raise ConfigError(f"{key}: expected a flat list")
    return [_number(v, key) for v in value]


def _int(value, key):
    out = _number(value, key)
    if out != int(out):
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    return int(out)


@dataclass
class ExperimentConfig:
    A: list
    B: list
    u_bounds: list
    Q: list
    R: list
    delta: float
    N_p: int
    M: int
    beta: float
    gamma: float
    x0: list
    t_end: float
    sample_resolution: float = None
    terminal_file: str = None
    output: str = None
    seed: int = 0
    betas: list = None

    @classmethod
    def from_dict(cls, doc, base_dir=None):
        if not isinstance(doc, dict):
            raise ConfigError("configuration must be a key/value mapping")
        unknown = sorted(set(doc) - set(REQUIRED) - set(OPTIONAL))
        if unknown:
            raise ConfigError(f"unknown keys: {', '.join(unknown)}")
        missing = [k for k in REQUIRED if k not in doc]
        if missing:
            raise ConfigError(f"missing required keys: {', '.join(missing)}")
        kw = {}
        for key in ("A", "B", "Q", "R"):
            kw[key] = _matrix(doc[key], key)
        for key in ("u_bounds", "x0"):
            kw[key] = _vector(doc[key], key)
        for key in ("delta", "beta", "gamma", "t_end"):
            kw[key] = _number(doc[key], key)
        kw["N_p"] = _int(doc["N_p"], "N_p")
        kw["M"] = _int(doc["M"], "M")
        if doc.get("sample_resolution") is not None:
            kw["sample_resolution"] = _number(doc["sample_resolution"], "sample_resolution")
        for key in ("terminal_file", "output"):
            if doc.get(key) is not None:
                kw[key] = str(doc[key])
        if doc.get("seed") is not None:
            kw["seed"] = _int(doc["seed"], "seed")
        if doc.get("betas") is not None:
            kw["betas"] = _vector(doc["betas"], "betas")
        cfg = cls(**kw)
        cfg._base_dir = Path(base_dir) if base_dir else None
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            doc = yaml.safe_load(path.read_text())
        except OSError as err:
            raise ConfigError(f"cannot read {path}: {err}") from None
        except yaml.YAMLError as err:
            raise ConfigError(f"{path}: invalid YAML: {err}") from None
        return cls.from_dict(doc, base_dir=path.parent)

    def to_dict(self):
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name in REQUIRED or value is not None:
                out[f.name] = value
        return out

    def dumps(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    def validate(self):
        """Build every domain object once so invalid documents fail fast."""
        try:
            self.system()
            CostWeights(self.Q, self.R).check_system(self.system())
            self.trigger()
            self.simulation_config(terminal=None)
        except STMPCError as err:
            raise ConfigError(str(err)) from None

    def system(self):
        return LinearSystem(self.A, self.B, self.u_bounds)

    def trigger(self, beta=None):
        return TriggerParams(self.beta if beta is None else beta, self.gamma)

    def terminal_path(self):
        if self.terminal_file is None:
            return None
        p = Path(self.terminal_file)
        base = getattr(self, "_base_dir", None)
        return p if p.is_absolute() or base is None else base / p

    def load_terminal(self):
        path = self.terminal_path()
        if path is None:
            return None
        try:
            doc = yaml.safe_load(path.read_text())
            return TerminalIngredients.from_dict(doc)
        except (OSError, yaml.YAMLError, KeyError, TypeError, STMPCError) as err:
            raise ConfigError(f"cannot load terminal ingredients from {path}: {err}") from None

    def simulation_config(self, beta=None, terminal=None):
        return SimulationConfig(self.system(), np.array(self.Q), np.array(self.R),
                                self.trigger(beta), self.delta, self.N_p, self.M,
                                np.array(self.x0), self.t_end, self.sample_resolution,
                                terminal)


def dump_terminal(ing, report=None):
    doc = ing.to_dict()
    if report is not None:
        doc["verification"] = {
            "lyapunov_max_eig": report.lyapunov_max_eig,
            "input_margin": report.input_margin,
            "sampled_max_violation": report.sampled_max_violation,
            "passed": report.passed,
        }
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)
