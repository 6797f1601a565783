"""Experiment configuration: YAML schema, validation, and builders that turn a
config into model/grid/load objects.  Configs hash to a provenance id that is
embedded in every output file."""

import hashlib
import json
from dataclasses import dataclass
from importlib import resources

import numpy as np
import yaml

from .energy import EnergyModel, Nonlinearity
from .solver import LoadPath
from .spaces import TimeGrid, build_spaces, unit_spaces


class ConfigError(ValueError):
    """Invalid experiment configuration; message carries the field path."""


_DEFAULTS = {
    "spaces": {"n": 1, "L": 1.0, "kappa": 2.0, "unit": False},
    "nonlinearity": {"kind": "none", "a": None},
    "grid": {"T": 1.0, "K": 1000},
    "dissipation": {"eps": 1e-3, "delta": 0.0, "sigma": 0.0},
    "load": {"preset": "zero", "rate": 1.0, "offset": 0.0,
             "direction": "weights", "csv": None},
    "initial_state": None,
    "control": {"beta": 1.0, "z_des": None, "variant": "eps_delta",
                "penalty_weight": 10.0},
    "study": {"eps_list": None, "delta_list": None, "kind": "delta"},
    "parametrize": {"m_out": None, "g_threshold": 0.05, "jump_threshold": 0.05},
    "recovery": {"eps_tilde": 1e-5, "rho": 0.05, "candidate_tol": 0.05},
    "seed": 0,
    "output_dir": "out",
}


def _merge(defaults, user, path=""):
    if user is None:
        return json.loads(json.dumps(defaults))
    out = {}
    for key, dval in defaults.items():
        uval = user.get(key, None) if isinstance(user, dict) else None
        if isinstance(dval, dict):
            out[key] = _merge(dval, uval, f"{path}{key}.")
        else:
            out[key] = dval if uval is None else uval
    if isinstance(user, dict):
        for key in user:
            if key not in defaults:
                raise ConfigError(f"unknown config key: {path}{key}")
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict

    @classmethod
    def from_dict(cls, data):
        cfg = cls(raw=_merge(_DEFAULTS, data or {}))
        cfg.validate()
        return cfg

    @classmethod
    def from_yaml(cls, path):
        with open(path) as fh:
            data = yaml.safe_load(fh)
        return cls.from_dict(data)

    @classmethod
    def from_preset(cls, name):
        ref = resources.files("risopt.presets").joinpath(f"{name}.yaml")
        if not ref.is_file():
            available = sorted(p.name[:-5] for p in
                               resources.files("risopt.presets").iterdir()
                               if p.name.endswith(".yaml"))
            raise ConfigError(f"unknown preset {name!r}; available: {available}")
        return cls.from_dict(yaml.safe_load(ref.read_text()))

    def validate(self):
        r = self.raw
        sp = r["spaces"]
        if not isinstance(sp["n"], int) or sp["n"] < 1:
            raise ConfigError("spaces.n must be a positive integer")
        if sp["L"] <= 0:
            raise ConfigError("spaces.L must be positive")
        if not (2.0 <= sp["kappa"] < 6.0):
            raise ConfigError("spaces.kappa must lie in [2, 6)")
        nl = r["nonlinearity"]
        if nl["kind"] not in ("none", "sine", "doublewell"):
            raise ConfigError("nonlinearity.kind must be none|sine|doublewell")
        if nl["kind"] == "doublewell" and not (2.0 < (nl["a"] or 0) < 2.5):
            raise ConfigError("nonlinearity.a must lie in (2, 2.5)")
        g = r["grid"]
        if g["T"] <= 0 or not isinstance(g["K"], int) or g["K"] < 1:
            raise ConfigError("grid.T must be positive and grid.K a positive "
                              "integer")
        d = r["dissipation"]
        if d["eps"] <= 0:
            raise ConfigError("dissipation.eps must be positive")
        if d["delta"] < 0 or d["sigma"] < 0:
            raise ConfigError("dissipation.delta and .sigma must be nonnegative")
        if r["load"]["preset"] not in ("zero", "ramp", "custom"):
            raise ConfigError("load.preset must be zero|ramp|custom")
        if r["load"]["preset"] == "custom" and not r["load"]["csv"]:
            raise ConfigError("load.csv is required for the custom load preset")
        for key in ("eps_list", "delta_list"):
            lst = r["study"][key]
            if lst is not None:
                if len(lst) == 0:
                    raise ConfigError(f"study.{key} must not be empty")
                if any(b >= a for a, b in zip(lst, lst[1:])):
                    raise ConfigError(f"study.{key} must be strictly decreasing")
        if r["control"]["beta"] <= 0:
            raise ConfigError("control.beta must be positive")

    # -- builders ------------------------------------------------------------

    def hash(self):
        blob = json.dumps(self.raw, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def build_spaces(self):
        sp = self.raw["spaces"]
        if sp["unit"]:
            return unit_spaces(sp["n"], kappa=sp["kappa"])
        return build_spaces(sp["n"], sp["L"], kappa=sp["kappa"])

    def build_model(self):
        nl = self.raw["nonlinearity"]
        return EnergyModel(self.build_spaces(),
                           Nonlinearity(kind=nl["kind"], a=nl["a"]))

    def build_grid(self):
        g = self.raw["grid"]
        return TimeGrid(final_time=float(g["T"]), steps=g["K"])

    def build_params(self):
        from .dissipation import DissipationParams

        d = self.raw["dissipation"]
        return DissipationParams(eps=float(d["eps"]), delta=float(d["delta"]),
                                 sigma=float(d["sigma"]))

    def load_direction(self, spaces):
        spec = self.raw["load"]["direction"]
        if spec == "weights":
            return np.array(spaces.diss_weights)
        if spec == "sine":
            x = (np.arange(spaces.n) + 1) * spaces.h
            return spaces.quad_weights * np.sin(np.pi * x / spaces.length)
        arr = np.asarray(spec, dtype=float)
        if arr.shape != (spaces.n,):
            raise ConfigError("load.direction list must have length n")
        return arr

    def build_load(self, spaces, grid):
        spec = self.raw["load"]
        if spec["preset"] == "zero":
            return LoadPath.zero(grid, spaces.n)
        if spec["preset"] == "ramp":
            return LoadPath.ramp(grid, self.load_direction(spaces),
                                 rate=float(spec["rate"]),
                                 offset=float(spec["offset"]))
        data = np.loadtxt(spec["csv"], delimiter=",", skiprows=1, ndmin=2)
        if data.shape != (grid.steps + 1, spaces.n + 1):
            raise ConfigError("load.csv shape does not match (K+1, n+1)")
        return LoadPath(grid, data[:, 1:])

    def initial_state(self, spaces):
        z0 = self.raw["initial_state"]
        if z0 is None:
            return np.zeros(spaces.n)
        arr = np.asarray(z0, dtype=float)
        if arr.shape != (spaces.n,):
            raise ConfigError("initial_state must have length n")
        return arr

    def target_state(self, spaces):
        zd = self.raw["control"]["z_des"]
        if zd is None:
            return np.zeros(spaces.n)
        arr = np.asarray(zd, dtype=float)
        if arr.shape != (spaces.n,):
            raise ConfigError("control.z_des must have length n")
        return arr
