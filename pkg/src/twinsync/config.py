"""Config file loading/validation and model (de)serialization.

The scenario config is one YAML file with six named sections; the shipped
default lives in data/default.yaml and carries every experiment constant.
A user config must be complete -- there is no silent merging with defaults,
so a missing section fails loudly by name.
"""
from importlib import resources

import numpy as np
import yaml

from .model import DiscreteStateSpace


class ConfigError(ValueError):
    pass


_REQUIRED = {
    "plant": ["m", "r_ball", "j", "g", "d", "l", "tau_servo",
              "dt_inner", "blowup_bound"],
    "noise": ["q_process", "r_meas"],
    "network": ["delay", "loss_prob"],
    "controllers": ["local", "tracking"],
    "observer": ["q_design", "r_design", "p0"],
    "experiment": ["duration", "ts", "setpoint_level", "ramp_start",
                   "ramp_slope", "seed", "divergence_bound",
                   "identification"],
}
_GAIN_KEYS = ["kp", "ki", "kd", "deriv_filter_n", "u_min", "u_max"]
_IDENT_KEYS = ["na", "nb", "nk", "amplitude", "hold", "duration",
               "prefilter_hz", "val_duration", "val_hold"]


def default_config_text():
    return resources.files("twinsync").joinpath("data/default.yaml").read_text()


def load_config(path=None):
    """Parse and validate a scenario config; None loads the packaged default."""
    if path is None:
        raw = default_config_text()
    else:
        with open(path) as f:
            raw = f.read()
    cfg = yaml.safe_load(raw)
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a mapping")
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    for section, keys in _REQUIRED.items():
        if section not in cfg:
            raise ConfigError(f"missing config section: {section}")
        for key in keys:
            if key not in cfg[section]:
                raise ConfigError(f"missing config key: {section}.{key}")
    for name in ("local", "tracking"):
        block = cfg["controllers"][name]
        for key in _GAIN_KEYS:
            if key not in block:
                raise ConfigError(f"missing config key: controllers.{name}.{key}")
    if "reference_hold" not in cfg["controllers"]["tracking"]:
        raise ConfigError("missing config key: controllers.tracking.reference_hold")
    ident = cfg["experiment"]["identification"]
    for key in _IDENT_KEYS:
        if key not in ident:
            raise ConfigError(f"missing config key: experiment.identification.{key}")
    net = cfg["network"]
    if net["delay"] < 0:
        raise ConfigError("network.delay must be nonnegative")
    if not 0.0 <= net["loss_prob"] <= 1.0:
        raise ConfigError("network.loss_prob must lie in [0, 1]")
    exp = cfg["experiment"]
    n = exp["duration"] / exp["ts"]
    if abs(n - round(n)) > 1e-9:
        raise ConfigError("experiment.ts must divide experiment.duration")
    return cfg


def model_to_dict(mdl, **meta):
    d = {
        "Ts": float(mdl.Ts),
        "A": mdl.A.tolist(),
        "B": mdl.B.tolist(),
        "C": mdl.C.tolist(),
        "G": mdl.G.tolist(),
        "F": mdl.F.tolist(),
        "Q": mdl.Q.tolist(),
        "R": mdl.R.tolist(),
    }
    d.update(meta)
    return d


def model_from_dict(d):
    mdl = DiscreteStateSpace(
        A=np.array(d["A"]), B=np.array(d["B"]), C=np.array(d["C"]),
        G=np.array(d["G"]), F=np.array(d["F"]),
        Q=np.array(d["Q"]), R=np.array(d["R"]), Ts=d["Ts"])
    meta = {k: v for k, v in d.items()
            if k not in ("A", "B", "C", "G", "F", "Q", "R", "Ts")}
    return mdl, meta


def save_model(mdl, path, **meta):
    with open(path, "w") as f:
        yaml.safe_dump(model_to_dict(mdl, **meta), f, sort_keys=False)


def load_model(path):
    with open(path) as f:
        d = yaml.safe_load(f)
    return model_from_dict(d)
