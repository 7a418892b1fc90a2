"""Flat ``key = value`` experiment configuration."""
from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, fields
from typing import Optional

from ..kernels import GridSpec, InvalidSpecError

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "load_config"]


class ConfigError(ValueError):
    """Invalid or unknown configuration entry."""


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ints(text):
    return tuple(int(v) for v in text.replace(",", " ").split())


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class ExperimentConfig:
    # data: a CSV path, or the synthetic generator when empty
    data: str = ""
    train_len: Optional[int] = None
    test_len: int = 20
    synth_freqs: tuple = (0.1, 0.3)
    synth_weights: tuple = (1.0, 1.0)
    synth_sigma: float = 0.0
    synth_noise_var: float = 0.1
    synth_n: int = 100
    synth_n_star: int = 20
    synth_seed: int = 0
    # grids
    grid_strategy: str = "uniform"
    grid_dim: str = "one_d"
    m: int = 500
    mu_low: float = 0.0
    mu_high: float = 0.5
    sigma: float = 0.001
    var_low: float = 0.0
    var_high: float = 0.15
    # factors
    factorization: str = "exact"
    nystrom_p: int = 30
    rff_R: int = 200
    # solver
    solver: str = "mm"
    init: str = "gaussian"
    init_var: float = 10.0
    noise_var: Optional[float] = None
    estimate_noise: bool = True
    max_iters: int = 50
    obj_tol: float = 1e-4
    inner_max_iters: int = 500
    admm_rho: float = 100.0
    admm_rho_prime: float = 50.0
    admm_eps: float = 1e-3
    admm_it_s: int = 1000
    admm_s_solver: str = "lbfgs"
    # harness
    mc_runs: int = 10
    base_seed: int = 0
    fail_threshold_factor: float = 10.0
    workers: int = 1
    record_wall_time: bool = False
    plot: bool = True
    # approx / ranks commands
    approx_n: int = 200
    approx_mu: float = 0.2
    approx_sigma: float = 0.001
    nystrom_budgets: tuple = (5, 10, 20, 30, 50)
    rff_budgets: tuple = (50, 100, 200, 500, 1000, 2000)
    approx_seeds: int = 10
    ranks_n: int = 86

    def grid_spec(self, seed: int = 0) -> GridSpec:
        return GridSpec(
            strategy=self.grid_strategy, dimensionality=self.grid_dim, m=self.m,
            mu_bounds=(self.mu_low, self.mu_high), fixed_sigma=self.sigma,
            var_bounds=(self.var_low, self.var_high), seed=seed,
        )

    def validate(self):
        choices = {
            "factorization": ("exact", "nystrom", "rff"),
            "solver": ("mm", "admm", "gradproj"),
            "init": ("gaussian", "zeros", "welch-l1"),
            "admm_s_solver": ("lbfgs", "steepest"),
        }
        for key, allowed in choices.items():
            if getattr(self, key) not in allowed:
                raise ConfigError(f"{key} must be one of {', '.join(allowed)}")
        try:
            self.grid_spec().validate()
        except InvalidSpecError as exc:
            raise ConfigError(str(exc)) from None
        if self.mc_runs < 1 or self.workers < 1:
            raise ConfigError("mc_runs and workers must be at least 1")
        if self.test_len < 1 or self.synth_n_star < 1:
            raise ConfigError("a nonempty test segment is required")
        if self.synth_n < 1:
            raise ConfigError("synth_n must be at least 1")
        if len(self.synth_freqs) != len(self.synth_weights):
            raise ConfigError("synth_freqs and synth_weights differ in length")
        if self.noise_var is not None and self.noise_var < 0:
            raise ConfigError("noise_var must be nonnegative")
        if self.fail_threshold_factor <= 0:
            raise ConfigError("fail_threshold_factor must be positive")
        if not 0 < self.admm_rho_prime <= self.admm_rho:
            raise ConfigError("need 0 < admm_rho_prime <= admm_rho")
        return self


_CONVERTERS = {
    "tuple": None,
    "bool": _bool,
    "int": int,
    "float": float,
    "str": str,
    "Optional[int]": int,
    "Optional[float]": float,
}
_TUPLE_KINDS = {"synth_freqs": _floats, "synth_weights": _floats, "nystrom_budgets": _ints, "rff_budgets": _ints}


def _convert(name, type_name, raw):
    raw = raw.strip()
    if type_name.startswith("Optional") and raw.lower() in ("", "none", "auto"):
        return None
    if name in _TUPLE_KINDS:
        return _TUPLE_KINDS[name](raw)
    conv = _CONVERTERS[type_name]
    return conv(raw)


def parse_config(text: str, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Parse flat ``key = value`` lines (``#`` comments); unknown keys are errors."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",),
                                       comment_prefixes=("#",), delimiters=("=",))
    parser.optionxform = str
    try:
        parser.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    if parser.sections() != ["config"]:
        raise ConfigError("config files are flat; section headers are not allowed")
    types = {f.name: str(f.type) for f in fields(ExperimentConfig)}
    values = {}
    for key, raw in parser.items("config"):
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            values[key] = _convert(key, types[key], raw)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None
    values.update(overrides or {})
    return ExperimentConfig(**values).validate()


def load_config(path: Optional[str], overrides: Optional[dict] = None) -> ExperimentConfig:
    if path is None:
        return dataclasses.replace(ExperimentConfig(), **(overrides or {})).validate()
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text, overrides)
