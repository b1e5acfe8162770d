"""Experiment configuration files (INI format).

Example::

    [problem]
    kind = turbulent_diffusion
    beta = 2.0
    t_end = 1.0

    [run]
    seed = 2021
    samples = 10000
    methods = kl_diag, em
    out = results/td.csv

    [m_grid]
    kl_diag = 10, 40, 160
    em = 10, 40, 160
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..errors import ConfigError

__all__ = ["METHODS", "KL_METHODS", "ExperimentConfig", "load_config", "parse_int_list"]

KL_METHODS = {
    "kl_diag": "diagonalized",
    "kl_normal": "diagonalized",
    "kl_phi_series": "phi_series",
    "kl_augmented": "augmented_exp",
    "kl_sylvester": "sylvester",
}
STEP_METHODS = {"em": "em", "bem": "bem"}
METHODS = tuple(KL_METHODS) + tuple(STEP_METHODS)

_INT_KEYS = {"n", "dim"}


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"expected a list of integers, got {text!r}") from exc


def _parse_value(key: str, text: str):
    if key in _INT_KEYS:
        try:
            return int(text)
        except ValueError as exc:
            raise ConfigError(f"{key} must be an integer, got {text!r}") from exc
    try:
        return float(text)
    except ValueError:
        return text


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a bench run needs; see the module docstring for the file layout."""

    problem_kind: str = "scalar_ou"
    params: dict = field(default_factory=dict)
    methods: tuple = ("kl_phi_series",)
    m_grids: dict = field(default_factory=lambda: {"default": [16]})
    samples: int = 1000
    seed: int = 0
    out: str | None = None
    timing: bool = True
    couple: bool = False
    workers: int = 1
    rel_tol: float = 1e-10
    trajectory_scheme: str = "em"
    trajectory_steps: int = 1000
    gallery_method: str = "kl_sylvester"
    gallery_m: int = 64
    realizations: int = 4
    base_dir: Path | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown method(s) {', '.join(unknown)}; choose from {', '.join(METHODS)}")
        if self.gallery_method not in KL_METHODS:
            raise ConfigError(f"gallery method must be one of {', '.join(KL_METHODS)}")
        if self.trajectory_scheme not in STEP_METHODS:
            raise ConfigError("trajectory scheme must be em or bem")
        if self.samples < 1:
            raise ConfigError(f"samples must be >= 1, got {self.samples}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.workers < 1 or self.trajectory_steps < 1 or self.gallery_m < 1 or self.realizations < 0:
            raise ConfigError("workers, trajectory steps and gallery m must be positive")
        for method in self.methods:
            grid = self.grid(method)
            if not grid or min(grid) < 1:
                raise ConfigError(f"m-grid for {method} must list integers >= 1, got {grid}")

    def grid(self, method: str) -> list[int]:
        return list(self.m_grids.get(method, self.m_grids.get("default", [])))

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)


def _bool(section, key, default):
    try:
        return section.getboolean(key, fallback=default)
    except ValueError as exc:
        raise ConfigError(f"{key} must be a boolean") from exc


def load_config(path) -> ExperimentConfig:
    """Read an INI experiment file; malformed content raises :class:`ConfigError`."""
    path = Path(path)
    parser = configparser.ConfigParser()
    try:
        with path.open() as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not parser.has_section("problem"):
        raise ConfigError(f"{path}: missing [problem] section")
    prob = dict(parser["problem"])
    kind = prob.pop("kind", None)
    if kind is None:
        raise ConfigError(f"{path}: [problem] needs a kind")
    params = {k: _parse_value(k, v) for k, v in prob.items()}
    run = parser["run"] if parser.has_section("run") else parser["DEFAULT"]
    grids = {k: parse_int_list(v) for k, v in parser["m_grid"].items()} if parser.has_section("m_grid") else {}
    kw = {}
    try:
        if "methods" in run:
            kw["methods"] = tuple(s.strip() for s in run["methods"].split(",") if s.strip())
        for key, conv in (("samples", int), ("seed", int), ("workers", int), ("rel_tol", float)):
            if key in run:
                kw[key] = conv(run[key])
        if "out" in run:
            kw["out"] = run["out"]
        kw["timing"] = _bool(run, "timing", True)
        kw["couple"] = _bool(run, "couple", False)
        if parser.has_section("trajectory"):
            sec = parser["trajectory"]
            kw["trajectory_scheme"] = sec.get("scheme", "em")
            kw["trajectory_steps"] = sec.getint("steps", 1000)
        if parser.has_section("gallery"):
            sec = parser["gallery"]
            kw["gallery_method"] = sec.get("method", "kl_sylvester")
            kw["gallery_m"] = sec.getint("m", 64)
            kw["realizations"] = sec.getint("realizations", 4)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return ExperimentConfig(problem_kind=kind, params=params, m_grids=grids,
                            base_dir=path.parent, **kw)
