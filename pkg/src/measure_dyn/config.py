"""Experiment configuration: a JSON document plus ``--set key=value`` overrides."""
from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .composition import CompactWindow, weight_from_preset
from .markov import QUADRATURE_RULES, kernel_from_preset
from .measures import AtomicMeasure

COMMANDS = ("transitivity", "cosine", "chaos", "mixing", "periodic", "markov", "all-paper")
NEEDS_WINDOW = ("transitivity", "cosine", "chaos")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    command: str
    weight_system: str = "paper"
    window: dict | None = None
    n_max: int = 60
    tol: float = 1e-2
    n: int = 50
    N: int = 30
    L: int = 10
    mu: list = field(default_factory=lambda: [{"x": 0.0, "re": 1.0, "im": 0.0}])
    v: list = field(default_factory=lambda: [{"x": 0.5, "re": 1.0, "im": 0.0}])
    kernel: str = "paper-sine"
    domain: list | None = None
    grid_size: int = 2048
    quadrature: str = "simpson"
    start: str = "uniform"
    markov_tol: float = 1e-10
    max_iter: int = 10_000
    trials: int = 500
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    # typed views, valid after validate()
    def compact_window(self) -> CompactWindow:
        w = self.window
        return CompactWindow(float(w["lo"]), float(w["hi"]), int(w.get("grid_points", 4001)))

    def measure(self, name: str) -> AtomicMeasure:
        return AtomicMeasure.from_records(getattr(self, name))


def parse_override(item: str) -> tuple[list[str], Any]:
    key, sep, raw = item.partition("=")
    if not sep or not key:
        raise ConfigError(f"--set expects key=value, got {item!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.split("."), value


def apply_overrides(doc: dict, overrides: list[str]) -> dict:
    doc = copy.deepcopy(doc)
    for item in overrides:
        path, value = parse_override(item)
        node = doc
        for part in path[:-1]:
            nxt = node.get(part)
            if nxt is None:
                nxt = node[part] = {}
            if not isinstance(nxt, dict):
                raise ConfigError(f"--set {item!r}: {part!r} is not an object")
            node = nxt
        node[path[-1]] = value
    return doc


def load_config(command: str, path: str | Path | None, overrides: list[str]) -> ExperimentConfig:
    doc: dict = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
    doc = apply_overrides(doc, overrides)
    if doc.get("command", command) != command:
        raise ConfigError(f"config command {doc['command']!r} does not match {command!r}")
    doc["command"] = command
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    cfg = ExperimentConfig(**doc)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    if cfg.command not in COMMANDS:
        raise ConfigError(f"unknown command {cfg.command!r}; expected one of {COMMANDS}")
    try:
        _validate(cfg)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def _positive_int(name: str, value: Any) -> None:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ConfigError(f"{name} must be a positive integer, got {value!r}")


def _positive(name: str, value: Any) -> None:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
        raise ConfigError(f"{name} must be > 0, got {value!r}")


def _validate(cfg: ExperimentConfig) -> None:
    c = cfg.command
    if c in NEEDS_WINDOW:
        if not isinstance(cfg.window, dict) or not {"lo", "hi"} <= set(cfg.window):
            raise ConfigError(f"{c} needs window {{lo, hi[, grid_points]}}")
        cfg.compact_window()
    if c in NEEDS_WINDOW + ("mixing", "periodic"):
        weight_from_preset(cfg.weight_system)
    if c in NEEDS_WINDOW:
        _positive_int("n_max", cfg.n_max)
        _positive("tol", cfg.tol)
    if c == "mixing":
        _positive_int("n", cfg.n)
        cfg.measure("mu"), cfg.measure("v")
    if c == "periodic":
        _positive_int("N", cfg.N)
        _positive_int("L", cfg.L)
        cfg.measure("mu")
    if c == "markov":
        _positive_int("grid_size", cfg.grid_size)
        _positive_int("max_iter", cfg.max_iter)
        _positive_int("trials", cfg.trials)
        _positive("markov_tol", cfg.markov_tol)
        if cfg.quadrature not in QUADRATURE_RULES:
            raise ConfigError(f"unknown quadrature {cfg.quadrature!r}")
        if cfg.domain is not None and (len(cfg.domain) != 2 or not cfg.domain[0] < cfg.domain[1]):
            raise ConfigError("domain must be [a, b] with a < b")
        if not (cfg.start == "uniform" or cfg.start.startswith("point:")):
            raise ConfigError("start must be 'uniform' or 'point:<x>'")
        if cfg.start.startswith("point:"):
            float(cfg.start.partition(":")[2])
        if not cfg.kernel.startswith("table:"):
            kernel_from_preset(cfg.kernel, P=3, domain=_domain(cfg), rule=cfg.quadrature)


def _domain(cfg: ExperimentConfig):
    return tuple(float(t) for t in cfg.domain) if cfg.domain is not None else None
