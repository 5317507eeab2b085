"""Experiment configuration: TOML (or JSON) files mapped onto problem objects.

A config has four sections.  ``[problem]`` names the family, grid, and the
catalog entries with their parameters; ``[task]`` picks exactly one action
(solve, sweep, certify_choquard, certify_quasilinear, rho0, audit,
surgery_demo) with its parameters; ``[solver]`` holds SolveConfig fields;
``[output]`` the output directory.  Dotted-path overrides (``task.c=2.0``)
are applied after parsing, with values read as TOML literals.

Validation failures raise ConfigError with the offending field named; the
command-line driver maps that to exit code 2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

import numpy as np

try:
    import tomllib  # py >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .catalog import make_constraint, make_lagrangian, make_nonlinearity
from .energy import ProblemSpec, make_problem
from .grid import GridSpec, cylindrical_grid, line_grid, radial_grid
from .solve import SolveConfig

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "apply_overrides"]

TASKS = (
    "solve",
    "sweep",
    "certify_choquard",
    "certify_quasilinear",
    "rho0",
    "audit",
    "surgery_demo",
)


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


@dataclass
class ExperimentConfig:
    raw: dict
    path: str = "<inline>"

    @property
    def task_type(self) -> str:
        return self.raw["task"]["type"]

    @property
    def task(self) -> dict:
        return self.raw["task"]

    @property
    def out_dir(self) -> str:
        return self.raw.get("output", {}).get("dir", "out")

    def grid(self) -> GridSpec:
        g = self.raw["problem"]["grid"]
        kind = g.get("kind")
        try:
            if kind == "line":
                return line_grid(float(g.get("extent", 40.0)), int(g.get("nodes", 4096)))
            if kind == "radial":
                return radial_grid(
                    int(g.get("dim", 3)), float(g.get("extent", 20.0)), int(g.get("nodes", 4096))
                )
            if kind == "cylindrical":
                extent = g.get("extent", [20.0, 20.0])
                nodes = g.get("nodes", [256, 256])
                if not (isinstance(extent, (list, tuple)) and len(extent) == 2):
                    raise ConfigError("problem.grid.extent must be a pair for cylindrical grids")
                if not (isinstance(nodes, (list, tuple)) and len(nodes) == 2):
                    raise ConfigError("problem.grid.nodes must be a pair for cylindrical grids")
                return cylindrical_grid(
                    int(g.get("split", 2)),
                    int(g.get("dim", 3)),
                    float(extent[0]),
                    float(extent[1]),
                    (int(nodes[0]), int(nodes[1])),
                )
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"problem.grid: {exc}") from exc
        raise ConfigError(f"problem.grid.kind: unknown kind {kind!r}")

    def problem(self) -> ProblemSpec:
        prob = self.raw["problem"]
        family = prob.get("family")
        if family not in ("choquard", "quasilinear", "stuart", "badiale_rolando"):
            raise ConfigError(f"problem.family: unknown family {family!r}")
        grid = self.grid()
        lag_section = prob.get("lagrangian", {"name": "j_quadratic"})
        if isinstance(lag_section, dict):
            lag_section = [lag_section]
        lagrangians = []
        for entry in lag_section:
            name = entry.get("name")
            params = {k: v for k, v in entry.items() if k != "name"}
            try:
                lagrangians.append(make_lagrangian(name, **params))
            except KeyError as exc:
                raise ConfigError(f"problem.lagrangian.name: {exc.args[0]}") from exc
        nl = None
        if "nonlinearity" in prob:
            entry = prob["nonlinearity"]
            name = entry.get("name")
            params = {k: v for k, v in entry.items() if k != "name"}
            try:
                nl = make_nonlinearity(name, **params)
            except KeyError as exc:
                raise ConfigError(f"problem.nonlinearity.name: {exc.args[0]}") from exc
            if nl.m != len(lagrangians):
                if len(lagrangians) == 1 and nl.m > 1:
                    lagrangians = lagrangians * nl.m
                else:
                    raise ConfigError(
                        "problem.nonlinearity.m does not match the number of lagrangians"
                    )
        con_entry = prob.get("constraint", {"name": "G_square"})
        name = con_entry.get("name")
        params = {k: v for k, v in con_entry.items() if k != "name"}
        try:
            constraint = make_constraint(name, **params)
        except KeyError as exc:
            raise ConfigError(f"problem.constraint.name: {exc.args[0]}") from exc
        try:
            return make_problem(
                family,
                grid,
                tuple(lagrangians),
                constraint,
                nl,
                mu=float(prob.get("mu", 0.0)),
            )
        except ValueError as exc:
            raise ConfigError(f"problem: {exc}") from exc

    def solve_config(self) -> SolveConfig:
        s = self.raw.get("solver", {})
        known = {
            "max_iters",
            "tau0",
            "backtrack",
            "stall_tol",
            "stall_window",
            "grad_tol",
            "symmetrize_every",
            "seed",
            "tau_grow",
            "tau_max",
            "coarse_init",
        }
        unknown = set(s) - known
        if unknown:
            raise ConfigError(f"solver: unknown fields {sorted(unknown)}")
        try:
            return SolveConfig(**s)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"solver: {exc}") from exc

    def param_grid(self, key: str, default=None) -> np.ndarray:
        """A task parameter grid: explicit list or {min, max, count} geometric."""
        spec = self.task.get(key, default)
        if spec is None:
            raise ConfigError(f"task.{key}: missing parameter grid")
        if isinstance(spec, dict):
            try:
                return np.geomspace(float(spec["min"]), float(spec["max"]), int(spec["count"]))
            except KeyError as exc:
                raise ConfigError(f"task.{key}: needs min/max/count") from exc
        vals = np.asarray([float(v) for v in spec], dtype=float)
        if vals.size == 0:
            raise ConfigError(f"task.{key}: empty grid")
        return vals

    def validate(self) -> None:
        if "problem" not in self.raw:
            raise ConfigError("missing [problem] section")
        if "task" not in self.raw or "type" not in self.raw["task"]:
            raise ConfigError("missing [task] section with a type")
        ttype = self.raw["task"]["type"]
        if ttype not in TASKS:
            raise ConfigError(f"task.type: unknown task {ttype!r}")
        if ttype == "solve" and "c" not in self.task:
            raise ConfigError("task.c: required for task solve")
        if ttype == "sweep":
            c_list = self.task.get("c_list")
            if not c_list:
                raise ConfigError("task.c_list: required and nonempty for task sweep")
        if ttype == "rho0" and "rho_bracket" not in self.task:
            raise ConfigError("task.rho_bracket: required for task rho0")
        self.problem()
        self.solve_config()


def _parse_literal(text: str) -> Any:
    """Parse an override value as a TOML literal (falls back to string)."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(cfg: ExperimentConfig, overrides) -> ExperimentConfig:
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        path, _, value = item.partition("=")
        keys = path.strip().split(".")
        node = cfg.raw
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {path!r} crosses a non-table value")
        node[keys[-1]] = _parse_literal(value.strip())
    return cfg


def load_config(path: str) -> ExperimentConfig:
    text = open(path, "rb").read()
    if str(path).endswith(".json") or text.lstrip()[:1] == b"{":
        raw = json.loads(text.decode())
    else:
        try:
            raw = tomllib.loads(text.decode())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return ExperimentConfig(raw=raw, path=str(path))
