"""Line-oriented run configuration files.

Each non-blank line is ``section.key = value``; ``#`` starts a comment.
Sections: ``operator`` (``name`` plus builder parameters), ``solver``
(``name`` plus :class:`~fplab.solvers.SolverConfig` fields) and ``run``
(``seed``, ``max_queries``, ``output``, ``trace_every``, ``x0``,
``format``). Example::

    operator.name = rotation_hard
    operator.d = 500
    operator.gamma = 1
    solver.name = adaghal
    solver.target_eps = 1e-8
    run.max_queries = 10000
    run.output = out/fig1a_d500_gamma1_adaghal.csv
"""
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..operators import REGISTRY
from ..solvers import SolverConfig
from .export import export_trace
from .presets import resolve_seed, run_cell

_SOLVER_FIELDS = {"target_eps": float, "eps": float, "max_queries": int, "beta": float,
                  "beta_prime": float, "lambda": float, "lam": float, "D": float, "mu": float,
                  "halt_mode": str, "trace_every": int}
_RUN_FIELDS = {"seed": int, "max_queries": int, "output": str, "trace_every": int,
               "x0": str, "format": str}


class ConfigError(ValueError):
    """Malformed or unresolvable run configuration."""


@dataclass
class RunConfig:
    operator: str
    operator_params: dict
    solver: str
    solver_params: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)

    def solver_config(self):
        kw = {}
        for key, value in self.solver_params.items():
            kw[{"eps": "target_eps", "lambda": "lam"}.get(key, key)] = value
        for key in ("max_queries", "trace_every"):
            if key in self.run:
                kw[key] = self.run[key]
        if self.solver == "ghal" and kw.get("D") is None:
            raise ConfigError("ghal requires D")
        if self.solver == "fixhal" and kw.get("lam") is None:
            raise ConfigError("fixhal requires lambda")
        try:
            return SolverConfig(**kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None


def _number(cast, text, where):
    try:
        if cast is int:
            value = float(text)
            if value != int(value):
                raise ValueError
            return int(value)
        return cast(text)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {text!r} as {cast.__name__}") from None


def parse_config(text, source="<config>"):
    """Parse config text into a :class:`RunConfig`; errors name the line."""
    sections = {"operator": {}, "solver": {}, "run": {}}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        if "=" not in line:
            raise ConfigError(f"{where}: expected 'section.key = value'")
        lhs, value = (part.strip() for part in line.split("=", 1))
        if "." not in lhs:
            raise ConfigError(f"{where}: key {lhs!r} lacks a section prefix")
        section, key = lhs.split(".", 1)
        if section not in sections:
            raise ConfigError(f"{where}: unknown section {section!r}")
        if key in sections[section]:
            raise ConfigError(f"{where}: duplicate key {lhs!r}")
        if not value:
            raise ConfigError(f"{where}: empty value for {lhs!r}")
        if section == "solver" and key != "name":
            if key not in _SOLVER_FIELDS:
                raise ConfigError(f"{where}: unknown solver key {key!r}")
            value = _number(_SOLVER_FIELDS[key], value, where) if _SOLVER_FIELDS[key] is not str \
                else value
        elif section == "run":
            if key not in _RUN_FIELDS:
                raise ConfigError(f"{where}: unknown run key {key!r}")
            if _RUN_FIELDS[key] is not str:
                value = _number(_RUN_FIELDS[key], value, where)
        sections[section][(section, key, lineno)] = value
    flat = {s: {k[1]: v for k, v in d.items()} for s, d in sections.items()}
    lines = {s: {k[1]: k[2] for k in d} for s, d in sections.items()}
    op = flat["operator"].pop("name", None)
    solver = flat["solver"].pop("name", None)
    if op is None:
        raise ConfigError(f"{source}: missing operator.name")
    if solver is None:
        raise ConfigError(f"{source}: missing solver.name")
    if op not in REGISTRY:
        raise ConfigError(f"{source}:{lines['operator']['name']}: unknown operator {op!r}")
    defaults = REGISTRY[op][1]
    for key in flat["operator"]:
        if key not in defaults:
            raise ConfigError(f"{source}:{lines['operator'][key]}: "
                              f"unknown parameter {key!r} for operator {op!r}")
    return RunConfig(op, flat["operator"], solver, flat["solver"], flat["run"])


def load_config(path):
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), str(path))


def _x0(spec_dim, text):
    if text is None:
        return 0.0
    parts = [float(p) for p in text.split(",")]
    if len(parts) == 1:
        return parts[0]
    if len(parts) != spec_dim:
        raise ConfigError(f"x0 has {len(parts)} entries, operator dimension is {spec_dim}")
    return np.array(parts)


def run_config(path, output=None):
    """Execute the single run a config file describes and persist its trace.

    Returns ``(RunResult, path_or_None)``. The output path comes from
    `output`, else ``run.output``; without either nothing is written.
    """
    cfg_file = load_config(path)
    solver_cfg = cfg_file.solver_config()
    from ..operators import build_operator
    from ..solvers import SOLVERS
    if cfg_file.solver not in SOLVERS and cfg_file.solver != "fixhal":
        raise ConfigError(f"unknown solver {cfg_file.solver!r}")
    try:
        spec = build_operator(cfg_file.operator, cfg_file.operator_params)
    except (KeyError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    x0 = _x0(spec.dim, cfg_file.run.get("x0"))
    result = run_cell(cfg_file.operator, cfg_file.operator_params, cfg_file.solver,
                      solver_cfg, x0)
    out = output or cfg_file.run.get("output")
    if out is None:
        return result, None
    seed = resolve_seed(cfg_file.run.get("seed"))
    fmt = cfg_file.run.get("format")
    comment = f"seed={seed}" if (fmt or Path(out).suffix.lstrip(".")) != "jsonl" else None
    return result, export_trace(result, out, fmt, comment=comment)
