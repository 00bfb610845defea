"""Named experiment presets and the cell runner."""
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..core import CountedOperator
from ..operators import coerce_param, build_operator
from ..solvers import SolverConfig, run_solver
from .export import atomic_write_text, export_trace

logger = logging.getLogger(__name__)

DEFAULT_SEED = 42
GHAL_BETA = 0.975
GHAL_BETA_PRIME = 1 / 1.01
_BASE_ALGOS = ("picard", "halpern", "restarted", "adaghal")
_SOLVER_KEYS = {"target_eps": float, "max_queries": int, "beta": float, "beta_prime": float,
                "lambda": float, "D": float, "mu": float, "halt_mode": str, "trace_every": int}


def resolve_seed(seed=None):
    if seed is not None:
        return int(seed)
    env = os.environ.get("FPLAB_SEED")
    return int(env) if env else DEFAULT_SEED


def _fmt_param(value):
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


def _rotation(p):
    return "rotation_hard", {"d": p["d"], "gamma": p["gamma"], **_extra(p, "s", "literal")}


def _fig2(p):
    return "rotation_slope", {"d": p["d"], "m_near": 1.0, "m_far": p["c"], **_extra(p, "s", "odd")}


def _fig3(p):
    return "rotation_slope", {"d": p["d"], "m_near": p["c"], "m_far": 1.0, **_extra(p, "s", "odd")}


def _fig4(p):
    return "ball_rotation_scale", {"d": p["d"], "gamma": p["gamma"], "c": p["c"], **_extra(p, "s")}


def _extra(p, *keys):
    return {k: p[k] for k in keys if k in p}


@dataclass
class ExperimentPreset:
    """A grid of operator parameters crossed with a list of algorithms.

    ``grid`` maps each cell parameter to its values in naming order;
    ``builder`` turns one grid point (plus fixed extras) into a registry
    operator name and parameter map.
    """

    name: str
    builder: object
    grid: dict
    algorithms: tuple = _BASE_ALGOS
    solver: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    x0_fill: float = 0.0

    def points(self):
        keys = list(self.grid)
        points = [{}]
        for key in keys:
            points = [{**p, key: v} for p in points for v in self.grid[key]]
        return points

    def config(self):
        kw = {("lam" if k == "lambda" else k): v for k, v in self.solver.items()}
        return SolverConfig(**kw)

    def with_overrides(self, overrides):
        """Copy with ``key=value`` overrides applied.

        Grid keys replace the grid axis (comma-separated values allowed),
        solver keys go to :class:`SolverConfig`, ``algorithms`` replaces the
        algorithm list, ``x0`` sets the constant fill of the initial point,
        anything the builder accepts (``s``, ``literal``, ``odd``) is passed
        through.
        """
        grid = dict(self.grid)
        solver = dict(self.solver)
        extras = dict(self.extras)
        algorithms = self.algorithms
        x0_fill = self.x0_fill
        for key, raw in (overrides or {}).items():
            if key in grid:
                cast = int if key == "d" else float
                grid[key] = tuple(cast(v) for v in str(raw).split(","))
            elif key in _SOLVER_KEYS:
                solver[key] = _SOLVER_KEYS[key](raw)
            elif key == "algorithms":
                algorithms = tuple(a.strip() for a in str(raw).split(",") if a.strip())
            elif key == "x0":
                x0_fill = float(raw)
            elif key == "s":
                extras[key] = float(raw)
            elif key in ("literal", "odd"):
                extras[key] = str(raw).strip().lower() in ("1", "true", "yes")
            else:
                raise KeyError(f"unknown override {key!r} for preset {self.name}")
        return ExperimentPreset(self.name, self.builder, grid, algorithms, solver, extras, x0_fill)

    def cells(self):
        """Yield ``(stem, operator_name, operator_params, algorithm)`` per cell."""
        for point in self.points():
            op_name, params = self.builder({**point, **self.extras})
            tag = "_".join(f"{k}{_fmt_param(v)}" for k, v in point.items())
            for algo in self.algorithms:
                yield f"{self.name}_{tag}_{algo}".lower(), op_name, params, algo


def _fig1(name, gamma):
    return ExperimentPreset(name, _rotation, {"d": (500,), "gamma": (gamma,)},
                            solver={"target_eps": 1e-8, "max_queries": 10_000})


PRESETS = {
    "fig1a": _fig1("fig1a", 1.0),
    "fig1b": _fig1("fig1b", 10 / 11),
    "fig1c": _fig1("fig1c", 5 / 6),
    "fig2": ExperimentPreset("fig2", _fig2, {"d": (500,), "c": (0.25, 0.5, 0.75)},
                             solver={"target_eps": 1e-8, "max_queries": 10_000}),
    "fig3": ExperimentPreset("fig3", _fig3, {"d": (500,), "c": (0.25, 0.5, 0.75)},
                             solver={"target_eps": 1e-8, "max_queries": 10_000}),
    "fig4": ExperimentPreset("fig4", _fig4,
                             {"d": (100,), "c": (0.1, 0.5, 0.9),
                              "gamma": (1 + 1e-4, 1 + 1e-3, 1 + 1e-2)},
                             algorithms=_BASE_ALGOS + ("ghal",),
                             solver={"target_eps": 1e-8, "max_queries": 100_000, "D": 2.0,
                                     "beta": GHAL_BETA, "beta_prime": GHAL_BETA_PRIME,
                                     "halt_mode": "break_revert"}),
}


def get_preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None


def operator_label(op_name, params):
    inner = ";".join(f"{k}={_fmt_param(v)}" for k, v in params.items())
    return f"{op_name}[{inner}]"


def run_cell(op_name, params, algorithm, cfg, x0_fill=0.0):
    """Build a fresh counted operator and run one solver on it.

    `x0_fill` is either a scalar filling every coordinate or a full vector.
    """
    params = {k: coerce_param(k, v) for k, v in params.items()}
    spec = build_operator(op_name, params)
    op = CountedOperator(spec)
    if np.ndim(x0_fill) == 0:
        x0 = np.full(spec.dim, float(x0_fill))
    else:
        x0 = np.asarray(x0_fill, dtype=np.float64)
    result = run_solver(algorithm, op, x0, cfg)
    result.extras["operator"] = operator_label(op_name, params)
    return result


def _cell_job(args):
    stem, op_name, params, algo, cfg, x0_fill, out_dir, seed = args
    result = run_cell(op_name, params, algo, cfg, x0_fill)
    path = Path(out_dir) / f"{stem}.csv"
    export_trace(result, path, "csv", comment=f"seed={seed}")
    return stem, path, result


def run_preset(name, out_dir, overrides=None, seed=None, jobs=1):
    """Run every cell of a preset, writing one CSV per cell and a summary.

    Returns a list of ``(stem, path, RunResult)`` in cell order.
    """
    preset = get_preset(name).with_overrides(overrides)
    seed = resolve_seed(seed)
    cfg = preset.config()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs_args = [(stem, op_name, params, algo, cfg, preset.x0_fill, str(out_dir), seed)
                 for stem, op_name, params, algo in preset.cells()]
    if jobs > 1 and len(jobs_args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_cell_job, jobs_args))
    else:
        results = [_cell_job(a) for a in jobs_args]
    lines = [f"# seed={seed}", "cell,algorithm,operator,final_residual,total_queries,termination"]
    for stem, _, res in results:
        lines.append(f"{stem},{res.algorithm},\"{res.extras['operator']}\","
                     f"{format(res.final_residual, '.17g')},{res.total_queries},"
                     f"{res.termination.value}")
        logger.info("%s: %s after %d queries, residual %.3e", stem, res.termination.value,
                    res.total_queries, res.final_residual)
    atomic_write_text(out_dir / f"{preset.name}_summary.csv", "\n".join(lines) + "\n")
    return results
