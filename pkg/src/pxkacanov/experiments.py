"""Drivers for the three convergence studies.

* experiment 1: error of Kacanov iterates to a long-run reference solution
* experiment 2: error of relaxed solutions with ``eps = base^(-k), base^k``
  to the reference solution, as ``k`` grows
* experiment 3: H1 error to the exact solution under uniform refinement
"""
from __future__ import annotations

import dataclasses
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .fem import (DUNAVANT7, FemFunction, assemble_load,
                  h1_error_to_exact, h1_seminorm_diff)
from .kernels import derive_constants
from .linalg import InnerSolverError
from .mesh import TriMesh, prolongate, refine, refine_uniform, structured_rectangle
from .problems import ModelProblem, get_problem
from .solver import KacanovConfig, solve_relaxed

log = logging.getLogger(__name__)

# largest fixed damping that converges without tuning on each problem
DEFAULT_DELTA = {"meq1": 0.9, "meq2": 0.4, "poisson": 0.9}


@dataclass
class ExperimentConfig:
    problem: str = "meq1"
    mesh_n: int = 64
    refines: int = 0
    eps_minus: float = 1e-6
    eps_plus: float = 1e6
    damping: str = "fixed"
    delta: float | None = None
    safety: float = 0.5
    tol: float = 1e-10
    max_iter: int = 1000
    inner_tol: float = 1e-12
    ref_iterations: int = 300
    init: str = "auto"
    k_min: int = 1
    k_max: int = 40
    base: float = 1.4
    warm_start: bool = False
    element_cap: int = 2 ** 20
    seed: int = 0
    out: str = ""

    def __post_init__(self):
        if self.mesh_n < 1 or self.refines < 0:
            raise ValueError("mesh_n must be >= 1 and refines >= 0")
        elements = 2 * self.mesh_n ** 2 * 4 ** self.refines
        if elements > self.element_cap:
            raise ValueError(f"mesh would have {elements} elements, cap is {self.element_cap}")
        if self.k_min < 1 or self.k_max < self.k_min:
            raise ValueError(f"need 1 <= k_min <= k_max, got {self.k_min}..{self.k_max}")
        if not self.base > 1.0:
            raise ValueError("relaxation base must exceed 1")
        if self.init not in ("auto", "zero", "exact", "sinxy", "prolongate"):
            raise ValueError(f"unknown init {self.init!r}")

    @property
    def model(self) -> ModelProblem:
        return get_problem(self.problem)

    def solver_config(self) -> KacanovConfig:
        delta = self.delta if self.delta is not None else DEFAULT_DELTA.get(self.problem, 0.9)
        return KacanovConfig(damping=self.damping, delta=delta, safety=self.safety,
                             outer_tol=self.tol, max_outer=self.max_iter,
                             inner_rel_tol=self.inner_tol)

    def mesh(self) -> TriMesh:
        return refine(structured_rectangle(*self.model.bounds, self.mesh_n), self.refines)

    # --- key=value config files ------------------------------------------

    @classmethod
    def from_mapping(cls, values: dict[str, Any]) -> "ExperimentConfig":
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            key = key.replace("-", "_")
            if key not in types:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(types[key], raw)
        return cls(**kwargs)

    @classmethod
    def read(cls, path, **overrides) -> "ExperimentConfig":
        values = parse_key_values(Path(path).read_text())
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_mapping(values)

    def to_text(self) -> str:
        return "".join(f"{f.name} = {getattr(self, f.name)}\n"
                       for f in dataclasses.fields(self))


def parse_key_values(text: str) -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {line!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        values[key] = val
    return values


def _coerce(typ: str, raw):
    if not isinstance(raw, str):
        return raw
    if raw.lower() in ("none", ""):
        if "None" in typ:
            return None
    if typ.startswith("bool"):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if typ.startswith("int"):
        return int(raw)
    if typ.startswith("float"):
        return float(raw)
    return raw


@dataclass
class ExperimentResult:
    columns: list[str]
    rows: list[tuple] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        return buf.getvalue()

    def write(self, path) -> None:
        Path(path).write_text(self.to_csv())


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17e}"


def _sinxy(x, y):
    return np.sin(np.pi * x * y)


def initial_guess(cfg: ExperimentConfig, mesh: TriMesh, kind: str | None = None) -> FemFunction:
    kind = kind or cfg.init
    if kind == "auto":
        kind = "sinxy" if cfg.problem == "meq2" else "zero"
    if kind == "zero":
        return FemFunction.zeros(mesh)
    if kind == "exact":
        return FemFunction.interpolate(mesh, cfg.model.exact_solution)
    if kind == "sinxy":
        return FemFunction.interpolate(mesh, _sinxy)
    raise ValueError(f"initial guess {kind!r} is not available here")


def reference_solution(cfg: ExperimentConfig, mesh: TriMesh, load: np.ndarray) -> FemFunction:
    """``ref_iterations`` Kacanov steps from the interpolant of the exact solution."""
    model = cfg.model
    eps = derive_constants(model.exponent, cfg.eps_minus, cfg.eps_plus)
    scfg = dataclasses.replace(cfg.solver_config(), outer_tol=0.0,
                               max_outer=cfg.ref_iterations)
    u0 = FemFunction.interpolate(mesh, model.exact_solution)
    u, _ = solve_relaxed(u0, model.exponent, eps, load, scfg, record_energy=False)
    return u


def run_experiment1(cfg: ExperimentConfig) -> ExperimentResult:
    """Error ``||grad(u_ref - u^n)||`` along the damped Kacanov iteration."""
    model = cfg.model
    mesh = cfg.mesh()
    load = assemble_load(mesh, model.source)
    ref = reference_solution(cfg, mesh, load)
    eps = derive_constants(model.exponent, cfg.eps_minus, cfg.eps_plus)
    errors: list[float] = []
    _, trace = solve_relaxed(initial_guess(cfg, mesh), model.exponent, eps, load,
                             cfg.solver_config(), record_energy=False,
                             callback=lambda n, u: errors.append(h1_seminorm_diff(ref, u)))
    result = ExperimentResult(["n", "error", "step_norm"])
    # step_norm of row n is |u^{n+1} - u^n|; the last iterate has no step
    steps = list(trace.step_norms) + [0.0]
    result.rows.extend((n, e, s) for n, (e, s) in enumerate(zip(errors, steps)))
    return result


def run_experiment2(cfg: ExperimentConfig) -> ExperimentResult:
    """Error of relaxed solutions to the reference as the cut-offs widen."""
    model = cfg.model
    mesh = cfg.mesh()
    load = assemble_load(mesh, model.source)
    ref = reference_solution(cfg, mesh, load)
    scfg = cfg.solver_config()
    result = ExperimentResult(["k", "eps_minus", "eps_plus", "iterations", "converged", "error"])
    u_prev = None
    for k in range(cfg.k_min, cfg.k_max + 1):
        eps = derive_constants(model.exponent, cfg.base ** (-k), cfg.base ** k)
        u0 = u_prev if (cfg.warm_start and u_prev is not None) else FemFunction.zeros(mesh)
        try:
            u, trace = solve_relaxed(u0, model.exponent, eps, load, scfg, record_energy=False)
        except InnerSolverError as exc:
            log.warning("k=%d: %s", k, exc)
            result.rows.append((k, eps.eps_minus, eps.eps_plus, 0, False, math.nan))
            continue
        u_prev = u
        result.rows.append((k, eps.eps_minus, eps.eps_plus, trace.iterations,
                            trace.converged, h1_seminorm_diff(u, ref)))
    return result


def run_experiment3(cfg: ExperimentConfig) -> ExperimentResult:
    """H1 error to the exact solution on a chain of red refinements.

    ``mesh_n`` sets the coarse mesh and ``refines`` the number of further
    levels.  Each level starts from the prolongated previous solution
    unless ``init`` names another guess.
    """
    model = cfg.model
    eps = derive_constants(model.exponent, cfg.eps_minus, cfg.eps_plus)
    scfg = cfg.solver_config()
    mesh = structured_rectangle(*model.bounds, cfg.mesh_n)
    result = ExperimentResult(["level", "elements", "h", "iterations", "converged",
                               "error", "rate"])
    u_prev = None
    err_prev = math.nan
    for level in range(cfg.refines + 1):
        if level > 0:
            mesh = refine_uniform(mesh)
        if cfg.init in ("auto", "prolongate") and u_prev is not None:
            c = prolongate(u_prev.coeffs, mesh)
            c[mesh.boundary] = 0.0
            u0 = FemFunction(mesh, c)
        else:
            kind = "zero" if cfg.init in ("auto", "prolongate") else cfg.init
            u0 = initial_guess(cfg, mesh, kind)
        u, trace = solve_relaxed(u0, model.exponent, eps, model.source, scfg,
                                 record_energy=False)
        err = h1_error_to_exact(u, model.exact_gradient, DUNAVANT7)
        rate = math.log2(err_prev / err) if level > 0 else math.nan
        result.rows.append((level, mesh.n_triangles, mesh.h_max, trace.iterations,
                            trace.converged, err, 0.0 if level == 0 else rate))
        u_prev, err_prev = u, err
    return result


RUNNERS = {"exp1": run_experiment1, "exp2": run_experiment2, "exp3": run_experiment3}
