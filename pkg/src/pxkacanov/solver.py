"""Damped Kacanov iteration for the relaxed problem.

One step solves ``A_eps[u^n] (u^{n+1} - u^n) = -delta F_eps(u^n)`` on the
interior vertices.  Iteration stops once ``||grad(u^{n+1} - u^n)||`` drops
below ``outer_tol``.
"""
from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .fem import (MIDEDGE, FemFunction, QuadratureRule, SourceTerm,
                  assemble_load, assemble_weighted_stiffness, energy_relaxed,
                  energy_unrelaxed, exponent_at_quadrature, h1_seminorm_diff)
from .kernels import ExponentField, RelaxationPair
from .linalg import CgReport, InnerSolverError, cg_solve

log = logging.getLogger(__name__)


@dataclass
class KacanovConfig:
    damping: Literal["fixed", "theory_safe"] = "fixed"
    delta: float = 0.9
    safety: float = 0.5
    outer_tol: float = 1e-10
    max_outer: int = 1000
    inner_rel_tol: float = 1e-12
    inner_max_iter: int | None = None

    def __post_init__(self):
        if self.damping == "fixed":
            if not (0.0 < self.delta <= 1.0):
                raise ValueError(f"fixed damping needs 0 < delta <= 1, got {self.delta}")
        elif self.damping == "theory_safe":
            if not (0.0 < self.safety < 1.0):
                raise ValueError(f"safety factor must lie in (0, 1), got {self.safety}")
        else:
            raise ValueError(f"unknown damping mode {self.damping!r}")

    def damping_for(self, eps: RelaxationPair) -> float:
        if self.damping == "fixed":
            return self.delta
        return self.safety * eps.delta_max


@dataclass
class StepInfo:
    step_norm: float
    delta: float
    cg: CgReport


@dataclass
class IterationRecord:
    n: int
    step_norm: float
    energy_relaxed: float
    energy_unrelaxed: float
    cg_iterations: int


@dataclass
class IterationTrace:
    records: list[IterationRecord] = field(default_factory=list)
    converged: bool = False
    delta: float = math.nan
    final_energy_relaxed: float = math.nan
    final_energy_unrelaxed: float = math.nan

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def step_norms(self) -> np.ndarray:
        return np.array([r.step_norm for r in self.records])

    @property
    def energies(self) -> np.ndarray:
        """Relaxed energies of ``u^0, ..., u^N`` (final iterate included)."""
        return np.array([r.energy_relaxed for r in self.records] + [self.final_energy_relaxed])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("n,step_norm,energy_relaxed,energy_unrelaxed,cg_iters\n")
        for r in self.records:
            buf.write(f"{r.n},{r.step_norm:.17e},{r.energy_relaxed:.17e},"
                      f"{r.energy_unrelaxed:.17e},{r.cg_iterations}\n")
        return buf.getvalue()


def gamma_lower_bound(eps: RelaxationPair, delta: float) -> float:
    """Guaranteed energy decrease per squared step norm; positive iff ``delta < delta_max``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    return eps.mu_minus / delta - math.sqrt(3.0) * eps.xi_plus / 2.0


def kacanov_step(u: FemFunction, p: ExponentField, eps: RelaxationPair, load: np.ndarray,
                 cfg: KacanovConfig, quad: QuadratureRule = MIDEDGE,
                 pq: np.ndarray | None = None) -> tuple[FemFunction, StepInfo]:
    mesh = u.mesh
    delta = cfg.damping_for(eps)
    a = assemble_weighted_stiffness(mesh, p, eps, u, quad, pq)
    # A_eps[u] u - l_f reuses the matrix just assembled
    res = a.csr @ u.interior_values - load
    d, report = cg_solve(a, -delta * res, cfg.inner_rel_tol, cfg.inner_max_iter)
    if not report.converged:
        raise InnerSolverError(report)
    coeffs = u.coeffs.copy()
    coeffs[mesh.interior] += d
    new = FemFunction(mesh, coeffs)
    return new, StepInfo(h1_seminorm_diff(new, u), delta, report)


def solve_relaxed(u0: FemFunction, p: ExponentField, eps: RelaxationPair, f,
                  cfg: KacanovConfig | None = None, quad: QuadratureRule = MIDEDGE,
                  callback: Callable[[int, FemFunction], None] | None = None,
                  record_energy: bool = True) -> tuple[FemFunction, IterationTrace]:
    """Iterate :func:`kacanov_step` from ``u0``.

    ``f`` is a :class:`SourceTerm` or an assembled interior load vector.
    ``callback(n, u_n)`` sees every iterate, ``u0`` included.  Hitting
    ``max_outer`` leaves ``trace.converged`` false; no exception.
    """
    cfg = cfg or KacanovConfig()
    mesh = u0.mesh
    load = assemble_load(mesh, f, quad) if isinstance(f, SourceTerm) else np.asarray(f, float)
    pq = exponent_at_quadrature(mesh, p, quad)
    trace = IterationTrace(delta=cfg.damping_for(eps))

    def energies(v):
        if not record_energy:
            return math.nan, math.nan
        return (energy_relaxed(mesh, p, eps, v, load, quad, pq),
                energy_unrelaxed(mesh, p, v, load, quad, pq))

    u = u0
    if callback is not None:
        callback(0, u)
    for n in range(cfg.max_outer):
        e_rel, e_unrel = energies(u)
        u_next, info = kacanov_step(u, p, eps, load, cfg, quad, pq)
        trace.records.append(IterationRecord(n, info.step_norm, e_rel, e_unrel,
                                             info.cg.iterations))
        u = u_next
        if callback is not None:
            callback(n + 1, u)
        if info.step_norm < cfg.outer_tol:
            trace.converged = True
            break
    else:
        if cfg.outer_tol > 0:
            log.warning("Kacanov iteration stopped after %d steps (last step %.3e)",
                        cfg.max_outer,
                        trace.records[-1].step_norm if trace.records else math.nan)
    trace.final_energy_relaxed, trace.final_energy_unrelaxed = energies(u)
    return u, trace
