"""Manufactured model problems with exact solution sin(pi x) sin(pi y)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fem import SourceTerm
from .kernels import ExponentField

G_FLOOR = 1e-13

PI = np.pi


def sine_solution(x, y):
    return np.sin(PI * x) * np.sin(PI * y)


def sine_gradient(x, y):
    return (PI * np.cos(PI * x) * np.sin(PI * y),
            PI * np.sin(PI * x) * np.cos(PI * y))


def sine_hessian(x, y):
    u = sine_solution(x, y)
    uxy = PI ** 2 * np.cos(PI * x) * np.cos(PI * y)
    return -PI ** 2 * u, uxy, -PI ** 2 * u


@dataclass(frozen=True)
class ModelProblem:
    name: str
    bounds: tuple[float, float, float, float]
    exponent: ExponentField
    exact_solution: Callable
    exact_gradient: Callable
    exact_hessian: Callable
    g_floor: float = G_FLOOR

    @property
    def source(self) -> SourceTerm:
        return SourceTerm(lambda x, y: manufactured_source(
            self.exponent, self.exact_gradient, self.exact_hessian, x, y, self.g_floor))


def manufactured_source(p: ExponentField, grad_u, hess_u, x, y, g_floor: float = G_FLOOR):
    """``-div(|grad u|^(p-2) grad u)`` by the chain rule.

    Raises ``ValueError`` where ``|grad u| <= g_floor`` unless ``p == 2``
    identically; the source may be singular there.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ux, uy = grad_u(x, y)
    uxx, uxy, uyy = hess_u(x, y)
    lap = uxx + uyy
    if p.is_constant and p.p_minus == 2.0:
        return -lap
    g = np.sqrt(ux * ux + uy * uy)
    if np.any(g <= g_floor):
        k = np.unravel_index(np.argmin(g), np.shape(g))
        raise ValueError(
            f"|grad u*| = {np.min(g):.3e} at ({np.broadcast_to(x, g.shape)[k]}, "
            f"{np.broadcast_to(y, g.shape)[k]}) is below the floor {g_floor}")
    if p.grad is None:
        raise ValueError("exponent field needs a gradient to manufacture a source")
    pv = p(x, y)
    px, py = p.grad(x, y)
    mu = np.exp((pv - 2.0) * np.log(g))
    gx = (uxx * ux + uxy * uy) / g
    gy = (uxy * ux + uyy * uy) / g
    lng = np.log(g)
    mux = mu * (lng * px + (pv - 2.0) * gx / g)
    muy = mu * (lng * py + (pv - 2.0) * gy / g)
    return -(mux * ux + muy * uy + mu * lap)


def meq1() -> ModelProblem:
    p = ExponentField(
        func=lambda x, y: 2.3 + 0.5 * x + 0.5 * y,
        p_minus=1.3, p_plus=3.3,
        grad=lambda x, y: (np.full(np.broadcast(x, y).shape, 0.5),
                           np.full(np.broadcast(x, y).shape, 0.5)),
        name="2.3+0.5x+0.5y",
    )
    return ModelProblem("meq1", (-1.0, -1.0, 1.0, 1.0), p,
                        sine_solution, sine_gradient, sine_hessian)


def meq2() -> ModelProblem:
    p = ExponentField(
        func=lambda x, y: 1.2 + 2.0 * (x * x + y * y),
        p_minus=1.2, p_plus=5.2,
        grad=lambda x, y: (4.0 * np.asarray(x, float) + 0.0 * y,
                           4.0 * np.asarray(y, float) + 0.0 * x),
        name="1.2+2(x^2+y^2)",
    )
    return ModelProblem("meq2", (0.0, 0.0, 1.0, 1.0), p,
                        sine_solution, sine_gradient, sine_hessian)


def poisson() -> ModelProblem:
    """``p = 2`` on the unit square; the classical P1 benchmark."""
    return ModelProblem("poisson", (0.0, 0.0, 1.0, 1.0), ExponentField.constant(2.0),
                        sine_solution, sine_gradient, sine_hessian)


PROBLEMS = {"meq1": meq1, "meq2": meq2, "poisson": poisson}


def get_problem(name: str) -> ModelProblem:
    try:
        return PROBLEMS[name]()
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
