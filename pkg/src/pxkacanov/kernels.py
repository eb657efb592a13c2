"""Pointwise kernels of the cut-off relaxation of the p(x)-Laplacian.

Calling convention: ``mu_eps`` and ``phi_eps`` take the *squared* gradient
modulus ``t = |grad u|^2``; ``xi_eps`` and ``xi_prime`` take the modulus
``t = |grad u|`` itself.  Every kernel accepts numpy arrays and broadcasts
the point coordinates against ``t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

ArrayFunc = Callable[[np.ndarray, np.ndarray], np.ndarray]

# slack for checking sampled exponent values against the declared bounds
_BOUND_SLACK = 1e-12


@dataclass(frozen=True)
class ExponentField:
    """Variable exponent ``p(x)`` together with its infimum and supremum.

    ``func(x, y)`` must be numpy-vectorised.  ``grad(x, y)`` is optional and
    only needed to manufacture source terms.
    """

    func: ArrayFunc
    p_minus: float
    p_plus: float
    grad: Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]] | None = None
    name: str = "p"

    def __post_init__(self):
        if not (1.0 < self.p_minus <= self.p_plus < math.inf):
            raise ValueError(
                f"need 1 < p_minus <= p_plus < inf, got {self.p_minus}, {self.p_plus}")

    @classmethod
    def constant(cls, value: float) -> "ExponentField":
        value = float(value)
        return cls(
            func=lambda x, y: np.full(np.broadcast(x, y).shape, value),
            p_minus=value,
            p_plus=value,
            grad=lambda x, y: (np.zeros(np.broadcast(x, y).shape),
                               np.zeros(np.broadcast(x, y).shape)),
            name=f"p={value:g}",
        )

    @property
    def is_constant(self) -> bool:
        return self.p_minus == self.p_plus

    def __call__(self, x, y=None) -> np.ndarray:
        if y is None:
            pts = np.asarray(x, dtype=float)
            x, y = pts[..., 0], pts[..., 1]
        vals = np.asarray(self.func(np.asarray(x, float), np.asarray(y, float)), dtype=float)
        lo = self.p_minus - _BOUND_SLACK
        hi = self.p_plus + _BOUND_SLACK
        if vals.size and (vals.min() < lo or vals.max() > hi):
            raise ValueError(
                f"exponent {self.name} leaves its declared range "
                f"[{self.p_minus}, {self.p_plus}]: sampled [{vals.min()}, {vals.max()}]")
        return vals


@dataclass(frozen=True)
class RelaxationPair:
    """Cut-off pair ``(eps_minus, eps_plus)`` and the constants derived from it.

    Build it with :func:`derive_constants`, which fills the derived fields.
    """

    eps_minus: float
    eps_plus: float
    mu_minus: float = field(default=math.nan)
    mu_plus: float = field(default=math.nan)
    xi_minus: float = field(default=math.nan)
    xi_plus: float = field(default=math.nan)
    delta_max: float = field(default=math.nan)

    def __post_init__(self):
        _check_cutoffs(self.eps_minus, self.eps_plus)


def _check_cutoffs(eps_minus: float, eps_plus: float) -> None:
    if not (0.0 < eps_minus < 1.0 < eps_plus < math.inf):
        raise ValueError(
            f"cut-offs must satisfy 0 < eps_minus < 1 < eps_plus < inf, "
            f"got ({eps_minus}, {eps_plus})")


def derive_constants(p: ExponentField, eps_minus: float, eps_plus: float) -> RelaxationPair:
    """Coefficient bounds, derivative bounds and the largest admissible damping.

    The derivative bounds distinguish whether ``[p_minus, p_plus]`` lies
    below 2, above 2, or straddles 2.
    """
    _check_cutoffs(eps_minus, eps_plus)
    pm, pp = p.p_minus, p.p_plus
    em, ep = float(eps_minus), float(eps_plus)
    mu_minus = min(em ** (pp - 2.0), ep ** (pm - 2.0))
    mu_plus = max(em ** (pm - 2.0), ep ** (pp - 2.0))
    if pp < 2.0:
        xi_minus = (pm - 1.0) * ep ** (pm - 2.0)
        xi_plus = em ** (pm - 2.0)
    elif pm > 2.0:
        xi_minus = em ** (pp - 2.0)
        xi_plus = (pp - 1.0) * ep ** (pp - 2.0)
    else:
        xi_minus = (pm - 1.0) * mu_minus
        xi_plus = (pp - 1.0) * mu_plus
    delta_max = 2.0 * mu_minus / (math.sqrt(3.0) * xi_plus)
    return RelaxationPair(em, ep, mu_minus, mu_plus, xi_minus, xi_plus, delta_max)


def _nonneg(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ValueError("kernel argument t must be nonnegative")
    return t


def _pvals(p: ExponentField, x) -> np.ndarray:
    return p(np.asarray(x, dtype=float))


# The *_from_values helpers work on already evaluated exponents; the
# assembly loops call them directly to avoid re-evaluating p.

def mu_from_values(pv, eps: RelaxationPair, t) -> np.ndarray:
    # clamping t to [eps_-^2, eps_+^2] reproduces all three branches
    tc = np.clip(t, eps.eps_minus ** 2, eps.eps_plus ** 2)
    return np.exp(0.5 * (pv - 2.0) * np.log(tc))


def phi_from_values(pv, eps: RelaxationPair, t) -> np.ndarray:
    pv = np.asarray(pv, dtype=float)
    t = np.asarray(t, dtype=float)
    em, ep = eps.eps_minus, eps.eps_plus
    tc = np.clip(t, em ** 2, ep ** 2)
    mid = np.exp(0.5 * pv * np.log(tc)) / pv
    lo = 0.5 * em ** (pv - 2.0) * t + (1.0 / pv - 0.5) * em ** pv
    hi = 0.5 * ep ** (pv - 2.0) * t + (1.0 / pv - 0.5) * ep ** pv
    return np.where(t < em ** 2, lo, np.where(t > ep ** 2, hi, mid))


def xi_prime_from_values(pv, eps: RelaxationPair, t) -> np.ndarray:
    pv = np.asarray(pv, dtype=float)
    t = np.asarray(t, dtype=float)
    em, ep = eps.eps_minus, eps.eps_plus
    tc = np.clip(t, em, ep)
    mid = (pv - 1.0) * np.exp((pv - 2.0) * np.log(tc))
    return np.where(t < em, em ** (pv - 2.0), np.where(t > ep, ep ** (pv - 2.0), mid))


def mu_eps(p: ExponentField, eps: RelaxationPair, x, t) -> np.ndarray:
    """Relaxed coefficient ``mu_eps(x, t)`` for the squared modulus ``t``."""
    t = _nonneg(t)
    return mu_from_values(_pvals(p, x), eps, t)


def phi_eps(p: ExponentField, eps: RelaxationPair, x, t) -> np.ndarray:
    """Relaxed energy density; ``2 d/dt phi_eps = mu_eps``."""
    t = _nonneg(t)
    return phi_from_values(_pvals(p, x), eps, t)


def xi_eps(p: ExponentField, eps: RelaxationPair, x, t) -> np.ndarray:
    """Flux modulus ``mu_eps(x, t^2) * t`` for the modulus ``t``."""
    t = _nonneg(t)
    return mu_from_values(_pvals(p, x), eps, t * t) * t


def xi_prime(p: ExponentField, eps: RelaxationPair, x, t) -> np.ndarray:
    """Derivative of :func:`xi_eps` in ``t``.

    At the kinks ``t = eps_minus`` and ``t = eps_plus`` the middle-branch
    value ``(p - 1) t^(p - 2)`` is returned.
    """
    t = _nonneg(t)
    return xi_prime_from_values(_pvals(p, x), eps, t)
