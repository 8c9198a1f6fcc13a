"""Closed-form binary designs from the top singular pair of W_ty.

The recipe: take the right singular vector ``v`` of ``W_ty`` with the
largest singular value above the trivial unit one (which always belongs to
``sqrt(P_S)``), shrink it by the smallest ``K >= 1`` that satisfies the
rate budget, and split a uniform binary ``Y`` along ``+v/K`` and ``-v/K``.
The resulting utility ``0.5 eps^2 (sigma/K)^2`` is a lower bound on the
quadratic problem and equals it when ``|S| = 2``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dist import Channel, JointDist, Pmf, bayes_invert
from .errors import DegenerateSpectrumWarning, DomainError, NumericalError
from .geometry import (
    GeometryOperators,
    PerturbationDesign,
    ProblemInstance,
    build_operators,
    reconstruct,
)
from .linalg import canonical_sign, svd_small

UNIT_SIGMA_TOL = 1e-9


@dataclass(frozen=True)
class SpectralData:
    sigma_max: float
    sigma_max2: float
    v_max: np.ndarray
    v_max2: np.ndarray


def spectral_data(w) -> SpectralData:
    res = svd_small(w)
    if res.s.size < 2:
        raise DomainError("need at least two singular values")
    return SpectralData(float(res.s[0]), float(res.s[1]), res.vt[0].copy(), res.vt[1].copy())


class Direction(NamedTuple):
    sigma: float
    v: np.ndarray
    used_second: bool


def select_direction(spec: SpectralData, tol: float = UNIT_SIGMA_TOL) -> Direction:
    """Top singular pair, or the runner-up when the top value is the trivial 1."""
    if spec.sigma_max > 1 + tol:
        return Direction(spec.sigma_max, spec.v_max, False)
    if spec.sigma_max >= 1 - tol:
        return Direction(spec.sigma_max2, spec.v_max2, True)
    raise NumericalError(
        f"largest singular value {spec.sigma_max:.12g} is below 1; "
        "W_ty must always have a unit singular value"
    )


def _feasible_direction(ops: GeometryOperators, tol: float) -> Direction:
    """Selected direction, forced orthogonal to sqrt(P_S).

    If the unit singular value is repeated, the SVD may hand back any basis
    of that eigenspace; pick the member farthest from sqrt(P_S) and project.
    """
    spec = spectral_data(ops.w_ty)
    d = select_direction(spec, tol)
    u = ops.sqrt_ps
    v = d.v
    if abs(v @ u) > 1e-9:
        # Only reachable when sigma is degenerate with the unit value.
        candidates = [c - (c @ u) * u for c in (spec.v_max, spec.v_max2)]
        v = max(candidates, key=lambda c: c @ c)
        if v @ v < 1e-18:
            raise NumericalError("no singular direction orthogonal to sqrt(P_S)")
    v = v - (v @ u) * u
    v = canonical_sign(v / np.linalg.norm(v))
    sigma = float(np.linalg.norm(ops.w_ty @ v))
    return Direction(sigma, v, d.used_second)


def compute_k(ops: GeometryOperators, v, eps: float, rate: float) -> float:
    """Smallest K >= 1 with 0.5 eps^2 |W_xy v|^2 <= rate K^2."""
    cost = 0.5 * eps * eps * float(np.sum((ops.w_xy @ np.asarray(v)) ** 2))
    if math.isinf(rate) or cost <= rate:
        return 1.0
    return math.sqrt(cost / rate)


@dataclass(frozen=True)
class LowerBound:
    """Closed-form part of a design: no posteriors, so always available."""

    p2_value: float
    k_factor: float
    sigma: float
    direction: np.ndarray
    used_second: bool
    design: PerturbationDesign
    tight: bool


def lower_bound(inst: ProblemInstance, tol: float = UNIT_SIGMA_TOL,
                ops: GeometryOperators | None = None) -> LowerBound:
    ops = ops or build_operators(inst)
    sigma, v, used_second = _feasible_direction(ops, tol)
    k = compute_k(ops, v, inst.eps, inst.rate)
    n_s = inst.sizes[0]
    if used_second and n_s == 2:
        warnings.warn("W_ty has no singular value above 1; the only feasible direction has unit gain",
                      DegenerateSpectrumWarning, stacklevel=2)
    l1 = v / k
    design = PerturbationDesign(Pmf([0.5, 0.5]), np.vstack([l1, -l1]))
    p2 = 0.5 * inst.eps ** 2 * (sigma / k) ** 2
    return LowerBound(p2, k, sigma, v, used_second, design, tight=(n_s == 2))


@dataclass(frozen=True)
class DesignSolution:
    p2_value: float
    k_factor: float
    sigma: float
    used_second: bool
    design: PerturbationDesign
    p_s_given_y: Channel
    p_t_given_y: Channel
    p_x_given_y: Channel
    p_y_given_x: Channel
    joint: JointDist
    tightness_flag: bool

    @property
    def p_y(self) -> Pmf:
        return self.design.p_y


def solve(inst: ProblemInstance, tol: float = UNIT_SIGMA_TOL) -> DesignSolution:
    """Binary design with all posteriors and the assembled joint P(s, t, x, y).

    Raises :class:`~geofair.errors.InfeasibleEpsilonError` when the
    perturbation is too large for some posterior to stay non-negative; use
    :func:`lower_bound` for the closed-form value alone.
    """
    lb = lower_bound(inst, tol)
    rec = reconstruct(inst, lb.design, inst.eps)
    p_x_given_y = Channel(rec.p_x_given_y)
    p_y_given_x = bayes_invert(p_x_given_y, lb.design.p_y, inst.p_x)
    joint = assemble_joint(inst, p_y_given_x)
    return DesignSolution(
        p2_value=lb.p2_value,
        k_factor=lb.k_factor,
        sigma=lb.sigma,
        used_second=lb.used_second,
        design=lb.design,
        p_s_given_y=Channel(rec.p_s_given_y),
        p_t_given_y=Channel(rec.p_t_given_y),
        p_x_given_y=p_x_given_y,
        p_y_given_x=p_y_given_x,
        joint=joint,
        tightness_flag=lb.tight,
    )


def assemble_joint(inst: ProblemInstance, p_y_given_x: Channel) -> JointDist:
    """P(s,t,x,y) = P(s,t|x) P(x) P(y|x), using the Markov chains S-X-Y and T-X-Y."""
    stx = inst.coupling() * inst.p_x.probs
    table = np.einsum("stx,yx->stxy", stx, p_y_given_x.matrix)
    px = inst.p_x.probs
    marginals = {
        "sx": inst.p_s_given_x.matrix * px,
        "tx": inst.p_t_given_x.matrix * px,
    }
    return JointDist(table, marginals)


def low_rate_bound(inst: ProblemInstance, tol: float = UNIT_SIGMA_TOL) -> float:
    """Utility bound when the rate budget binds: linear in the rate.

    Substituting ``K = sqrt(0.5 eps^2 |W_xy v|^2 / r)`` into
    ``0.5 eps^2 (sigma/K)^2`` gives ``r sigma^2 / |W_xy v|^2``.
    """
    ops = build_operators(inst)
    sigma, v, _ = _feasible_direction(ops, tol)
    q = float(np.sum((ops.w_xy @ v) ** 2))
    threshold = 0.5 * inst.eps ** 2 * q
    if not inst.rate < threshold:
        raise DomainError(f"rate {inst.rate:g} is not below the low-rate threshold {threshold:.6g}")
    return inst.rate * sigma ** 2 / q
