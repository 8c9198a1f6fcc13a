"""Perturbation geometry for point-wise chi-squared fairness.

A representation ``Y`` of ``X`` is described by how each posterior
``P(S|Y=y)`` deviates from the prior ``P(S)``::

    P(S|Y=y) = P(S) + eps * diag(sqrt(P_S)) @ L_y

With ``L_y`` orthogonal to ``sqrt(P_S)``, ``sum_y P(y) L_y = 0`` and
``|L_y| <= 1`` the chi-squared parity constraint holds with budget eps**2,
and to second order in eps::

    I(X;Y) ~ 0.5 eps^2 sum_y P(y) |W_xy @ L_y|^2
    I(T;Y) ~ 0.5 eps^2 sum_y P(y) |W_ty @ L_y|^2

where ``W_ty = diag(P_T)^-1/2 P(T|X) P(S|X)^-1 diag(P_S)^1/2`` and
``W_xy = diag(P_X)^-1/2 P(S|X)^-1 diag(P_S)^1/2``.  All quantities are in
nats.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import dist
from .dist import Channel, Pmf, as_channel, as_pmf
from .errors import (
    ConditioningError,
    InfeasibleEpsilonError,
    ThresholdWarning,
    ValidationError,
)
from .linalg import svd_small

DET_TOL = 1e-10
DESIGN_TOL = 1e-10
# Reconstructed probabilities down to this are rounding noise and clipped to 0.
NEGATIVE_TOL = 1e-13


@dataclass(frozen=True)
class ProblemInstance:
    """Inputs of the fairness/utility/compression trade-off.

    ``rate`` is the compression budget on I(X;Y) in nats (``math.inf``
    disables it).  ``p_st_given_x`` optionally couples S and T given X,
    shape ``(|S|, |T|, |X|)``; it only affects the assembled 4-way joint.
    """

    p_x: Pmf
    p_s_given_x: Channel
    p_t_given_x: Channel
    eps: float
    rate: float = math.inf
    p_st_given_x: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "p_x", as_pmf(self.p_x))
        object.__setattr__(self, "p_s_given_x", as_channel(self.p_s_given_x))
        object.__setattr__(self, "p_t_given_x", as_channel(self.p_t_given_x))
        n = self.p_x.alphabet_size
        if self.p_s_given_x.matrix.shape != (n, n):
            raise ValidationError(
                f"P(S|X) must be square {n}x{n} (|S| = |X|), got {self.p_s_given_x.matrix.shape}"
            )
        if self.p_t_given_x.in_size != n:
            raise ValidationError(f"P(T|X) must have {n} columns, got {self.p_t_given_x.in_size}")
        try:
            object.__setattr__(self, "eps", float(self.eps))
            object.__setattr__(self, "rate", float(self.rate))
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"eps and rate must be numbers: {exc}") from None
        if not (math.isfinite(self.eps) and self.eps >= 0):
            raise ValidationError(f"eps must be a finite non-negative number, got {self.eps!r}")
        if not (self.rate > 0):
            raise ValidationError(f"rate must be positive, got {self.rate!r}")
        if np.any(self.p_x.probs <= 0):
            raise ValidationError("P(X) must be strictly positive")
        if np.any(self.p_s.probs <= 0) or np.any(self.p_t.probs <= 0):
            raise ValidationError("derived P(S) and P(T) must be strictly positive")
        det = np.linalg.det(self.p_s_given_x.matrix)
        if abs(det) <= DET_TOL:
            raise ConditioningError(f"P(S|X) is singular (|det| = {abs(det):.3g})")
        if self.p_st_given_x is not None:
            c = np.array(self.p_st_given_x, dtype=float)
            c.setflags(write=False)
            if c.shape != (n, self.p_t_given_x.out_size, n):
                raise ValidationError(f"coupling P(S,T|X) has shape {c.shape}")
            if np.any(c < 0) or not np.allclose(c.sum(axis=(0, 1)), 1, rtol=0, atol=1e-12):
                raise ValidationError("coupling P(S,T|X) is not a conditional pmf")
            if not (np.allclose(c.sum(axis=1), self.p_s_given_x.matrix, rtol=0, atol=1e-12)
                    and np.allclose(c.sum(axis=0), self.p_t_given_x.matrix, rtol=0, atol=1e-12)):
                raise ValidationError("coupling P(S,T|X) disagrees with P(S|X) or P(T|X)")
            object.__setattr__(self, "p_st_given_x", c)

    @property
    def p_s(self) -> Pmf:
        return dist.compose(self.p_s_given_x, self.p_x)

    @property
    def p_t(self) -> Pmf:
        return dist.compose(self.p_t_given_x, self.p_x)

    @property
    def sizes(self) -> tuple:
        """(|S|, |T|, |X|)."""
        return (self.p_s_given_x.out_size, self.p_t_given_x.out_size, self.p_x.alphabet_size)

    def coupling(self) -> np.ndarray:
        """P(S,T|X); conditional independence of S and T given X unless supplied."""
        if self.p_st_given_x is not None:
            return self.p_st_given_x
        return np.einsum("sx,tx->stx", self.p_s_given_x.matrix, self.p_t_given_x.matrix)

    def with_eps(self, eps: float) -> "ProblemInstance":
        return replace(self, eps=float(eps))

    def with_rate(self, rate: float) -> "ProblemInstance":
        return replace(self, rate=float(rate))


@dataclass(frozen=True, eq=False)
class PerturbationDesign:
    """Representation marginal ``p_y`` and one direction ``L_y`` per row."""

    p_y: Pmf
    l_vectors: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p_y", as_pmf(self.p_y))
        l = np.array(self.l_vectors, dtype=float)
        if l.ndim != 2 or l.shape[0] != self.p_y.alphabet_size:
            raise ValidationError(f"need one L vector per y: got shape {l.shape}")
        l.setflags(write=False)
        object.__setattr__(self, "l_vectors", l)
        mean = self.p_y.probs @ l
        if np.max(np.abs(mean)) > DESIGN_TOL:
            raise ValidationError("sum_y P(y) L_y must vanish")
        norms = np.sum(l * l, axis=1)
        if np.any(norms > 1 + DESIGN_TOL):
            raise ValidationError(f"|L_y|^2 = {norms.max():.12g} exceeds 1")

    def check_orthogonal(self, sqrt_ps: np.ndarray) -> None:
        dots = self.l_vectors @ sqrt_ps
        if np.max(np.abs(dots)) > DESIGN_TOL:
            raise ValidationError("every L_y must be orthogonal to sqrt(P_S)")

    @classmethod
    def zero(cls, p_y, size: int) -> "PerturbationDesign":
        p_y = as_pmf(p_y)
        return cls(p_y, np.zeros((p_y.alphabet_size, size)))


@dataclass(frozen=True, eq=False)
class GeometryOperators:
    w_ty: np.ndarray
    w_xy: np.ndarray
    c1: float
    c2: float
    sqrt_ps: np.ndarray

    @property
    def eps_threshold(self) -> float:
        return min(self.c1, self.c2)


def build_operators(inst: ProblemInstance) -> GeometryOperators:
    """W matrices and the sufficient eps thresholds c1 (for I(T;Y)) and c2 (for I(X;Y))."""
    ps, pt, px = inst.p_s.probs, inst.p_t.probs, inst.p_x.probs
    psx = inst.p_s_given_x.matrix
    try:
        inv = np.linalg.inv(psx)
    except np.linalg.LinAlgError as exc:
        raise ConditioningError(str(exc)) from exc
    sqrt_ps = np.sqrt(ps)
    t_of_s = inst.p_t_given_x.matrix @ inv
    w_ty = (t_of_s * sqrt_ps) / np.sqrt(pt)[:, None]
    w_xy = (inv * sqrt_ps) / np.sqrt(px)[:, None]
    root_max_ps = math.sqrt(ps.max())
    c1 = pt.min() / (svd_small(t_of_s).s[0] * root_max_ps)
    c2 = svd_small(psx).s[-1] * px.min() / root_max_ps
    for w in (w_ty, w_xy):
        w.setflags(write=False)
    sqrt_ps.setflags(write=False)
    return GeometryOperators(w_ty, w_xy, float(c1), float(c2), sqrt_ps)


def perturb_to_conditional(p_s, l, eps: float) -> Pmf:
    """P(S) + eps * diag(sqrt(P_S)) @ l as a validated pmf."""
    ps = as_pmf(p_s).probs
    l = np.asarray(l, dtype=float)
    if abs(l @ np.sqrt(ps)) > DESIGN_TOL:
        raise ValidationError("l must be orthogonal to sqrt(P_S)")
    if l @ l > 1 + DESIGN_TOL:
        raise ValidationError("|l| must not exceed 1")
    return _perturbed_pmf(ps, eps * np.sqrt(ps) * l, "P(S|Y)")


def _perturbed_pmf(base: np.ndarray, delta: np.ndarray, name: str) -> Pmf:
    p = base + delta
    low = np.flatnonzero(p < -NEGATIVE_TOL)
    if low.size:
        i = int(low[0])
        raise InfeasibleEpsilonError(
            f"{name} entry {i} would be {p[i]:.6g} < 0", conditional=name, index=i
        )
    p = np.clip(p, 0.0, None)
    return Pmf(p / p.sum())


def _check_design(ops: GeometryOperators, design: PerturbationDesign) -> None:
    if design.l_vectors.shape[1] != ops.sqrt_ps.size:
        raise ValidationError("L vectors have the wrong length for this instance")
    design.check_orthogonal(ops.sqrt_ps)


def _weighted_quadratic(w: np.ndarray, design: PerturbationDesign, eps: float) -> float:
    gains = np.sum((design.l_vectors @ w.T) ** 2, axis=1)
    return float(0.5 * eps * eps * design.p_y.probs @ gains)


def approx_mi_xy(ops: GeometryOperators, design: PerturbationDesign, eps: float) -> float:
    _check_design(ops, design)
    if eps >= ops.c2:
        warnings.warn(f"eps={eps:g} >= c2={ops.c2:.4g}; I(X;Y) approximation not guaranteed",
                      ThresholdWarning, stacklevel=2)
    return _weighted_quadratic(ops.w_xy, design, eps)


def approx_mi_ty(ops: GeometryOperators, design: PerturbationDesign, eps: float) -> float:
    _check_design(ops, design)
    if eps >= ops.c1:
        warnings.warn(f"eps={eps:g} >= c1={ops.c1:.4g}; I(T;Y) approximation not guaranteed",
                      ThresholdWarning, stacklevel=2)
    return _weighted_quadratic(ops.w_ty, design, eps)


def quadratic_objective(ops: GeometryOperators, p_y, l_vectors, eps: float) -> float:
    """Utility objective of the quadratic problem, written out term by term."""
    p_y = np.asarray(p_y, dtype=float)
    total = 0.0
    for py, l in zip(p_y, np.asarray(l_vectors, dtype=float)):
        g = ops.w_ty @ l
        total += py * float(g @ g)
    return 0.5 * eps ** 2 * total


class Reconstruction(NamedTuple):
    """Posteriors given each y, stored as columns (shape (|A|, |Y|))."""

    p_s_given_y: np.ndarray
    p_t_given_y: np.ndarray
    p_x_given_y: np.ndarray


def reconstruct(inst: ProblemInstance, design: PerturbationDesign, eps: float,
                strict: Sequence[str] = ("s", "t", "x")) -> Reconstruction:
    """Posteriors implied by a design at perturbation size ``eps``.

    Every posterior named in ``strict`` must be a valid pmf, otherwise
    :class:`InfeasibleEpsilonError` is raised.  Posteriors left out of
    ``strict`` are returned as-is and may contain negative entries.
    """
    ps, pt, px = inst.p_s.probs, inst.p_t.probs, inst.p_x.probs
    inv = np.linalg.inv(inst.p_s_given_x.matrix)
    j = (design.l_vectors * np.sqrt(ps)).T  # (|S|, |Y|) columns J_y
    parts = {
        "s": (ps, eps * j, "P(S|Y)"),
        "t": (pt, eps * inst.p_t_given_x.matrix @ inv @ j, "P(T|Y)"),
        "x": (px, eps * inv @ j, "P(X|Y)"),
    }
    out = {}
    for key, (base, delta, name) in parts.items():
        cols = []
        for y in range(delta.shape[1]):
            if key in strict:
                cols.append(_perturbed_pmf(base, delta[:, y], f"{name} at y={y}").probs)
            else:
                cols.append(base + delta[:, y])
        out[key] = np.column_stack(cols)
    return Reconstruction(out["s"], out["t"], out["x"])


@dataclass(frozen=True)
class ProbeRow:
    eps: float
    exact_mi_xy: float
    approx_mi_xy: float
    exact_mi_ty: float
    approx_mi_ty: float
    feasible_x: bool
    feasible_t: bool

    @property
    def error_xy_over_eps_sq(self) -> float:
        return _scaled_error(self.exact_mi_xy, self.approx_mi_xy, self.eps)

    @property
    def error_ty_over_eps_sq(self) -> float:
        return _scaled_error(self.exact_mi_ty, self.approx_mi_ty, self.eps)


def _scaled_error(exact, approx, eps):
    if eps == 0 or math.isnan(exact):
        return math.nan
    return abs(exact - approx) / eps ** 2


def _posterior_mi(p_y: np.ndarray, posteriors: np.ndarray) -> float:
    joint = posteriors * p_y  # (|A|, |Y|)
    return dist.mutual_information(joint / joint.sum())


def approximation_error_probe(inst: ProblemInstance, design: PerturbationDesign,
                              eps_grid: Sequence[float]) -> list:
    """Exact versus quadratic mutual information along a grid of eps.

    I(X;Y) is exact only where every P(X|Y=y) is a valid pmf and I(T;Y)
    only where every P(T|Y=y) is; elsewhere the exact value is NaN and the
    matching ``feasible_*`` flag is False.  The two are tracked separately
    because P(T|Y) can stay valid well past the point where P(X|Y) breaks.
    """
    ops = build_operators(inst)
    _check_design(ops, design)
    py = design.p_y.probs
    rows = []
    for eps in eps_grid:
        eps = float(eps)
        rec = reconstruct(inst, design, eps, strict=())
        ok_x = bool(np.all(rec.p_x_given_y >= -NEGATIVE_TOL))
        ok_t = bool(np.all(rec.p_t_given_y >= -NEGATIVE_TOL))
        ixy = _posterior_mi(py, np.clip(rec.p_x_given_y, 0, None)) if ok_x else math.nan
        ity = _posterior_mi(py, np.clip(rec.p_t_given_y, 0, None)) if ok_t else math.nan
        rows.append(ProbeRow(
            eps=eps,
            exact_mi_xy=ixy,
            approx_mi_xy=_weighted_quadratic(ops.w_xy, design, eps),
            exact_mi_ty=ity,
            approx_mi_ty=_weighted_quadratic(ops.w_ty, design, eps),
            feasible_x=ok_x,
            feasible_t=ok_t,
        ))
    return rows
