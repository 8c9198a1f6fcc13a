"""Exhaustive-search ground truth for the exact (non-approximated) problem.

Maximises the exact I(Y;T) over representation channels P(Y|X) under
either the point-wise chi-squared parity constraint or the averaged
mutual-information constraint I(Y;S) <= eps^2, plus I(X;Y) <= rate.
Nothing here touches the singular-value machinery, so it can certify it.
"""
from __future__ import annotations

import enum
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dist import Channel, as_channel
from .geometry import GeometryOperators, ProblemInstance
from .errors import ValidationError

LOG2 = math.log(2)
# Constraints hold up to bound * (1 + RTOL) + ATOL: enough for channels built
# exactly on the boundary, too little for refinement to exploit at eps = 0.
FEASIBILITY_RTOL = 1e-9
FEASIBILITY_ATOL = 1e-24
CHUNK = 1 << 16
# Mutual information below this is rounding noise; treating it as 0 keeps exact ties exact.
MI_NOISE_FLOOR = 1e-14


class Measure(str, enum.Enum):
    CHI_SQUARED = "chi2"
    MUTUAL_INFORMATION = "mi"


@dataclass(frozen=True)
class OracleConfig:
    grid_resolution: int = 500
    y_cardinality: int = 2
    measure: Measure = Measure.CHI_SQUARED
    # Local re-gridding around the best grid points; 0 disables it.
    refine_candidates: int = 8
    refine_points: int = 21
    workers: int = 1
    max_evaluations: int = 50_000_000

    def __post_init__(self):
        object.__setattr__(self, "measure", Measure(self.measure))
        if self.grid_resolution < 2:
            raise ValidationError("grid_resolution must be at least 2")
        if self.y_cardinality < 2:
            raise ValidationError("y_cardinality must be at least 2")
        if self.refine_candidates < 0 or self.refine_points < 3:
            raise ValidationError("bad refinement settings")


@dataclass(frozen=True)
class OracleResult:
    best_value: float  # nats
    best_channel: Channel
    evaluated_count: int
    feasible_count: int
    measure: Measure = Measure.CHI_SQUARED
    grid_value: float = field(default=math.nan)

    @property
    def best_value_bits(self) -> float:
        return self.best_value / LOG2


@dataclass(frozen=True)
class ChannelEvaluation:
    objective: float
    feasible: bool
    diagnostics: dict


def _plogp_ratio(num, den):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(num > 0, num * np.log(np.where(num > 0, num, 1.0) / np.where(den > 0, den, 1.0)), 0.0)


def _within(value, bound):
    return value <= bound * (1 + FEASIBILITY_RTOL) + FEASIBILITY_ATOL


def _batch(inst: ProblemInstance, ch: np.ndarray, measure: Measure, eps: float, rate: float):
    """Evaluate a stack of channels ``ch`` of shape (..., |Y|, |X|)."""
    px = inst.p_x.probs
    psx = inst.p_s_given_x.matrix
    ptx = inst.p_t_given_x.matrix
    jyx = ch * px
    py = jyx.sum(axis=-1)
    jys = jyx @ psx.T
    jyt = jyx @ ptx.T

    def mi(j, marg):
        value = _plogp_ratio(j, py[..., :, None] * marg).sum(axis=(-1, -2))
        return np.where(value < MI_NOISE_FLOOR, 0.0, value)

    i_xy = mi(jyx, px)
    i_ty = mi(jyt, inst.p_t.probs)
    ps = inst.p_s.probs
    if measure is Measure.CHI_SQUARED:
        with np.errstate(divide="ignore", invalid="ignore"):
            post = jys / py[..., None]
            chi = np.where(py > 0, (((post - ps) ** 2) / ps).sum(axis=-1), 0.0)
        fairness = chi.max(axis=-1)
    else:
        fairness = mi(jys, ps)
    ok = _within(fairness, eps * eps) & _within(i_xy, rate)
    return i_ty, ok, fairness, i_xy


def evaluate_channel(inst: ProblemInstance, p_y_given_x, measure=Measure.CHI_SQUARED) -> ChannelEvaluation:
    """Exact I(Y;T) of one channel and whether it meets both constraints.

    The point-wise constraint is only imposed where P(y) > 0.
    """
    measure = Measure(measure)
    ch = as_channel(p_y_given_x).matrix
    if ch.shape[1] != inst.p_x.alphabet_size:
        raise ValidationError(f"channel must have {inst.p_x.alphabet_size} columns")
    i_ty, ok, fairness, i_xy = _batch(inst, ch, measure, inst.eps, inst.rate)
    py = ch @ inst.p_x.probs
    return ChannelEvaluation(
        objective=float(i_ty),
        feasible=bool(ok),
        diagnostics={"fairness": float(fairness), "i_xy": float(i_xy), "p_y": py},
    )


def simplex_lattice(k: int, resolution: int) -> np.ndarray:
    """Points of the (k-1)-simplex with coordinates in ``{0, 1/(res-1), ..., 1}``.

    Sorted lexicographically on the first ``k-1`` coordinates; for ``k = 2``
    this is ``(a, 1-a)`` for ``a`` on ``linspace(0, 1, resolution)``.
    """
    m = resolution - 1
    pts = [c + (m - sum(c),) for c in itertools.product(range(m + 1), repeat=k - 1) if sum(c) <= m]
    return np.array(pts, dtype=float) / m


def _argmax_first(values: np.ndarray) -> int:
    return int(np.argmax(values))


def _channels_from_index(lattice: np.ndarray, idx: np.ndarray, n: int) -> np.ndarray:
    """Decode flat indices into channels; column x uses digit x (most significant first)."""
    L = lattice.shape[0]
    digits = np.empty(idx.shape + (n,), dtype=np.int64)
    rem = idx.copy()
    for x in range(n - 1, -1, -1):
        digits[..., x] = rem % L
        rem //= L
    # lattice[digits] has shape (..., n, k); channel wants (..., k, n)
    return np.swapaxes(lattice[digits], -1, -2)


def grid_search(inst: ProblemInstance, cfg: OracleConfig = OracleConfig()) -> OracleResult:
    """Best channel on the uniform lattice, then optional local refinement.

    The lattice gives each column of P(Y|X) the points of
    :func:`simplex_lattice`; ties go to the lexicographically smallest
    parameter vector.  Refinement re-grids a shrinking box around the best
    ``refine_candidates`` lattice points (moving the box while it keeps
    improving) so the optimum on a constraint boundary is resolved well
    below the lattice spacing.
    """
    n = inst.p_x.alphabet_size
    lattice = simplex_lattice(cfg.y_cardinality, cfg.grid_resolution)
    total = lattice.shape[0] ** n
    if total > cfg.max_evaluations:
        raise ValidationError(f"grid has {total} points, above max_evaluations={cfg.max_evaluations}")

    starts = range(0, total, CHUNK)

    def run(start):
        idx = np.arange(start, min(start + CHUNK, total))
        ch = _channels_from_index(lattice, idx, n)
        obj, ok, _, _ = _batch(inst, ch, cfg.measure, inst.eps, inst.rate)
        vals = np.where(ok, obj, -np.inf)
        keep = min(cfg.refine_candidates, vals.size)
        if keep:
            top = np.argpartition(-vals, keep - 1)[:keep]
        else:
            top = np.array([], dtype=np.int64)
        best = _argmax_first(vals)
        return idx[best], vals[best], int(ok.sum()), idx[top], vals[top]

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]

    feasible = sum(p[2] for p in parts)
    best_idx, best_val = -1, -np.inf
    for idx, val, *_ in parts:  # index order, strict '>' keeps the first max
        if val > best_val:
            best_idx, best_val = idx, val
    if feasible == 0:
        const = np.full((cfg.y_cardinality, n), 1.0 / cfg.y_cardinality)
        return OracleResult(0.0, Channel(const), total, 0, cfg.measure, 0.0)

    best_ch = _channels_from_index(lattice, np.array(best_idx), n)
    grid_value = float(best_val)
    evaluated = total

    if cfg.refine_candidates:
        cand_idx = np.concatenate([p[3] for p in parts])
        cand_val = np.concatenate([p[4] for p in parts])
        order = np.lexsort((cand_idx, -cand_val))[: cfg.refine_candidates]
        step = 1.0 / (cfg.grid_resolution - 1)
        for j in order:
            if not np.isfinite(cand_val[j]):
                continue
            ch0 = _channels_from_index(lattice, np.array(cand_idx[j]), n)
            val, ch, count = _refine(inst, cfg, ch0, float(cand_val[j]), step)
            evaluated += count
            if val > best_val:
                best_val, best_ch = val, ch
    return OracleResult(float(best_val), Channel(best_ch), evaluated, feasible, cfg.measure, grid_value)


def _refine(inst, cfg, ch0, val0, step, min_width=1e-13, max_rounds=400):
    """Pattern search on a box grid in the free parameters of P(Y|X)."""
    k, n = ch0.shape
    free = ch0[:-1, :].ravel()  # first k-1 rows are free, last row closes each column
    dim = free.size
    pts = max(3, min(cfg.refine_points, int(round(200_000 ** (1.0 / dim)))))
    if pts % 2 == 0:
        pts += 1
    offsets = np.linspace(-1.0, 1.0, pts)
    mesh = np.stack(np.meshgrid(*([offsets] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    best, best_free = val0, free
    width = 4 * step
    count = 0
    for _ in range(max_rounds):
        if width < min_width:
            break
        cand = np.clip(best_free + width * mesh, 0.0, 1.0).reshape(-1, k - 1, n)
        last = 1.0 - cand.sum(axis=1, keepdims=True)
        valid = (last[:, 0, :] >= -1e-15).all(axis=1)
        chans = np.concatenate([cand, np.clip(last, 0.0, None)], axis=1)
        obj, ok, _, _ = _batch(inst, chans, cfg.measure, inst.eps, inst.rate)
        count += len(chans)
        vals = np.where(ok & valid, obj, -np.inf)
        j = _argmax_first(vals)
        if vals[j] > best:
            best, best_free = float(vals[j]), cand[j].ravel()
        else:
            width /= 4
    top = best_free.reshape(k - 1, n)
    ch = np.vstack([top, np.clip(1.0 - top.sum(axis=0), 0.0, None)])
    return best, ch / ch.sum(axis=0), count


def quadratic_oracle(ops: GeometryOperators, eps: float, rate: float, sphere_samples: int = 4096,
                     seed: int = 0, refine_rounds: int = 60) -> float:
    """Maximum of the quadratic utility over binary symmetric designs.

    A design is ``L = +-r d`` with ``d`` a unit direction orthogonal to
    sqrt(P_S) and ``r <= 1`` the largest radius meeting the rate budget.
    When |S| = 2 there is one direction (up to sign) and the value is exact.
    Otherwise the candidates are the top eigenvector of the utility form,
    the top generalized eigenvector of (utility, rate) forms, ``sphere_samples``
    seeded random directions and the basis axes; the best few are then
    polished by a shrinking local search.
    """
    u = ops.sqrt_ps
    size = u.size
    # orthonormal basis of the complement of sqrt(P_S)
    q, _ = np.linalg.qr(np.column_stack([u, np.eye(size)]))
    basis = q[:, 1:size]
    a = basis.T @ ops.w_ty.T @ ops.w_ty @ basis
    b = basis.T @ ops.w_xy.T @ ops.w_xy @ basis
    half = 0.5 * eps * eps

    def values(coords):
        coords = coords / np.linalg.norm(coords, axis=1, keepdims=True)
        gain_t = np.einsum("ij,jk,ik->i", coords, a, coords)
        gain_x = np.einsum("ij,jk,ik->i", coords, b, coords)
        with np.errstate(divide="ignore", invalid="ignore"):
            radius_sq = np.where(half * gain_x > rate, rate / (half * gain_x), 1.0)
        return half * radius_sq * gain_t

    if size == 2:
        return float(max(0.0, values(np.array([[1.0], [-1.0]])).max()))

    chol = np.linalg.cholesky(b)
    inv_chol = np.linalg.inv(chol)
    gen = inv_chol.T @ np.linalg.eigh(inv_chol @ a @ inv_chol.T)[1][:, -1]
    rng = np.random.default_rng(seed)
    samples = rng.standard_normal((sphere_samples, size - 1))
    coords = np.vstack([np.linalg.eigh(a)[1][:, -1], gen, samples, np.eye(size - 1)])
    coords /= np.linalg.norm(coords, axis=1, keepdims=True)
    vals = values(coords)
    best = []
    for i in np.argsort(-vals, kind="stable")[:8]:
        c, v, step = coords[i], vals[i], 0.5
        for _ in range(refine_rounds):
            trial = c + step * rng.standard_normal((64, size - 1))
            tv = values(trial)
            j = int(np.argmax(tv))
            if tv[j] > v:
                c, v = trial[j] / np.linalg.norm(trial[j]), tv[j]
            else:
                step /= 2
        best.append(v)
    return float(max(0.0, max(best)))
