"""Finite discrete distributions and exact information measures.

Everything here is exact (no local approximations) and serves as ground
truth for the geometric machinery in :mod:`geofair.geometry`.

Conventions
-----------
* A channel ``P(B|A)`` is stored column-stochastic: shape ``(|B|, |A|)`` and
  column ``a`` is the pmf of ``B`` given ``A = a``.  Applying it to a pmf is a
  plain matrix-vector product.
* Logarithms default to base e (nats).  Pass ``log_base=2`` for bits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, SupportError, ValidationError

PMF_TOL = 1e-12
JOINT_TOL = 1e-10


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Pmf:
    """Probability mass function over ``{0, ..., alphabet_size - 1}``."""

    probs: np.ndarray

    def __post_init__(self):
        p = _frozen(self.probs)
        if p.ndim != 1 or p.size == 0:
            raise ValidationError(f"pmf must be a non-empty vector, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValidationError("pmf has non-finite entries")
        if np.any(p < 0):
            raise ValidationError(f"pmf has negative entry at index {int(np.argmin(p))}")
        if abs(p.sum() - 1.0) > PMF_TOL:
            raise ValidationError(f"pmf sums to {p.sum():.15g}, not 1")
        object.__setattr__(self, "probs", p)

    @property
    def alphabet_size(self) -> int:
        return self.probs.size

    def __array__(self, dtype=None, copy=None):
        return self.probs if dtype is None else self.probs.astype(dtype)

    def __len__(self):
        return self.probs.size

    def __eq__(self, other):
        return isinstance(other, Pmf) and np.array_equal(self.probs, other.probs)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Channel:
    """Column-stochastic matrix of shape ``(out_size, in_size)``."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.ndim != 2 or m.size == 0:
            raise ValidationError(f"channel must be a non-empty matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValidationError("channel has non-finite entries")
        if np.any(m < 0):
            r, c = np.unravel_index(np.argmin(m), m.shape)
            raise ValidationError(f"channel has negative entry at ({r}, {c})")
        sums = m.sum(axis=0)
        bad = np.flatnonzero(np.abs(sums - 1.0) > PMF_TOL)
        if bad.size:
            raise ValidationError(f"channel column {bad[0]} sums to {sums[bad[0]]:.15g}, not 1")
        object.__setattr__(self, "matrix", m)

    @property
    def out_size(self) -> int:
        return self.matrix.shape[0]

    @property
    def in_size(self) -> int:
        return self.matrix.shape[1]

    def column(self, j: int) -> Pmf:
        return Pmf(self.matrix[:, j])

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    def __eq__(self, other):
        return isinstance(other, Channel) and np.array_equal(self.matrix, other.matrix)

    __hash__ = None

    @classmethod
    def identity(cls, n: int) -> "Channel":
        return cls(np.eye(n))


@dataclass(frozen=True, eq=False)
class JointDist:
    """Joint pmf over ``(s, t, x, y)``.

    ``marginals`` maps axis-name strings (e.g. ``"sx"``, ``"y"``) to the
    tables the joint must reproduce; they are checked at construction.
    """

    table: np.ndarray
    marginals: dict = field(default_factory=dict, compare=False, repr=False)

    AXES = "stxy"

    def __post_init__(self):
        t = _frozen(self.table)
        if t.ndim != 4:
            raise ValidationError(f"joint table must be 4-d (s, t, x, y), got {t.ndim}-d")
        if np.any(t < 0):
            raise ValidationError("joint table has negative entries")
        if abs(t.sum() - 1.0) > JOINT_TOL:
            raise ValidationError(f"joint table sums to {t.sum():.15g}, not 1")
        object.__setattr__(self, "table", t)
        for axes, expected in self.marginals.items():
            got = self.marginal(axes)
            if got.shape != np.shape(expected) or not np.allclose(got, expected, rtol=0, atol=JOINT_TOL):
                raise ConsistencyError(f"joint does not reproduce the supplied P_{axes.upper()}")

    @property
    def sizes(self) -> tuple:
        return self.table.shape

    def marginal(self, axes: str) -> np.ndarray:
        """Marginal over the named axes, in the order given (e.g. ``"xs"``)."""
        if not axes or any(a not in self.AXES for a in axes) or len(set(axes)) != len(axes):
            raise ValidationError(f"bad axis spec {axes!r}")
        drop = tuple(i for i, a in enumerate(self.AXES) if a not in axes)
        kept = "".join(a for a in self.AXES if a in axes)
        m = self.table.sum(axis=drop)
        return np.transpose(m, [kept.index(a) for a in axes])


def as_pmf(p) -> Pmf:
    return p if isinstance(p, Pmf) else Pmf(p)


def as_channel(c) -> Channel:
    return c if isinstance(c, Channel) else Channel(c)


def _log(x, log_base):
    return np.log(x) / math.log(log_base)


def entropy(p, log_base: float = math.e) -> float:
    """Shannon entropy, with ``0 log 0 = 0``."""
    probs = as_pmf(p).probs
    nz = probs[probs > 0]
    return float(max(0.0, -np.sum(nz * _log(nz, log_base))))


def mutual_information(joint_xy, log_base: float = math.e) -> float:
    """Exact I(X;Y) of a 2-d joint pmf (rows X, columns Y)."""
    j = np.asarray(joint_xy, dtype=float)
    if j.ndim != 2:
        raise ValidationError("joint must be a matrix")
    if np.any(j < 0) or not np.all(np.isfinite(j)):
        raise ValidationError("joint has negative or non-finite entries")
    if abs(j.sum() - 1.0) > PMF_TOL:
        raise ValidationError(f"joint sums to {j.sum():.15g}, not 1")
    px = j.sum(axis=1, keepdims=True)
    py = j.sum(axis=0, keepdims=True)
    nz = j > 0
    ratio = j[nz] / (px @ py)[nz]
    return float(max(0.0, np.sum(j[nz] * _log(ratio, log_base))))


def kl_divergence(p, q, log_base: float = math.e) -> float:
    """D(p || q).  Raises :class:`SupportError` unless supp(p) is inside supp(q)."""
    p, q = as_pmf(p).probs, as_pmf(q).probs
    if p.shape != q.shape:
        raise ValidationError(f"size mismatch {p.size} vs {q.size}")
    nz = p > 0
    if np.any(q[nz] == 0):
        raise SupportError(f"q is zero at index {int(np.flatnonzero(nz & (q == 0))[0])} where p is positive")
    return float(max(0.0, np.sum(p[nz] * _log(p[nz] / q[nz], log_base))))


def chi_squared(p, q) -> float:
    """Pearson chi-squared divergence  sum_s (p(s) - q(s))^2 / q(s)."""
    p, q = as_pmf(p).probs, as_pmf(q).probs
    if p.shape != q.shape:
        raise ValidationError(f"size mismatch {p.size} vs {q.size}")
    if np.any(q == 0):
        raise SupportError("chi-squared reference pmf must be strictly positive")
    return float(np.sum((p - q) ** 2 / q))


def parity_gap(p_y_given_s) -> float:
    """Largest |P(y|s1) - P(y|s2)| over all y, s1, s2 (demographic parity gap)."""
    m = as_channel(p_y_given_s).matrix
    return float(np.max(m.max(axis=1) - m.min(axis=1)))


def compose(channel_ab, p_b_given_c):
    """Chain ``P(A|B)`` with ``P(B|C)``; a :class:`Pmf` second argument gives a Pmf."""
    ab = as_channel(channel_ab).matrix
    if isinstance(p_b_given_c, Pmf) or np.ndim(p_b_given_c) == 1:
        b = as_pmf(p_b_given_c).probs
        if ab.shape[1] != b.size:
            raise ValidationError(f"cannot apply {ab.shape} channel to pmf of size {b.size}")
        return Pmf(_renorm_drift(ab @ b))
    bc = as_channel(p_b_given_c).matrix
    if ab.shape[1] != bc.shape[0]:
        raise ValidationError(f"inner dimensions differ: {ab.shape} x {bc.shape}")
    return Channel(_renorm_drift(ab @ bc))


def _renorm_drift(a: np.ndarray) -> np.ndarray:
    # Products of stochastic matrices drift by a few ulps; fold that back in.
    s = a.sum(axis=0)
    return a / s


def bayes_invert(p_x_given_y, p_y, p_x) -> Channel:
    """P(Y|X)(y|x) = P(X|Y)(x|y) P(y) / P(x)."""
    xy = as_channel(p_x_given_y).matrix
    py, px = as_pmf(p_y).probs, as_pmf(p_x).probs
    if xy.shape != (px.size, py.size):
        raise ValidationError(f"P(X|Y) has shape {xy.shape}, expected {(px.size, py.size)}")
    implied = xy @ py
    if np.max(np.abs(implied - px)) > 1e-9:
        raise ConsistencyError("sum_y P(x|y) P(y) does not reproduce P(x)")
    if np.any(px == 0):
        raise SupportError(f"P(x) is zero at index {int(np.flatnonzero(px == 0)[0])}")
    joint = xy * py  # (x, y)
    return Channel(_renorm_drift((joint / joint.sum(axis=1, keepdims=True)).T))
