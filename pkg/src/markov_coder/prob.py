"""Exact discrete information-theoretic primitives.

Entropy, relative entropy, code length, marginalization and Bayes reversal
over finite alphabets.  These are the vocabulary every other module is
written in, so the conventions are fixed here once:

- All internal computation is in natural log; bits are produced at the
  reporting boundary by dividing by ln 2.
- ``0 * log 0`` is defined as 0.
- A source symbol with positive probability paired with a model probability
  of exactly zero is a hard :class:`~markov_coder.errors.SupportMismatch`,
  never an infinite value.

Entropy computed from a distribution is a lower bound on the bit rate any
realizable encoder achieves (the likely-message boundary cannot be modelled
exactly); that asymptotic caveat has no computational counterpart here and
is recorded for documentation only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidDistribution,
    SupportMismatch,
    ZeroMarginal,
)

NORMALIZATION_TOL = 1e-12

_LN2 = math.log(2.0)

#: Guard floor applied to model probabilities inside logs.  At the default it
#: only lifts subnormals, i.e. it is effectively off; callers wanting a finite
#: surrogate for zero model entries must clamp their vector explicitly.
DEFAULT_Q_FLOOR = 1e-300


def _check_unit(unit: str) -> None:
    if unit not in ("bits", "nats"):
        raise ValueError(f"unknown unit {unit!r}; expected 'bits' or 'nats'")


def from_nats(value: float, unit: str) -> float:
    """Convert a quantity measured in nats to the requested unit."""
    _check_unit(unit)
    return value / _LN2 if unit == "bits" else value


@dataclass(frozen=True)
class ProbVector:
    """A normalized probability vector over a finite alphabet.

    Entries must be non-negative and sum to 1 within ``NORMALIZATION_TOL``.
    The wrapped array is made read-only, so instances are immutable values
    and safe to share across workers.
    """

    probs: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.probs, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise InvalidDistribution("probability vector must be 1-D and non-empty")
        if not np.all(np.isfinite(arr)):
            raise InvalidDistribution("probability vector has non-finite entries")
        if np.any(arr < 0.0):
            raise InvalidDistribution("probability vector has negative entries")
        total = float(arr.sum())
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise InvalidDistribution(
                f"probability vector sums to {total!r}, expected 1 within {NORMALIZATION_TOL}"
            )
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    @property
    def m(self) -> int:
        """Alphabet size."""
        return int(self.probs.size)

    def __len__(self) -> int:
        return self.m

    @classmethod
    def renormalized(cls, values) -> "ProbVector":
        """Build from non-negative values, dividing by their sum.

        This is the explicit path for data read from files, where round-trip
        rounding may push the sum slightly off 1.
        """
        arr = np.asarray(values, dtype=float)
        total = arr.sum()
        if not np.isfinite(total) or total <= 0.0:
            raise InvalidDistribution("cannot renormalize: non-positive total mass")
        return cls(arr / total)

    @classmethod
    def uniform(cls, m: int) -> "ProbVector":
        return cls(np.full(m, 1.0 / m))

    @classmethod
    def indicator(cls, m: int, index: int) -> "ProbVector":
        arr = np.zeros(m)
        arr[index] = 1.0
        return cls(arr)


@dataclass(frozen=True)
class TransitionMatrix:
    """Column-stochastic conditional probability matrix ``p(to | from)``.

    Shape is ``(m_to, m_from)``: column ``j`` is the conditional distribution
    over output symbols given input symbol ``j`` and must sum to 1 within
    ``NORMALIZATION_TOL``.
    """

    matrix: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.matrix, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidDistribution("transition matrix must be 2-D and non-empty")
        if not np.all(np.isfinite(arr)):
            raise InvalidDistribution("transition matrix has non-finite entries")
        if np.any(arr < 0.0):
            raise InvalidDistribution("transition matrix has negative entries")
        col_sums = arr.sum(axis=0)
        worst = float(np.max(np.abs(col_sums - 1.0)))
        if worst > NORMALIZATION_TOL:
            raise InvalidDistribution(
                f"transition matrix columns deviate from 1 by {worst!r}"
            )
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "matrix", arr)

    @property
    def m_to(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def m_from(self) -> int:
        return int(self.matrix.shape[1])

    @classmethod
    def renormalized(cls, values) -> "TransitionMatrix":
        """Build from non-negative values, normalizing each column."""
        arr = np.asarray(values, dtype=float)
        sums = arr.sum(axis=0, keepdims=True)
        if np.any(~np.isfinite(sums)) or np.any(sums <= 0.0):
            raise InvalidDistribution("cannot renormalize: a column has no mass")
        return cls(arr / sums)

    @classmethod
    def identity(cls, m: int) -> "TransitionMatrix":
        return cls(np.eye(m))

    @classmethod
    def deterministic(cls, targets, m_to: int) -> "TransitionMatrix":
        """Indicator columns: input ``j`` maps to ``targets[j]`` surely."""
        targets = np.asarray(targets, dtype=int)
        arr = np.zeros((m_to, targets.size))
        arr[targets, np.arange(targets.size)] = 1.0
        return cls(arr)

    def is_deterministic(self, tol: float = NORMALIZATION_TOL) -> bool:
        """True when every column is an indicator (max entry within tol of 1)."""
        return bool(np.all(self.matrix.max(axis=0) >= 1.0 - tol))


def _plogp_sum(p: np.ndarray) -> float:
    # -sum p log p in nats with 0 log 0 == 0
    mask = p > 0.0
    return float(-np.sum(p[mask] * np.log(p[mask])))


def entropy(p: ProbVector, unit: str = "bits") -> float:
    """Entropy of ``p``: average code length per symbol of a perfect encoder."""
    return from_nats(_plogp_sum(p.probs), unit)


def _cross_entropy_nats(p: np.ndarray, q: np.ndarray, q_floor: float) -> float:
    # -sum p log q over the support of p; hard error on zero model entries.
    if p.shape != q.shape:
        raise DimensionMismatch(f"alphabet sizes differ: {p.shape} vs {q.shape}")
    mask = p > 0.0
    if np.any(q[mask] == 0.0):
        bad = int(np.flatnonzero(mask & (q == 0.0))[0])
        raise SupportMismatch(f"model probability is 0 at symbol {bad} with source mass")
    return float(-np.sum(p[mask] * np.log(np.maximum(q[mask], q_floor))))


def relative_entropy(
    p: ProbVector, q: ProbVector, unit: str = "bits", q_floor: float = DEFAULT_Q_FLOOR
) -> float:
    """Extra code length per symbol incurred by coding source ``p`` with model ``q``.

    Non-negative; exactly zero iff ``p == q`` elementwise.
    """
    nats = _cross_entropy_nats(p.probs, q.probs, q_floor) - _plogp_sum(p.probs)
    return from_nats(nats, unit)


def code_length(
    p: ProbVector, q: ProbVector, unit: str = "bits", q_floor: float = DEFAULT_Q_FLOOR
) -> float:
    """Total code length per symbol, ``-sum p log q`` (entropy plus divergence)."""
    return from_nats(_cross_entropy_nats(p.probs, q.probs, q_floor), unit)


def push_forward(t: TransitionMatrix, p: ProbVector) -> ProbVector:
    """Marginal over outputs: ``sum_from t(to|from) p(from)``."""
    if t.m_from != p.m:
        raise DimensionMismatch(
            f"transition expects {t.m_from} input symbols, prior has {p.m}"
        )
    return ProbVector(t.matrix @ p.probs)


def bayes_reverse(
    t: TransitionMatrix, prior: ProbVector
) -> tuple[TransitionMatrix, ProbVector]:
    """Convert a forward pass into the equivalent backward pass.

    Returns ``(r, m)`` where ``m`` is the output marginal and
    ``r(from|to) = t(to|from) prior(from) / m(to)``, so that
    ``r(from|to) m(to) == t(to|from) prior(from)`` for every pair.
    """
    marginal = push_forward(t, prior)
    m = marginal.probs
    if np.any(m <= 0.0):
        bad = int(np.flatnonzero(m <= 0.0)[0])
        raise ZeroMarginal(f"output symbol {bad} has zero probability")
    joint = t.matrix * prior.probs[np.newaxis, :]  # joint[to, from]
    reversed_matrix = joint.T / m[np.newaxis, :]
    # Rounding can leave column sums a hair off 1; renormalize explicitly.
    return TransitionMatrix.renormalized(reversed_matrix), marginal


def conditional_entropy(
    t: TransitionMatrix, prior: ProbVector, unit: str = "bits"
) -> float:
    """Average output entropy ``sum_from prior(from) H(t(.|from))``."""
    if t.m_from != prior.m:
        raise DimensionMismatch(
            f"transition expects {t.m_from} input symbols, prior has {prior.m}"
        )
    arr = t.matrix
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(arr > 0.0, arr * np.log(arr), 0.0)
    per_column = -plogp.sum(axis=0)
    return from_nats(float(np.dot(prior.probs, per_column)), unit)
