"""Two-layer Gaussian-model instantiation: soft vector quantisation.

The continuous input is carried as a weighted empirical measure, so every
integral over the input becomes a weighted sum.  The assembled two-layer
objective is::

    total = dvq / (4 sigma^2) + code_length(P1, q) - log(V / (sqrt(2 pi) sigma)^d)

where ``dvq`` carries its conventional leading factor of 2, ``P1`` is the
encoder-induced marginal over code indices and ``V`` is the resolution
volume element that converts the Gaussian density into a probability.

Training is exact alternating coordinate minimization.  The objective is
linear in the encoder rows, so the exact row minimizer is the
winner-take-all limit of the posterior (lowest index on ties); reconstruction
vectors and the output prior both have closed-form minimizers.  Using the
exact minimizer for every block is what makes the non-increasing trace a
testable property rather than a heuristic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DeadCode, DimensionMismatch, InvalidDistribution
from .prob import ProbVector, code_length, from_nats

NORMALIZATION_TOL = 1e-12


@dataclass(frozen=True)
class EmpiricalInput:
    """Weighted point cloud standing in for a continuous input density."""

    points: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, np.newaxis]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise InvalidDistribution("points must form a non-empty (N, d) array")
        if not np.all(np.isfinite(pts)):
            raise InvalidDistribution("points contain non-finite values")
        if self.weights is None:
            w = np.full(pts.shape[0], 1.0 / pts.shape[0])
        else:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (pts.shape[0],):
                raise DimensionMismatch("weights must match the number of points")
            if np.any(w < 0.0) or not np.all(np.isfinite(w)):
                raise InvalidDistribution("weights must be finite and non-negative")
            if abs(float(w.sum()) - 1.0) > NORMALIZATION_TOL:
                raise InvalidDistribution("weights must sum to 1 within 1e-12")
        pts = pts.copy()
        w = w.copy()
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return int(self.points.shape[0])

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    @classmethod
    def renormalized(cls, points, weights) -> "EmpiricalInput":
        w = np.asarray(weights, dtype=float)
        total = float(w.sum())
        if total <= 0.0 or not math.isfinite(total):
            raise InvalidDistribution("cannot renormalize: non-positive total weight")
        return cls(points, w / total)


@dataclass(frozen=True)
class GaussianCodebook:
    """Reconstruction vectors with an isotropic width and a volume element."""

    vectors: np.ndarray
    sigma: float
    volume: float = 1.0

    def __post_init__(self) -> None:
        vec = np.asarray(self.vectors, dtype=float)
        if vec.ndim == 1:
            vec = vec[:, np.newaxis]
        if vec.ndim != 2 or vec.shape[0] < 1 or vec.shape[1] < 1:
            raise InvalidDistribution("codebook must be a non-empty (M, d) array")
        if not np.all(np.isfinite(vec)):
            raise InvalidDistribution("codebook vectors must be finite")
        if not (self.sigma > 0.0 and math.isfinite(self.sigma)):
            raise InvalidDistribution("sigma must be positive and finite")
        if not (self.volume > 0.0 and math.isfinite(self.volume)):
            raise InvalidDistribution("volume must be positive and finite")
        vec = vec.copy()
        vec.setflags(write=False)
        object.__setattr__(self, "vectors", vec)
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "volume", float(self.volume))

    @property
    def m(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])


@dataclass(frozen=True)
class SoftEncoder:
    """Per-point posterior probabilities over code indices, shape ``(N, M)``.

    Row ``x`` is ``Pr(y | x)`` and must normalize; zeros are allowed so hard
    winner-take-all encoders are representable.
    """

    probs: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.probs, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidDistribution("encoder table must be a non-empty (N, M) array")
        if np.any(arr < 0.0) or not np.all(np.isfinite(arr)):
            raise InvalidDistribution("encoder probabilities must be finite and >= 0")
        rows = arr.sum(axis=1)
        if float(np.max(np.abs(rows - 1.0))) > NORMALIZATION_TOL:
            raise InvalidDistribution("encoder rows must sum to 1 within 1e-12")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    @property
    def n(self) -> int:
        return int(self.probs.shape[0])

    @property
    def m(self) -> int:
        return int(self.probs.shape[1])

    @classmethod
    def from_logits(cls, logits) -> "SoftEncoder":
        arr = np.asarray(logits, dtype=float)
        arr = arr - arr.max(axis=1, keepdims=True)
        expd = np.exp(arr)
        return cls(expd / expd.sum(axis=1, keepdims=True))

    @classmethod
    def hard(cls, assignments, m: int) -> "SoftEncoder":
        idx = np.asarray(assignments, dtype=int)
        arr = np.zeros((idx.size, m))
        arr[np.arange(idx.size), idx] = 1.0
        return cls(arr)

    @classmethod
    def uniform(cls, n: int, m: int) -> "SoftEncoder":
        return cls(np.full((n, m), 1.0 / m))


@dataclass(frozen=True)
class SigmaSchedule:
    """Geometric annealing ``sigma_t = sigma0 * rate**t`` with rate in (0, 1]."""

    sigma0: float
    rate: float = 1.0

    def __post_init__(self) -> None:
        if not (self.sigma0 > 0.0 and math.isfinite(self.sigma0)):
            raise InvalidDistribution("sigma0 must be positive and finite")
        if not (0.0 < self.rate <= 1.0):
            raise InvalidDistribution("rate must lie in (0, 1]")

    def value(self, t: int) -> float:
        return self.sigma0 * self.rate**t


@dataclass(frozen=True)
class TraceRow:
    """One training iteration: distortion, code-length split and bit total.

    ``dvq`` is a raw squared-error quantity (no unit); the three remaining
    columns are in bits.
    """

    iteration: int
    dvq: float
    code_length_term: float
    constant_term: float
    total_bits: float


def squared_distances(points: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, shape ``(N, M)``."""
    diff = points[:, np.newaxis, :] - vectors[np.newaxis, :, :]
    return np.sum(diff * diff, axis=2)


def _check_shapes(enc: SoftEncoder, code: GaussianCodebook, data: EmpiricalInput) -> None:
    if enc.n != data.n:
        raise DimensionMismatch("encoder rows do not match the number of data points")
    if enc.m != code.m:
        raise DimensionMismatch("encoder columns do not match the codebook size")
    if code.dim != data.dim:
        raise DimensionMismatch("codebook dimension does not match the data")


def dvq(enc: SoftEncoder, code: GaussianCodebook, data: EmpiricalInput) -> float:
    """Soft reconstruction distortion ``2 sum_x w(x) sum_y Pr(y|x) ||x - x'(y)||^2``."""
    _check_shapes(enc, code, data)
    d2 = squared_distances(data.points, code.vectors)
    return 2.0 * float(np.sum(data.weights[:, np.newaxis] * enc.probs * d2))


def dvq_pairwise(enc: SoftEncoder, data: EmpiricalInput) -> float:
    """Two-sided distortion with the reconstruction integrated out.

    ``sum_y (1/resp_y) sum_{x,x'} w(x) Pr(y|x) w(x') Pr(y|x') ||x - x'||^2``
    computed by explicit pairwise summation; equals :func:`dvq` at the
    responsibility-weighted centroids.
    """
    joint = data.weights[:, np.newaxis] * enc.probs  # (N, M)
    resp = joint.sum(axis=0)
    gram = squared_distances(data.points, data.points)
    total = 0.0
    for y in range(enc.m):
        if resp[y] <= 0.0:
            continue
        v = joint[:, y]
        total += float(v @ gram @ v) / resp[y]
    return total


def code_marginal(enc: SoftEncoder, data: EmpiricalInput) -> ProbVector:
    """Encoder-induced marginal over code indices."""
    return ProbVector.renormalized(data.weights @ enc.probs)


def gaussian_log_constant(code: GaussianCodebook) -> float:
    """``-log(V / (sqrt(2 pi) sigma)^d)`` in nats."""
    return -math.log(code.volume) + code.dim * math.log(math.sqrt(2.0 * math.pi) * code.sigma)


def two_layer_terms(
    enc: SoftEncoder, code: GaussianCodebook, data: EmpiricalInput, q: ProbVector
) -> tuple[float, float, float]:
    """The three terms of the assembled objective: (dvq, code length nats, constant nats)."""
    d = dvq(enc, code, data)
    cl = code_length(code_marginal(enc, data), q, unit="nats")
    return d, cl, gaussian_log_constant(code)


def two_layer_objective(
    enc: SoftEncoder,
    code: GaussianCodebook,
    data: EmpiricalInput,
    q: ProbVector,
    unit: str = "bits",
) -> float:
    """Assembled two-layer code length in the requested unit.

    Raises :class:`SupportMismatch` when ``q`` is zero on a code index that
    carries induced marginal mass.
    """
    d, cl, const = two_layer_terms(enc, code, data, q)
    return from_nats(d / (4.0 * code.sigma**2) + cl + const, unit)


def optimal_reconstruction(enc: SoftEncoder, data: EmpiricalInput) -> np.ndarray:
    """Responsibility-weighted centroids, the exact distortion minimizer.

    Raises :class:`DeadCode` listing every index with zero responsibility;
    the resolution policy belongs to the trainer.
    """
    if enc.n != data.n:
        raise DimensionMismatch("encoder rows do not match the number of data points")
    joint = data.weights[:, np.newaxis] * enc.probs
    resp = joint.sum(axis=0)
    dead = np.flatnonzero(resp <= 0.0)
    if dead.size:
        raise DeadCode(dead)
    return (joint.T @ data.points) / resp[:, np.newaxis]


def posterior_matrix(
    points: np.ndarray,
    code: GaussianCodebook,
    q: ProbVector,
    beta: float | None = None,
) -> np.ndarray:
    """Rows of ``Pr(y|x) ∝ q(y) exp(-beta ||x - x'(y)||^2)`` for many points.

    Log-sum-exp stabilized; ``beta`` defaults to ``1 / (2 sigma^2)``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, np.newaxis]
    if pts.shape[1] != code.dim:
        raise DimensionMismatch("point dimension does not match the codebook")
    if q.m != code.m:
        raise DimensionMismatch("prior size does not match the codebook")
    if beta is None:
        beta = 1.0 / (2.0 * code.sigma**2)
    with np.errstate(divide="ignore"):
        log_q = np.where(q.probs > 0.0, np.log(q.probs), -np.inf)
    scores = log_q[np.newaxis, :] - beta * squared_distances(pts, code.vectors)
    scores = scores - scores.max(axis=1, keepdims=True)
    expd = np.exp(scores)
    return expd / expd.sum(axis=1, keepdims=True)


def optimal_encoder_row(
    x, code: GaussianCodebook, q: ProbVector, beta: float | None = None
) -> ProbVector:
    """Posterior over code indices for a single input point."""
    row = posterior_matrix(np.asarray(x, dtype=float)[np.newaxis, :], code, q, beta)[0]
    return ProbVector.renormalized(row)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def init_codebook_vectors(
    data: EmpiricalInput, m: int, rng: np.random.Generator
) -> np.ndarray:
    """Seeded init: sample m distinct data points (with replacement if N < m)."""
    replace = data.n < m
    idx = rng.choice(data.n, size=m, replace=replace)
    return data.points[idx].copy()


def _assignment_costs(
    d2: np.ndarray, sigma: float, q: ProbVector, leak: np.ndarray | None
) -> np.ndarray:
    """Per-(point, code) cost whose argmin is the exact encoder-row minimizer.

    With leakage the cost of picking y is the leak-averaged cost over y'.
    """
    with np.errstate(divide="ignore"):
        log_q = np.where(q.probs > 0.0, np.log(q.probs), -np.inf)
    base = d2 / (2.0 * sigma**2) - log_q[np.newaxis, :]
    if leak is None:
        return base
    if np.any(np.isinf(base)):
        # -inf * 0 from masked prior entries must not poison the average
        base = np.where(np.isinf(base), 1e300, base)
    return base @ leak


def _respawn_dead(
    vectors: np.ndarray,
    resp_mass: np.ndarray,
    per_point_distortion: np.ndarray,
    data: EmpiricalInput,
) -> np.ndarray:
    """Move zero-responsibility codes onto the highest-distortion points.

    A zero-responsibility code contributes nothing to the objective, so the
    move itself never changes the trace value.
    """
    dead = np.flatnonzero(resp_mass <= 0.0)
    if not dead.size:
        return vectors
    order = np.argsort(-per_point_distortion, kind="stable")
    out = vectors.copy()
    for rank, y in enumerate(dead):
        out[y] = data.points[order[rank % data.n]]
    return out


def _train_core(
    data: EmpiricalInput,
    m: int,
    sigma_schedule: SigmaSchedule,
    q_update: bool,
    iterations: int,
    rng: np.random.Generator,
    volume: float,
    leak: np.ndarray | None,
) -> tuple[SoftEncoder, GaussianCodebook, ProbVector, list[TraceRow]]:
    """Alternating exact coordinate minimization shared by the VQ trainers."""
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    vectors = init_codebook_vectors(data, m, rng)
    q = ProbVector.uniform(m)
    w = data.weights

    def evaluate(vectors, sigma, rows):
        resp = rows if leak is None else rows @ leak.T
        d2 = squared_distances(data.points, vectors)
        dvq_val = 2.0 * float(np.sum(w[:, np.newaxis] * resp * d2))
        marginal = ProbVector.renormalized(w @ resp)
        cl = code_length(marginal, q, unit="nats")
        code = GaussianCodebook(vectors, sigma, volume)
        const = gaussian_log_constant(code)
        total = from_nats(dvq_val / (4.0 * sigma**2) + cl + const, "bits")
        return resp, d2, dvq_val, from_nats(cl, "bits"), from_nats(const, "bits"), total

    def assign(vectors, sigma):
        d2 = squared_distances(data.points, vectors)
        costs = _assignment_costs(d2, sigma, q, leak)
        rows = np.zeros((data.n, m))
        rows[np.arange(data.n), np.argmin(costs, axis=1)] = 1.0
        return rows, d2

    sigma = sigma_schedule.value(0)
    rows, _ = assign(vectors, sigma)
    _, _, d0, cl0, c0, t0 = evaluate(vectors, sigma, rows)
    trace = [TraceRow(0, d0, cl0, c0, t0)]

    for t in range(1, iterations + 1):
        sigma = sigma_schedule.value(t - 1)
        rows, d2 = assign(vectors, sigma)
        resp = rows if leak is None else rows @ leak.T
        joint = w[:, np.newaxis] * resp
        resp_mass = joint.sum(axis=0)
        per_point = w * np.sum(resp * d2, axis=1)
        vectors = _respawn_dead(vectors, resp_mass, per_point, data)
        alive = resp_mass > 0.0
        centroids = vectors.copy()
        centroids[alive] = (joint.T[alive] @ data.points) / resp_mass[alive, np.newaxis]
        vectors = centroids
        if q_update:
            q = ProbVector.renormalized(w @ resp)
        _, _, dv, cl, const, total = evaluate(vectors, sigma, rows)
        trace.append(TraceRow(t, dv, cl, const, total))

    encoder = SoftEncoder(rows)
    codebook = GaussianCodebook(vectors, sigma_schedule.value(max(iterations - 1, 0)), volume)
    return encoder, codebook, q, trace


def train_soft_vq(
    data: EmpiricalInput,
    m: int,
    sigma_schedule: SigmaSchedule | float,
    q_update: bool = True,
    iterations: int = 20,
    seed: int = 0,
    volume: float = 1.0,
) -> tuple[SoftEncoder, GaussianCodebook, ProbVector, list[TraceRow]]:
    """Train a soft VQ by exact alternating minimization.

    Per iteration: winner-take-all encoder rows (the exact row minimizer of
    the assembled objective, lowest index on ties), responsibility-weighted
    centroids, and optionally the induced marginal as the new output prior.
    Dead codes are respawned at the highest-distortion data points; with
    ``q_update`` on, a state whose prior mass has already collapsed to zero
    stays retired, which is exactly the active-state pressure the output
    code-length term exerts.
    """
    if isinstance(sigma_schedule, (int, float)):
        sigma_schedule = SigmaSchedule(float(sigma_schedule))
    rng = np.random.Generator(np.random.Philox(seed))
    return _train_core(data, m, sigma_schedule, q_update, iterations, rng, volume, None)
