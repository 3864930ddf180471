"""Partitioned-mixture recognition stages and factorial-code distortion bounds.

A partitioned mixture embeds K recognition models between two layers; model
``k`` is restricted by a row of the non-negative assignment matrix ``A`` to a
patch of code indices, normalizes its posterior inside that patch, and the
stage posterior is the plain average over models.  The per-model
normalization is what keeps lateral interactions short-range; the pooled
(full-Bayes) alternative normalizes globally and is implemented alongside
for contrast.

For factorial codes built from ``n`` independent recognition models the
product-code distortion is upper-bounded by reconstructing with the average
of per-model vectors; the bound and its repeated-single-model form are
evaluated in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CapExceeded,
    DeadModel,
    DimensionMismatch,
    InvalidDistribution,
    ZeroEvidence,
)
from .prob import ProbVector, from_nats, code_length
from .softvq import (
    EmpiricalInput,
    GaussianCodebook,
    SoftEncoder,
    TraceRow,
    dvq,
    gaussian_log_constant,
    squared_distances,
)

DEFAULT_PRODUCT_CAP = 10_000_000


@dataclass(frozen=True)
class PmdConfig:
    """K patch-restricted recognition models over one code layer.

    ``assignment`` is the K x M weight matrix; every model must touch at
    least one index and every index must be covered by at least one model,
    otherwise it could never fire.
    """

    assignment: np.ndarray
    prior: ProbVector

    def __post_init__(self) -> None:
        arr = np.asarray(self.assignment, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise InvalidDistribution("assignment must be a non-empty K x M matrix")
        if np.any(arr < 0.0) or not np.all(np.isfinite(arr)):
            raise InvalidDistribution("assignment weights must be finite and >= 0")
        if arr.shape[1] != self.prior.m:
            raise DimensionMismatch("assignment columns must match the prior size")
        if np.any(arr.sum(axis=1) <= 0.0):
            raise InvalidDistribution("every recognition model needs a non-empty patch")
        if np.any(arr.sum(axis=0) <= 0.0):
            raise InvalidDistribution("every code index must be covered by some model")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "assignment", arr)

    @property
    def k(self) -> int:
        return int(self.assignment.shape[0])

    @property
    def m(self) -> int:
        return int(self.assignment.shape[1])

    @classmethod
    def single(cls, m: int, prior: ProbVector | None = None) -> "PmdConfig":
        """One model covering everything: reduces to the plain posterior."""
        prior = prior if prior is not None else ProbVector.uniform(m)
        return cls(np.ones((1, m)), prior)

    @classmethod
    def from_patches(cls, patches, m: int, prior: ProbVector | None = None) -> "PmdConfig":
        """Binary assignment from explicit per-model index lists."""
        arr = np.zeros((len(patches), m))
        for k, patch in enumerate(patches):
            arr[k, np.asarray(patch, dtype=int)] = 1.0
        prior = prior if prior is not None else ProbVector.uniform(m)
        return cls(arr, prior)

    @classmethod
    def ring(
        cls, m: int, k: int, half_width: int, prior: ProbVector | None = None
    ) -> "PmdConfig":
        """K overlapping ring patches of the given half-width (binary weights)."""
        if m % k != 0:
            raise InvalidDistribution("ring patches need k to divide m")
        step = m // k
        patches = [
            [(c * step + off) % m for off in range(-half_width, half_width + 1)]
            for c in range(k)
        ]
        return cls.from_patches(patches, m, prior)


def _model_numerators(likelihood: np.ndarray, cfg: PmdConfig) -> np.ndarray:
    lik = np.asarray(likelihood, dtype=float)
    if lik.shape != (cfg.m,):
        raise DimensionMismatch("likelihood column must have one entry per index")
    if np.any(lik < 0.0) or not np.all(np.isfinite(lik)):
        raise InvalidDistribution("likelihoods must be finite and >= 0")
    return cfg.assignment * (lik * cfg.prior.probs)[np.newaxis, :]  # (K, M)


def pmd_posterior(likelihood_column, cfg: PmdConfig) -> ProbVector:
    """Average of per-model patch-normalized posteriors.

    Each model's denominator runs over its own patch only, so rescaling all
    likelihoods inside one disjoint patch by a common factor leaves the
    output unchanged.
    """
    numer = _model_numerators(likelihood_column, cfg)
    denom = numer.sum(axis=1)
    dead = np.flatnonzero(denom <= 0.0)
    if dead.size:
        raise DeadModel(int(dead[0]))
    return ProbVector.renormalized((numer / denom[:, np.newaxis]).sum(axis=0) / cfg.k)


def bayes_posterior(likelihood_column, cfg: PmdConfig) -> ProbVector:
    """Full Bayesian average: one global denominator across all models."""
    numer = _model_numerators(likelihood_column, cfg)
    total = float(numer.sum())
    if total <= 0.0:
        raise ZeroEvidence("all recognition models have zero evidence")
    return ProbVector.renormalized(numer.sum(axis=0) / total)


# ---------------------------------------------------------------------------
# Factorial distortion bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FactorialEncoderBank:
    """n independent recognition models with their own codebooks and posteriors."""

    encoders: tuple[SoftEncoder, ...]
    codebooks: tuple[GaussianCodebook, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "encoders", tuple(self.encoders))
        object.__setattr__(self, "codebooks", tuple(self.codebooks))
        if not self.encoders or len(self.encoders) != len(self.codebooks):
            raise DimensionMismatch("need one codebook per encoder")
        n_points = self.encoders[0].n
        dim = self.codebooks[0].dim
        for enc, cb in zip(self.encoders, self.codebooks):
            if enc.n != n_points:
                raise DimensionMismatch("all encoders must cover the same points")
            if enc.m != cb.m or cb.dim != dim:
                raise DimensionMismatch("encoder/codebook shapes disagree")

    @property
    def n_models(self) -> int:
        return len(self.encoders)


def factorial_dvq_bound(bank: FactorialEncoderBank, data: EmpiricalInput) -> float:
    """Distortion bound with the averaged reconstruction ``(1/n) sum_k x'_k(y_k)``.

    Expanding the square avoids enumerating the product code.  Writing
    ``mu_k(x) = E[x'_k]`` and ``s_k(x) = E[||x'_k||^2]`` under model k's
    posterior, independence across models gives

        E||x - (1/n) sum_k x'_k||^2
          = ||x||^2 - 2 x . mean_k mu_k
            + (1/n^2) (sum_k s_k + ||sum_k mu_k||^2 - sum_k ||mu_k||^2)

    because cross-model second moments factor into products of means.
    """
    n = bank.n_models
    pts = data.points
    if bank.codebooks[0].dim != data.dim:
        raise DimensionMismatch("codebook dimension does not match the data")
    if bank.encoders[0].n != data.n:
        raise DimensionMismatch("encoder rows do not match the data")
    mu_sum = np.zeros_like(pts)
    mu_sq_sum = np.zeros(data.n)
    second_moments = np.zeros(data.n)
    for enc, cb in zip(bank.encoders, bank.codebooks):
        mu_k = enc.probs @ cb.vectors
        mu_sum += mu_k
        mu_sq_sum += np.sum(mu_k * mu_k, axis=1)
        second_moments += enc.probs @ np.sum(cb.vectors * cb.vectors, axis=1)
    per_point = (
        np.sum(pts * pts, axis=1)
        - 2.0 / n * np.sum(pts * mu_sum, axis=1)
        + (second_moments + np.sum(mu_sum * mu_sum, axis=1) - mu_sq_sum) / n**2
    )
    return 2.0 * float(np.dot(data.weights, per_point))


def repeated_model_bound(
    enc: SoftEncoder, code: GaussianCodebook, data: EmpiricalInput, n: int
) -> float:
    """Bound for one recognition model used independently n times.

    ``(2/n) E||x - x'(y)||^2 + (2(n-1)/n) E||x - mean reconstruction||^2``;
    at ``n = 1`` this is exactly the soft distortion, and the second term is
    what opens the door to factorial encoding.
    """
    if n < 1:
        raise InvalidDistribution("n must be >= 1")
    d = dvq(enc, code, data)
    mean_recon = enc.probs @ code.vectors
    resid = data.points - mean_recon
    mean_term = 2.0 * float(np.dot(data.weights, np.sum(resid * resid, axis=1)))
    return d / n + (n - 1) / n * mean_term


def optimal_joint_codebook(
    bank: FactorialEncoderBank, data: EmpiricalInput, cap: int = DEFAULT_PRODUCT_CAP
) -> np.ndarray:
    """Exact product-code minimizer ``x'(y_1..y_n) = E[x | y_1..y_n]``.

    Shape ``(M_1, ..., M_n, d)``.  Product states with zero responsibility
    get the data mean; they never contribute to the distortion.
    """
    sizes = [enc.m for enc in bank.encoders]
    if math.prod(sizes) > cap:
        raise CapExceeded(f"product code would exceed {cap} states")
    # responsibility of each product state: outer product over models
    resp = data.weights.copy()
    for enc in bank.encoders:
        resp = resp[..., np.newaxis] * enc.probs.reshape(
            resp.shape[0], *([1] * (resp.ndim - 1)), enc.m
        )
    mass = resp.sum(axis=0)
    weighted = np.tensordot(resp, data.points, axes=([0], [0]))
    mean = data.weights @ data.points
    out = np.empty(tuple(sizes) + (data.dim,))
    out[...] = mean
    alive = mass > 0.0
    out[alive] = weighted[alive] / mass[alive][:, np.newaxis]
    return out


def exact_product_dvq(
    bank: FactorialEncoderBank,
    data: EmpiricalInput,
    joint_codebook: np.ndarray,
    cap: int = DEFAULT_PRODUCT_CAP,
) -> float:
    """Exact distortion over the enumerated product code."""
    sizes = [enc.m for enc in bank.encoders]
    if math.prod(sizes) > cap:
        raise CapExceeded(f"product code would exceed {cap} states")
    jc = np.asarray(joint_codebook, dtype=float)
    if jc.shape != tuple(sizes) + (data.dim,):
        raise DimensionMismatch("joint codebook shape must be (M_1..M_n, d)")
    resp = data.weights.copy()
    for enc in bank.encoders:
        resp = resp[..., np.newaxis] * enc.probs.reshape(
            resp.shape[0], *([1] * (resp.ndim - 1)), enc.m
        )
    diff = data.points.reshape(data.n, *([1] * len(sizes)), data.dim) - jc[np.newaxis]
    return 2.0 * float(np.sum(resp * np.sum(diff * diff, axis=-1)))


def averaged_joint_codebook(bank: FactorialEncoderBank) -> np.ndarray:
    """Joint codebook built from averaged per-model vectors; realizes the bound."""
    n = bank.n_models
    sizes = [enc.m for enc in bank.encoders]
    out = np.zeros(tuple(sizes) + (bank.codebooks[0].dim,))
    for k, cb in enumerate(bank.codebooks):
        shape = [1] * n + [cb.dim]
        shape[k] = cb.m
        out = out + cb.vectors.reshape(shape) / n
    return out


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def train_pmd_stage(
    data: EmpiricalInput,
    cfg: PmdConfig,
    codebook_init: GaussianCodebook,
    iterations: int = 20,
    seed: int = 0,
) -> tuple[GaussianCodebook, SoftEncoder, list[TraceRow]]:
    """Alternating minimization of a PMD stage with Gaussian likelihoods.

    The E-step is the winner-take-all limit of the PMD posterior applied per
    recognition model (each model's patch posterior collapses to its mode,
    the models then average with weight 1/K), so with ``K = 1`` the
    trajectory coincides exactly with the plain soft-VQ trainer.  The M-step
    takes responsibility-weighted centroids; the trace records the
    repeated-single-model bound at ``n = K`` in its distortion column, which
    reduces to the plain distortion when ``K = 1``.
    """
    if cfg.m != codebook_init.m:
        raise DimensionMismatch("config and codebook disagree on the code count")
    if codebook_init.dim != data.dim:
        raise DimensionMismatch("codebook dimension does not match the data")
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    del seed  # deterministic given (data, cfg, init); kept for API symmetry

    vectors = codebook_init.vectors.copy()
    sigma = codebook_init.sigma
    volume = codebook_init.volume
    w = data.weights
    with np.errstate(divide="ignore"):
        log_patch_prior = np.where(
            cfg.assignment * cfg.prior.probs[np.newaxis, :] > 0.0,
            np.log(cfg.assignment * cfg.prior.probs[np.newaxis, :]),
            -np.inf,
        )  # (K, M)

    def assign(vectors: np.ndarray) -> np.ndarray:
        # per-model WTA in the log domain: argmin d^2/(2 sigma^2) - log(A_k * prior)
        d2 = squared_distances(data.points, vectors)
        rows = np.zeros((data.n, cfg.m))
        base = d2 / (2.0 * sigma**2)
        for k in range(cfg.k):
            cost = base - log_patch_prior[k][np.newaxis, :]
            winners = np.argmin(cost, axis=1)
            rows[np.arange(data.n), winners] += 1.0 / cfg.k
        return rows

    def evaluate(vectors: np.ndarray, rows: np.ndarray, t: int) -> TraceRow:
        code = GaussianCodebook(vectors, sigma, volume)
        enc = SoftEncoder(rows)
        bound = repeated_model_bound(enc, code, data, cfg.k)
        marginal = ProbVector.renormalized(w @ rows)
        cl = code_length(marginal, cfg.prior, unit="nats")
        const = gaussian_log_constant(code)
        total = from_nats(bound / (4.0 * sigma**2) + cl + const, "bits")
        return TraceRow(t, bound, from_nats(cl, "bits"), from_nats(const, "bits"), total)

    rows = assign(vectors)
    trace = [evaluate(vectors, rows, 0)]
    for t in range(1, iterations + 1):
        rows = assign(vectors)
        joint = w[:, np.newaxis] * rows
        mass = joint.sum(axis=0)
        dead = np.flatnonzero(mass <= 0.0)
        if dead.size:
            d2 = squared_distances(data.points, vectors)
            per_point = w * np.sum(rows * d2, axis=1)
            order = np.argsort(-per_point, kind="stable")
            for rank, y in enumerate(dead):
                vectors[y] = data.points[order[rank % data.n]]
        alive = mass > 0.0
        vectors[alive] = (joint.T[alive] @ data.points) / mass[alive, np.newaxis]
        trace.append(evaluate(vectors, rows, t))

    return GaussianCodebook(vectors, sigma, volume), SoftEncoder(rows), trace
