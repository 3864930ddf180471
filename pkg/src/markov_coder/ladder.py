"""Coupled soft-VQ ladders and topographic maps via probability leakage.

A ladder stacks soft VQs so that each stage encodes the representation
produced by the stage below; the total objective is the weighted sum of the
per-stage distortions plus the top-layer code length and the per-stage
resolution constants.

A leakage matrix ``Pr(y'|y)`` arises by composing a stage with the layer
above it and redistributes posterior probability among the first hidden
layer's states.  Training against the leaked distortion yields the batch
topographic-map update: winners are chosen by leakage-averaged cost and
centroids are weighted by leaked responsibilities.  Leakage matrices are
always stored together with the generating pair ``(Pr(z|y), Pr(y'|z))`` and
recomputed from it, never accepted as raw matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidDistribution, SchemaError
from .prob import (
    ProbVector,
    TransitionMatrix,
    bayes_reverse,
    code_length,
    from_nats,
)
from .chain import LayeredChain, all_source_marginals
from .softvq import (
    EmpiricalInput,
    GaussianCodebook,
    SigmaSchedule,
    SoftEncoder,
    TraceRow,
    _train_core,
    code_marginal,
    dvq,
    gaussian_log_constant,
    posterior_matrix,
    squared_distances,
)


@dataclass(frozen=True)
class LeakageMatrix:
    """Square ``Pr(y'|y)`` stored with the factorization that generated it."""

    z_given_y: TransitionMatrix
    y_given_z: TransitionMatrix

    def __post_init__(self) -> None:
        if self.z_given_y.m_from != self.y_given_z.m_to:
            raise DimensionMismatch("factor pair does not compose to a square matrix")
        if self.z_given_y.m_to != self.y_given_z.m_from:
            raise DimensionMismatch("inner dimensions of the factor pair disagree")

    @property
    def m(self) -> int:
        return self.z_given_y.m_from

    @property
    def matrix(self) -> np.ndarray:
        """``Pr(y'|y) = sum_z Pr(y'|z) Pr(z|y)``, recomputed from the pair."""
        return self.y_given_z.matrix @ self.z_given_y.matrix

    @classmethod
    def identity(cls, m: int) -> "LeakageMatrix":
        eye = TransitionMatrix.identity(m)
        return cls(eye, eye)


def compose_leakage(
    z_given_y: TransitionMatrix, y_given_z: TransitionMatrix
) -> LeakageMatrix:
    """Compose a stored factor pair into a leakage matrix."""
    return LeakageMatrix(z_given_y, y_given_z)


def leakage_from_spec(
    topology: str, m: int, parents: int, kernel
) -> LeakageMatrix:
    """Build a neighborhood leakage factorization.

    ``Pr(z|y)`` assigns each of the ``m`` nodes deterministically to one of
    ``parents`` blocks; ``Pr(y'|z)`` spreads the kernel (odd length, offsets
    ``-r..r``) over every member of block ``z``.  ``chain`` clips at the
    edges, ``ring`` wraps, ``grid`` applies the kernel separably on a square
    layout (``m`` and ``parents`` must both be squares).
    """
    kernel = np.asarray(kernel, dtype=float)
    if kernel.ndim != 1 or kernel.size % 2 != 1 or np.any(kernel < 0.0):
        raise SchemaError("kernel must be a 1-D odd-length non-negative array")
    if kernel.sum() <= 0.0:
        raise SchemaError("kernel must have positive mass")
    radius = kernel.size // 2

    if topology in ("chain", "ring"):
        if m % parents != 0:
            raise SchemaError("parents must divide the number of nodes")
        block = m // parents
        assign = np.arange(m) // block
        z_given_y = TransitionMatrix.deterministic(assign, parents)
        spread = np.zeros((m, parents))
        for z in range(parents):
            for y in np.flatnonzero(assign == z):
                for off in range(-radius, radius + 1):
                    target = y + off
                    if topology == "ring":
                        target %= m
                    elif target < 0 or target >= m:
                        continue
                    spread[target, z] += kernel[off + radius]
        y_given_z = TransitionMatrix.renormalized(spread)
        return LeakageMatrix(z_given_y, y_given_z)

    if topology == "grid":
        side = round(m**0.5)
        pside = round(parents**0.5)
        if side * side != m or pside * pside != parents or side % pside != 0:
            raise SchemaError("grid topology needs square node and parent counts")
        block = side // pside
        rows, cols = np.divmod(np.arange(m), side)
        assign = (rows // block) * pside + (cols // block)
        z_given_y = TransitionMatrix.deterministic(assign, parents)
        spread = np.zeros((m, parents))
        for z in range(parents):
            for y in np.flatnonzero(assign == z):
                yr, yc = divmod(int(y), side)
                for dr in range(-radius, radius + 1):
                    for dc in range(-radius, radius + 1):
                        tr, tc = yr + dr, yc + dc
                        if 0 <= tr < side and 0 <= tc < side:
                            spread[tr * side + tc, z] += (
                                kernel[dr + radius] * kernel[dc + radius]
                            )
        y_given_z = TransitionMatrix.renormalized(spread)
        return LeakageMatrix(z_given_y, y_given_z)

    raise SchemaError(f"unknown leakage topology {topology!r}")


def leaked_dvq(
    enc: SoftEncoder,
    code: GaussianCodebook,
    data: EmpiricalInput,
    leak: LeakageMatrix,
) -> float:
    """Distortion under the leaked posterior ``Pr(y'|x) = sum_y Pr(y'|y) Pr(y|x)``."""
    if leak.m != enc.m:
        raise DimensionMismatch("leakage size does not match the encoder")
    leaked_rows = enc.probs @ leak.matrix.T
    return dvq(SoftEncoder(leaked_rows), code, data)


# ---------------------------------------------------------------------------
# VQ-ladders
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LadderStage:
    encoder: SoftEncoder
    codebook: GaussianCodebook

    def __post_init__(self) -> None:
        if self.encoder.m != self.codebook.m:
            raise DimensionMismatch("stage encoder and codebook sizes disagree")


@dataclass(frozen=True)
class LadderBreakdown:
    """Per-stage distortions and constants plus the top code-length term (bits)."""

    stage_dvq: tuple[float, ...]
    stage_constant_bits: tuple[float, ...]
    top_code_length_bits: float
    total_bits: float


@dataclass(frozen=True)
class VqLadder:
    """A stack of soft-VQ stages over a shared set of training points.

    Stage ``l`` encodes the layer-``l`` representation of each point; the
    representation handed to stage ``l+1`` is either the one-hot embedding of
    the stage-``l`` winner (``rep='one_hot'``) or the stored posterior row
    itself (``rep='posterior'``).  Either way its dimension is the stage-``l``
    alphabet size, which is validated against the next codebook.
    """

    stages: tuple[LadderStage, ...]
    top_prior: ProbVector
    rep: str = "one_hot"

    def __post_init__(self) -> None:
        object.__setattr__(self, "stages", tuple(self.stages))
        if not self.stages:
            raise InvalidDistribution("a ladder needs at least one stage")
        if self.rep not in ("one_hot", "posterior"):
            raise SchemaError(f"unknown representation {self.rep!r}")
        n = self.stages[0].encoder.n
        for l, stage in enumerate(self.stages):
            if stage.encoder.n != n:
                raise DimensionMismatch("all stages must cover the same points")
            if l > 0 and stage.codebook.dim != self.stages[l - 1].encoder.m:
                raise DimensionMismatch(
                    f"stage {l} consumes a {self.stages[l - 1].encoder.m}-dim representation"
                )
        if self.top_prior.m != self.stages[-1].encoder.m:
            raise DimensionMismatch("top prior does not match the last stage")


def embed_rows(rows: np.ndarray, rep: str) -> np.ndarray:
    """Representation produced from a stage's output codes."""
    if rep == "posterior":
        return rows
    hard = np.zeros_like(rows)
    hard[np.arange(rows.shape[0]), np.argmax(rows, axis=1)] = 1.0
    return hard


def ladder_objective(
    ladder: VqLadder, data: EmpiricalInput, unit: str = "bits"
) -> tuple[float, LadderBreakdown]:
    """Total ladder code length and its per-stage breakdown."""
    points = data.points
    total_nats = 0.0
    stage_dvq = []
    stage_const = []
    for stage in ladder.stages:
        stage_data = EmpiricalInput(points, data.weights)
        d = dvq(stage.encoder, stage.codebook, stage_data)
        const = gaussian_log_constant(stage.codebook)
        total_nats += d / (4.0 * stage.codebook.sigma**2) + const
        stage_dvq.append(d)
        stage_const.append(from_nats(const, "bits"))
        points = embed_rows(stage.encoder.probs, ladder.rep)
    top_marginal = code_marginal(ladder.stages[-1].encoder, data)
    top_cl = code_length(top_marginal, ladder.top_prior, unit="nats")
    total_nats += top_cl
    breakdown = LadderBreakdown(
        tuple(stage_dvq),
        tuple(stage_const),
        from_nats(top_cl, "bits"),
        from_nats(total_nats, "bits"),
    )
    return from_nats(total_nats, unit), breakdown


def ladder_objective_functional(
    codebooks: list[GaussianCodebook],
    priors: list[ProbVector],
    data: EmpiricalInput,
    top_prior: ProbVector,
    unit: str = "bits",
) -> float:
    """Ladder objective with encoder rows tied to the codebooks as posteriors.

    Every stage's rows are the soft posterior given its codebook and prior
    and the representation handed upward is that posterior row, so the total
    is a smooth function of every codebook.  This is the form used to expose
    the self-supervision coupling between stages.
    """
    points = data.points
    total = 0.0
    rows = None
    for cb, prior in zip(codebooks, priors):
        rows = posterior_matrix(points, cb, prior)
        stage_data = EmpiricalInput(points, data.weights)
        total += dvq(SoftEncoder(rows), cb, stage_data) / (4.0 * cb.sigma**2)
        total += gaussian_log_constant(cb)
        points = rows
    top_marginal = ProbVector.renormalized(data.weights @ rows)
    total += code_length(top_marginal, top_prior, unit="nats")
    return from_nats(total, unit)


def train_ladder(
    data: EmpiricalInput,
    sizes: list[int],
    sigma_schedule: SigmaSchedule | float,
    iterations: int = 10,
    seed: int = 0,
    volumes: list[float] | None = None,
    rep: str = "one_hot",
) -> tuple[VqLadder, list[dict]]:
    """Train a ladder by bottom-up sweeps.

    Each sweep runs one alternating pass per stage, stage 0 first, then
    recomputes the upward representations, matching the layer-by-layer
    coding story.  Intermediate stages use fixed uniform priors; the top
    prior tracks the induced marginal.
    """
    if isinstance(sigma_schedule, (int, float)):
        sigma_schedule = SigmaSchedule(float(sigma_schedule))
    if volumes is None:
        volumes = [1.0] * len(sizes)
    rng = np.random.Generator(np.random.Philox(seed))
    n = data.n
    reps = [data.points]
    vectors = []
    for l, m in enumerate(sizes):
        source = reps[-1]
        idx = rng.choice(n, size=m, replace=n < m)
        vectors.append(source[idx].copy())
        reps.append(np.zeros((n, m)))

    w = data.weights
    trace: list[dict] = []
    rows_per_stage = [np.zeros((n, m)) for m in sizes]
    top_prior = ProbVector.uniform(sizes[-1])

    def stage_pass(l: int, sigma: float) -> None:
        source = reps[l]
        d2 = squared_distances(source, vectors[l])
        assign = np.argmin(d2, axis=1)
        rows = np.zeros((n, sizes[l]))
        rows[np.arange(n), assign] = 1.0
        rows_per_stage[l] = rows
        joint = w[:, np.newaxis] * rows
        mass = joint.sum(axis=0)
        dead = np.flatnonzero(mass <= 0.0)
        if dead.size:
            per_point = w * d2[np.arange(n), assign]
            order = np.argsort(-per_point, kind="stable")
            for rank, y in enumerate(dead):
                vectors[l][y] = source[order[rank % n]]
        alive = mass > 0.0
        vectors[l][alive] = (joint.T[alive] @ source) / mass[alive, np.newaxis]
        reps[l + 1] = embed_rows(rows, rep)

    for sweep in range(1, iterations + 1):
        sigma = sigma_schedule.value(sweep - 1)
        for l in range(len(sizes)):
            stage_pass(l, sigma)
        top_prior = ProbVector.renormalized(w @ rows_per_stage[-1])
        row: dict = {"iteration": sweep}
        total_nats = 0.0
        for l in range(len(sizes)):
            stage_data = EmpiricalInput(reps[l], w)
            cb = GaussianCodebook(vectors[l], sigma, volumes[l])
            d = dvq(SoftEncoder(rows_per_stage[l]), cb, stage_data)
            row[f"dvq_{l}"] = d
            total_nats += d / (4.0 * sigma**2) + gaussian_log_constant(cb)
        cl = code_length(
            ProbVector.renormalized(w @ rows_per_stage[-1]), top_prior, unit="nats"
        )
        total_nats += cl
        row["code_length_term"] = from_nats(cl, "bits")
        row["total_bits"] = from_nats(total_nats, "bits")
        trace.append(row)

    sigma_final = sigma_schedule.value(max(iterations - 1, 0))
    stages = tuple(
        LadderStage(
            SoftEncoder(rows_per_stage[l]),
            GaussianCodebook(vectors[l], sigma_final, volumes[l]),
        )
        for l in range(len(sizes))
    )
    return VqLadder(stages, top_prior, rep), trace


# ---------------------------------------------------------------------------
# Topographic maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OrderingMetrics:
    """1-D topographic diagnostics (invented quantities, not paper objects).

    ``inversion_count`` is the number of adjacent codebook pairs out of 1-D
    order after choosing the majority direction; ``path_length_ratio`` is the
    index-order path length divided by the sorted path length.  Multivariate
    codebooks are projected onto their first axis.
    """

    inversion_count: int
    path_length_ratio: float


def ordering_metrics(vectors: np.ndarray) -> OrderingMetrics:
    coords = np.asarray(vectors, dtype=float)
    if coords.ndim == 2:
        coords = coords[:, 0]
    diffs = np.diff(coords)
    ascending_breaks = int(np.sum(diffs < 0.0))
    descending_breaks = int(np.sum(diffs > 0.0))
    inversions = min(ascending_breaks, descending_breaks)
    path = float(np.sum(np.abs(diffs)))
    sorted_path = float(np.sum(np.abs(np.diff(np.sort(coords)))))
    ratio = path / sorted_path if sorted_path > 0.0 else 1.0
    return OrderingMetrics(inversions, ratio)


def train_topo_map(
    data: EmpiricalInput,
    m: int,
    leak: LeakageMatrix,
    sigma_schedule: SigmaSchedule | float,
    iterations: int = 30,
    seed: int = 0,
    volume: float = 1.0,
) -> tuple[SoftEncoder, GaussianCodebook, list[TraceRow], OrderingMetrics]:
    """Train a topographic map by minimizing the leaked distortion.

    Winners minimize the leakage-averaged cost and centroids are weighted by
    the leaked responsibilities, against a fixed uniform output prior.  With
    identity leakage the updates and the trace coincide exactly with
    :func:`~markov_coder.softvq.train_soft_vq` at ``q_update=False``.
    """
    if leak.m != m:
        raise DimensionMismatch("leakage size does not match the requested map size")
    if isinstance(sigma_schedule, (int, float)):
        sigma_schedule = SigmaSchedule(float(sigma_schedule))
    rng = np.random.Generator(np.random.Philox(seed))
    encoder, codebook, _, trace = _train_core(
        data, m, sigma_schedule, False, iterations, rng, volume, leak.matrix
    )
    return encoder, codebook, trace, ordering_metrics(codebook.vectors)


# ---------------------------------------------------------------------------
# Skip-layer identity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SkipIdentityReport:
    """Both evaluations of the 3-layer distortion along the conversion chain."""

    direct_02: float
    leaked_01: float

    @property
    def difference(self) -> float:
        return abs(self.direct_02 - self.leaked_01)


def skip_identity_check(
    chain3: LayeredChain, embedding: np.ndarray | None = None
) -> SkipIdentityReport:
    """Check the layer-0/2 and leaked layer-0/1 distortion forms agree.

    The 3-layer chain supplies ``P^0``, ``P^{1|0}`` and ``P^{2|1}``; layer-0
    states are embedded as vectors (default: 1-D positions ``0..M0-1``).

    The layer-0/2 form is the centroid distortion through the composed
    transition at its optimal reconstruction vectors.  The layer-0/1 form is
    the same quantity rewritten through the leaked posterior ``Pr(y'|x)``,
    with the reconstruction drawn through the first stage's Bayes reversal;
    dummy summation over the hidden layer makes the two numerically equal.
    """
    if chain3.depth != 2:
        raise DimensionMismatch("skip identity check requires exactly 3 layers")
    m0 = chain3.layer_sizes[0]
    if embedding is None:
        embedding = np.arange(m0, dtype=float)[:, np.newaxis]
    embedding = np.asarray(embedding, dtype=float)
    if embedding.ndim == 1:
        embedding = embedding[:, np.newaxis]
    if embedding.shape[0] != m0:
        raise DimensionMismatch("embedding must provide one vector per layer-0 state")

    w = chain3.source_prior.probs
    f0 = chain3.source_forward[0].matrix
    f1 = chain3.source_forward[1].matrix

    # layer-0/2 centroid form at optimal reconstruction vectors x'(z)
    z_given_x = f1 @ f0
    joint_zx = z_given_x * w[np.newaxis, :]
    mass_z = joint_zx.sum(axis=1)
    alive = mass_z > 0.0
    centroids = np.zeros((z_given_x.shape[0], embedding.shape[1]))
    centroids[alive] = (joint_zx[alive] @ embedding) / mass_z[alive, np.newaxis]
    direct = 2.0 * float(np.sum(joint_zx.T * squared_distances(embedding, centroids)))

    # layer-0/1 two-sided form: leaked posterior forward, stage-1 reversal back
    marginals = all_source_marginals(chain3)
    y_given_z, _ = bayes_reverse(chain3.source_forward[1], marginals[1])
    leak = compose_leakage(chain3.source_forward[1], y_given_z)
    yprime_given_x = leak.matrix @ f0
    x_given_y, _ = bayes_reverse(chain3.source_forward[0], chain3.source_prior)
    pair_d2 = squared_distances(embedding, embedding)  # (x, x')
    # sum_x w(x) sum_y' Pr(y'|x) sum_x' Pr(x'|y') ||x - x'||^2
    recon = pair_d2 @ x_given_y.matrix  # (x, y'): expected sq. distance given y'
    leaked = float(np.sum(w[:, np.newaxis] * yprime_given_x.T * recon))

    return SkipIdentityReport(direct, leaked)
