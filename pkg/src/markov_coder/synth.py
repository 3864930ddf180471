"""Deterministic synthetic generators for chains, trees, instances and data.

All randomness flows through one named counter-based generator (Philox) so
that fixtures and experiment outputs are reproducible across platforms from
a single 64-bit seed.
"""

from __future__ import annotations

import numpy as np

from .ace import TreeSource, TreeTopology
from .chain import LayeredChain, with_perfect_model
from .errors import InvalidDistribution
from .helmholtz import TwoLayerInstance
from .prob import ProbVector, TransitionMatrix
from .softvq import EmpiricalInput


def make_rng(seed: int) -> np.random.Generator:
    """The package-wide seeded generator (64-bit counter-based Philox)."""
    return np.random.Generator(np.random.Philox(int(seed)))


def random_prob_vector(rng: np.random.Generator, m: int) -> ProbVector:
    """Strictly positive random distribution (normalized gamma draws)."""
    return ProbVector.renormalized(rng.gamma(1.0, 1.0, size=m) + 1e-6)


def random_transition(rng: np.random.Generator, m_to: int, m_from: int) -> TransitionMatrix:
    """Strictly positive random column-stochastic matrix."""
    return TransitionMatrix.renormalized(rng.gamma(1.0, 1.0, size=(m_to, m_from)) + 1e-6)


def random_chain(rng: np.random.Generator, layer_sizes) -> LayeredChain:
    """Random source/model pair with strictly positive probabilities."""
    sizes = tuple(int(m) for m in layer_sizes)
    prior = random_prob_vector(rng, sizes[0])
    forwards = tuple(
        random_transition(rng, sizes[l + 1], sizes[l]) for l in range(len(sizes) - 1)
    )
    backwards = tuple(
        random_transition(rng, sizes[l], sizes[l + 1]) for l in range(len(sizes) - 1)
    )
    top = random_prob_vector(rng, sizes[-1])
    return LayeredChain(sizes, prior, forwards, backwards, top)


def random_surjective_map(rng: np.random.Generator, m_from: int, m_to: int) -> np.ndarray:
    """Random total map hitting every target at least once (needs m_from >= m_to)."""
    if m_from < m_to:
        raise InvalidDistribution("surjective map needs at least as many sources as targets")
    targets = np.concatenate(
        [rng.permutation(m_to), rng.integers(0, m_to, size=m_from - m_to)]
    )
    return rng.permutation(targets)


def random_deterministic_chain(
    rng: np.random.Generator, layer_sizes, perfect_top: bool = False
) -> LayeredChain:
    """Deterministic surjective source with the exact-reversal model.

    Layer sizes must be non-increasing so each map can be surjective; with a
    positive prior every state then stays reachable and the Bayes reversal
    is defined everywhere.  The top model is random unless ``perfect_top``.
    """
    sizes = tuple(int(m) for m in layer_sizes)
    if any(sizes[l + 1] > sizes[l] for l in range(len(sizes) - 1)):
        raise InvalidDistribution("deterministic chains need non-increasing layer sizes")
    prior = random_prob_vector(rng, sizes[0])
    forwards = tuple(
        TransitionMatrix.deterministic(
            random_surjective_map(rng, sizes[l], sizes[l + 1]), sizes[l + 1]
        )
        for l in range(len(sizes) - 1)
    )
    top = None if perfect_top else random_prob_vector(rng, sizes[-1])
    return with_perfect_model(prior, forwards, model_top=top)


def random_two_layer_instance(
    rng: np.random.Generator, m0: int = 2, m1: int = 2
) -> TwoLayerInstance:
    """Random strictly positive two-layer instance."""
    return TwoLayerInstance(
        random_prob_vector(rng, m0),
        random_transition(rng, m1, m0),
        random_transition(rng, m0, m1),
        random_prob_vector(rng, m1),
    )


def random_tree_source(
    rng: np.random.Generator,
    layer0_alphabets=(2, 2, 2),
    cluster_sizes=(2, 1),
    parent_alphabets=(2, 2),
    depth: int = 1,
    top_grouped: bool = False,
) -> TreeSource:
    """Small random tree: contiguous clusters, surjective maps, positive joint.

    ``cluster_sizes`` partitions the layer-0 nodes in order; each cluster's
    parent gets the alphabet from ``parent_alphabets``.  With ``depth=2`` a
    further transition merges the whole first hidden layer into one node;
    ``top_grouped`` instead puts all top nodes into a single cluster so the
    factorial top model has to pay for their correlations.
    """
    if sum(cluster_sizes) != len(layer0_alphabets):
        raise InvalidDistribution("cluster sizes must partition the layer-0 nodes")
    clusters0 = []
    start = 0
    for size in cluster_sizes:
        clusters0.append(tuple(range(start, start + size)))
        start += size
    joint = rng.gamma(1.0, 1.0, size=tuple(layer0_alphabets)) + 1e-6
    joint = joint / joint.sum()
    maps0 = []
    for c, members in enumerate(clusters0):
        member_alphabets = tuple(layer0_alphabets[i] for i in members)
        n_states = int(np.prod(member_alphabets))
        table = random_surjective_map(rng, n_states, parent_alphabets[c])
        maps0.append(table.reshape(member_alphabets))

    if depth == 1:
        top_clusters = (
            (tuple(range(len(parent_alphabets))),) if top_grouped else None
        )
        topology = TreeTopology.build(
            (tuple(layer0_alphabets), tuple(parent_alphabets)),
            (tuple(clusters0),),
            top_clusters,
        )
        return TreeSource(topology, joint, (tuple(maps0),))
    if depth != 2:
        raise InvalidDistribution("only depth 1 or 2 trees are generated")
    n1 = len(parent_alphabets)
    n1_states = int(np.prod(parent_alphabets))
    top_size = int(min(n1_states, 2 + rng.integers(0, 2)))
    table = random_surjective_map(rng, n1_states, top_size)
    topology = TreeTopology.build(
        (tuple(layer0_alphabets), tuple(parent_alphabets), (top_size,)),
        (tuple(clusters0), (tuple(range(n1)),)),
    )
    return TreeSource(
        topology,
        joint,
        (tuple(maps0), (table.reshape(tuple(parent_alphabets)),)),
    )


# ---------------------------------------------------------------------------
# Point datasets
# ---------------------------------------------------------------------------


def uniform_data(
    rng: np.random.Generator, n: int, low=0.0, high=1.0, dim: int = 1
) -> EmpiricalInput:
    """n points uniform in a box, equal weights."""
    pts = rng.uniform(low, high, size=(n, dim))
    return EmpiricalInput(pts)


def gmm_data(
    rng: np.random.Generator, n: int, means, sigmas, mix=None
) -> tuple[EmpiricalInput, np.ndarray]:
    """Gaussian-mixture draw; returns the data and the component labels."""
    means = np.asarray(means, dtype=float)
    if means.ndim == 1:
        means = means[:, np.newaxis]
    sigmas = np.asarray(sigmas, dtype=float)
    k = means.shape[0]
    mix = np.full(k, 1.0 / k) if mix is None else np.asarray(mix, dtype=float) / np.sum(mix)
    labels = rng.choice(k, size=n, p=mix)
    pts = means[labels] + rng.normal(size=(n, means.shape[1])) * sigmas[labels][:, np.newaxis]
    return EmpiricalInput(pts), labels


def factors_data(
    rng: np.random.Generator, n: int, levels_a, levels_b, jitter: float = 0.0
) -> tuple[EmpiricalInput, np.ndarray]:
    """Two independent 1-D factors embedded on the two axes of the plane.

    Returns the data and ground-truth factor labels of shape (n, 2); each
    point is ``(levels_a[i] + noise, levels_b[j] + noise)`` with ``i`` and
    ``j`` drawn independently.
    """
    levels_a = np.asarray(levels_a, dtype=float)
    levels_b = np.asarray(levels_b, dtype=float)
    ia = rng.integers(0, levels_a.size, size=n)
    ib = rng.integers(0, levels_b.size, size=n)
    pts = np.stack([levels_a[ia], levels_b[ib]], axis=1)
    if jitter > 0.0:
        pts = pts + rng.normal(scale=jitter, size=pts.shape)
    return EmpiricalInput(pts), np.stack([ia, ib], axis=1)
