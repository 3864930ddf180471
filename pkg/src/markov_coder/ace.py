"""Tree-structured deterministic encoders and their code-length identities.

A tree source groups the nodes of each layer into clusters of siblings; each
cluster feeds one parent node in the layer above through a deterministic
map.  With a perfect generative model the joint code length telescopes into
per-layer cluster and component entropies, and with a factorial top model it
collapses further to

    value = sum_c H(cluster c at layer 0) - sum_{l>=1} sum_c I(cluster c at layer l)

so minimizing the code length is the same as maximizing the summed
intra-cluster mutual information.  Everything here is exact enumeration
under a cell cap: ACE is an objective calculator and exhaustive-search
optimizer over small map spaces, not a large-scale trainer.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CapExceeded,
    DimensionMismatch,
    InvalidDistribution,
    NotDeterministic,
)
from .chain import DEFAULT_CELL_CAP, LayeredChain, all_source_marginals, objective_reversed
from .prob import ProbVector, TransitionMatrix, code_length, entropy, from_nats
from .softvq import EmpiricalInput, GaussianCodebook, SoftEncoder, dvq, gaussian_log_constant
from .ladder import embed_rows


@dataclass(frozen=True)
class TreeTopology:
    """Node alphabets and sibling clusters for every layer.

    ``alphabets[l][i]`` is the state count of node ``i`` in layer ``l``.
    ``clusters[l]`` partitions layer ``l``'s nodes; for ``l < L`` cluster
    ``c`` is the sibling set whose parent is node ``c`` of layer ``l+1``
    (the parent map is this bijection).  The top layer's clusters only group
    nodes for the factorial top model.
    """

    alphabets: tuple[tuple[int, ...], ...]
    clusters: tuple[tuple[tuple[int, ...], ...], ...]

    def __post_init__(self) -> None:
        alphabets = tuple(tuple(int(a) for a in layer) for layer in self.alphabets)
        # member tuples are kept sorted: maps and packed states use node-id order
        clusters = tuple(
            tuple(tuple(sorted(int(i) for i in c)) for c in layer)
            for layer in self.clusters
        )
        object.__setattr__(self, "alphabets", alphabets)
        object.__setattr__(self, "clusters", clusters)
        if len(alphabets) < 1:
            raise InvalidDistribution("a tree needs at least one layer")
        if len(clusters) != len(alphabets):
            raise DimensionMismatch("clusters must be given for every layer")
        for l, layer in enumerate(alphabets):
            if any(a < 1 for a in layer) or not layer:
                raise InvalidDistribution(f"layer {l} alphabets must be positive")
            members = sorted(i for c in clusters[l] for i in c)
            if members != list(range(len(layer))):
                raise InvalidDistribution(f"clusters must partition layer {l} exactly")
            if any(not c for c in clusters[l]):
                raise InvalidDistribution(f"layer {l} has an empty cluster")
        for l in range(len(alphabets) - 1):
            if len(clusters[l]) != len(alphabets[l + 1]):
                raise DimensionMismatch(
                    f"layer {l} needs one cluster per layer-{l + 1} node"
                )

    @property
    def depth(self) -> int:
        return len(self.alphabets) - 1

    @classmethod
    def build(
        cls,
        alphabets,
        clusters_below,
        top_clusters=None,
    ) -> "TreeTopology":
        """Topology from per-layer clusters below the top; top defaults to singletons."""
        alphabets = tuple(tuple(layer) for layer in alphabets)
        if top_clusters is None:
            top_clusters = tuple((i,) for i in range(len(alphabets[-1])))
        return cls(alphabets, tuple(clusters_below) + (tuple(top_clusters),))


@dataclass(frozen=True)
class TreeSource:
    """Deterministic tree-structured source over a given layer-0 joint.

    ``maps[l][c]`` is an integer array of shape equal to cluster ``c``'s
    member alphabets (members in node-id order) giving the parent state.
    """

    topology: TreeTopology
    layer0_joint: np.ndarray
    maps: tuple[tuple[np.ndarray, ...], ...]

    def __post_init__(self) -> None:
        topo = self.topology
        joint = np.asarray(self.layer0_joint, dtype=float)
        if joint.shape != tuple(topo.alphabets[0]):
            raise DimensionMismatch("layer-0 joint shape does not match the alphabets")
        if np.any(joint < 0.0) or abs(float(joint.sum()) - 1.0) > 1e-10:
            raise InvalidDistribution("layer-0 joint must be a distribution")
        joint = joint.copy()
        joint.setflags(write=False)
        object.__setattr__(self, "layer0_joint", joint)
        maps = tuple(tuple(np.asarray(m, dtype=int) for m in layer) for layer in self.maps)
        object.__setattr__(self, "maps", maps)
        if len(maps) != topo.depth:
            raise DimensionMismatch("one map family required per transition")
        for l in range(topo.depth):
            if len(maps[l]) != len(topo.clusters[l]):
                raise DimensionMismatch(f"layer {l} needs one map per cluster")
            for c, members in enumerate(topo.clusters[l]):
                expected = tuple(topo.alphabets[l][i] for i in members)
                table = maps[l][c]
                if table.shape != expected:
                    raise DimensionMismatch(
                        f"map for layer {l} cluster {c} must have shape {expected}"
                    )
                parent_size = topo.alphabets[l + 1][c]
                if np.any(table < 0) or np.any(table >= parent_size):
                    raise InvalidDistribution(
                        f"map for layer {l} cluster {c} exceeds the parent alphabet"
                    )


def _cells(shape) -> int:
    return int(math.prod(shape))


def layer_joints(ts: TreeSource, cap: int = DEFAULT_CELL_CAP) -> list[np.ndarray]:
    """Exact joint distribution over every layer's nodes, bottom to top."""
    topo = ts.topology
    for layer in topo.alphabets:
        if _cells(layer) > cap:
            raise CapExceeded(f"layer joint would exceed {cap} cells")
    joints = [ts.layer0_joint]
    for l in range(topo.depth):
        shape = joints[-1].shape
        next_shape = tuple(topo.alphabets[l + 1])
        idx = np.indices(shape)
        parent_states = []
        for c, members in enumerate(topo.clusters[l]):
            sub = tuple(idx[m] for m in members)
            parent_states.append(ts.maps[l][c][sub])
        flat = np.ravel_multi_index(tuple(parent_states), next_shape)
        out = np.bincount(
            flat.ravel(), weights=joints[-1].ravel(), minlength=_cells(next_shape)
        )
        joints.append(out.reshape(next_shape))
    return joints


def _marginal(joint: np.ndarray, members: tuple[int, ...]) -> np.ndarray:
    # members are sorted node ids, so the surviving axes keep node-id order
    other = tuple(a for a in range(joint.ndim) if a not in members)
    return joint.sum(axis=other) if other else joint


def _entropy_nats(arr: np.ndarray) -> float:
    flat = arr.ravel()
    mask = flat > 0.0
    return float(-np.sum(flat[mask] * np.log(flat[mask])))


def cluster_entropy_decomposition(
    ts: TreeSource, unit: str = "bits", cap: int = DEFAULT_CELL_CAP
) -> tuple[list[list[float]], list[list[float]]]:
    """Marginal entropies of every cluster and every component, per layer.

    Returns ``(cluster_entropies, component_entropies)`` where entry ``[l][c]``
    is the joint entropy of cluster ``c``'s members (respectively node ``c``)
    in layer ``l``.
    """
    joints = layer_joints(ts, cap)
    topo = ts.topology
    cluster_h: list[list[float]] = []
    component_h: list[list[float]] = []
    for l, joint in enumerate(joints):
        cluster_h.append(
            [
                from_nats(_entropy_nats(_marginal(joint, members)), unit)
                for members in topo.clusters[l]
            ]
        )
        component_h.append(
            [
                from_nats(_entropy_nats(_marginal(joint, (node,))), unit)
                for node in range(len(topo.alphabets[l]))
            ]
        )
    return cluster_h, component_h


def cluster_mutual_information(
    ts: TreeSource, layer: int, cluster: int, unit: str = "bits", cap: int = DEFAULT_CELL_CAP
) -> float:
    """Sum of member entropies minus the cluster joint entropy; non-negative."""
    joints = layer_joints(ts, cap)
    members = ts.topology.clusters[layer][cluster]
    joint = joints[layer]
    total = sum(_entropy_nats(_marginal(joint, (node,))) for node in members)
    total -= _entropy_nats(_marginal(joint, members))
    return from_nats(total, unit)


def ace_tree_objective(
    ts: TreeSource, unit: str = "bits", cap: int = DEFAULT_CELL_CAP
) -> tuple[float, float, float]:
    """Closed-form tree objective under a perfect model with a factorial top.

    Returns ``(value, mi_sum, h0_sum)`` with ``value = h0_sum - mi_sum``:
    ``mi_sum`` sums intra-cluster mutual information over layers 1..L and
    ``h0_sum`` sums the layer-0 cluster entropies.
    """
    cluster_h, component_h = cluster_entropy_decomposition(ts, unit="nats", cap=cap)
    topo = ts.topology
    h0_sum = sum(cluster_h[0])
    mi_sum = 0.0
    for l in range(1, topo.depth + 1):
        for c, members in enumerate(topo.clusters[l]):
            mi_sum += sum(component_h[l][node] for node in members) - cluster_h[l][c]
    return from_nats(h0_sum - mi_sum, unit), from_nats(mi_sum, unit), from_nats(h0_sum, unit)


def ace_tree_objective_structural(
    ts: TreeSource, unit: str = "bits", cap: int = DEFAULT_CELL_CAP
) -> float:
    """The same objective assembled from the entropy decomposition directly.

    ``sum_{l<L} cluster H - sum_{l>=1} component H + top factorial code length``
    where the factorial top contributes the top-layer cluster entropies.
    """
    cluster_h, component_h = cluster_entropy_decomposition(ts, unit="nats", cap=cap)
    depth = ts.topology.depth
    total = sum(sum(cluster_h[l]) for l in range(depth))
    total -= sum(sum(component_h[l]) for l in range(1, depth + 1))
    total += sum(cluster_h[depth])
    return from_nats(total, unit)


def flatten_tree_to_chain(ts: TreeSource, cap: int = DEFAULT_CELL_CAP) -> LayeredChain:
    """Pack each layer's nodes into one alphabet and build the flat chain.

    States pack in mixed radix with node-id order (C order).  The model is
    perfect per cluster, i.e. each backward conditional is the product of
    per-cluster Bayes reversals (not the exact joint reversal, which would
    also model cross-cluster correlations the tree structure cannot carry),
    and the top is the factorial product of top-cluster marginals.  The flat
    chain is the enumeration oracle for the tree identities.
    """
    topo = ts.topology
    joints = layer_joints(ts, cap)
    sizes = [_cells(layer) for layer in topo.alphabets]
    forwards = []
    backwards = []
    for l in range(topo.depth):
        shape = tuple(topo.alphabets[l])
        next_shape = tuple(topo.alphabets[l + 1])
        idx = np.indices(shape)
        upper_idx = np.indices(next_shape)
        parent_states = []
        backward = np.ones((sizes[l], sizes[l + 1]))
        for c, members in enumerate(topo.clusters[l]):
            sub = tuple(idx[m] for m in members)
            parent_states.append(ts.maps[l][c][sub])
            # per-cluster reversal: P_c(sub | parent) = P_c(sub) [map(sub) = parent] / P(parent node)
            cluster_marg = _marginal(joints[l], members).ravel()
            parent_marg = _marginal(joints[l + 1], (c,))
            if np.any(parent_marg <= 0.0):
                raise InvalidDistribution(
                    f"layer {l + 1} node {c} has an unreachable state; "
                    "the per-cluster reversal is undefined"
                )
            sub_flat = np.ravel_multi_index(
                sub, tuple(topo.alphabets[l][m] for m in members)
            ).ravel()
            parent_of_sub = ts.maps[l][c].ravel()
            cluster_rev = (
                cluster_marg[:, np.newaxis]
                * (parent_of_sub[:, np.newaxis] == np.arange(len(parent_marg)))
                / parent_marg[np.newaxis, :]
            )
            backward = backward * cluster_rev[
                sub_flat[:, np.newaxis], upper_idx[c].ravel()[np.newaxis, :]
            ]
        targets = np.ravel_multi_index(tuple(parent_states), next_shape).ravel()
        forwards.append(TransitionMatrix.deterministic(targets, sizes[l + 1]))
        backwards.append(TransitionMatrix.renormalized(backward))

    top_joint = joints[-1]
    factorial = np.ones_like(top_joint)
    idx = np.indices(top_joint.shape)
    for members in topo.clusters[-1]:
        marg = _marginal(top_joint, members)
        factorial = factorial * marg[tuple(idx[m] for m in members)]
    prior = ProbVector.renormalized(ts.layer0_joint.ravel())
    top = ProbVector.renormalized(factorial.ravel())
    return LayeredChain(
        tuple(sizes), prior, tuple(forwards), tuple(backwards), top
    )


def ace_flat_identity(chain: LayeredChain, unit: str = "bits") -> tuple[float, float]:
    """Both sides of the deterministic-source/perfect-model identity.

    ``lhs`` is the full objective; ``rhs = H(P^0) - H(P^L) + L(P^L, Q^L)``.
    The caller asserts their agreement.  Requires indicator forward columns
    and a model equal to the Bayes reversal of the source.
    """
    for l, t in enumerate(chain.source_forward):
        if not t.is_deterministic():
            raise NotDeterministic(f"source_forward[{l}] has a non-indicator column")
    marginals = all_source_marginals(chain)
    lhs = objective_reversed(chain, unit=unit)
    rhs = (
        entropy(chain.source_prior, unit=unit)
        - entropy(marginals[-1], unit=unit)
        + code_length(marginals[-1], chain.model_top, unit=unit)
    )
    return lhs, rhs


def enumerate_cluster_maps(member_alphabets, parent_alphabet: int):
    """All total maps from a cluster's joint states to the parent alphabet."""
    shape = tuple(int(a) for a in member_alphabets)
    for values in itertools.product(range(parent_alphabet), repeat=_cells(shape)):
        yield np.asarray(values, dtype=int).reshape(shape)


# ---------------------------------------------------------------------------
# Hierarchical (Gaussian) variant
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HvqCluster:
    """One per-cluster soft-VQ stage acting on a slice of the representation."""

    dims: tuple[int, ...]
    encoder: SoftEncoder
    codebook: GaussianCodebook
    prior: ProbVector | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if self.codebook.dim != len(self.dims):
            raise DimensionMismatch("cluster codebook dimension must match its slice")
        if self.encoder.m != self.codebook.m:
            raise DimensionMismatch("cluster encoder and codebook sizes disagree")
        if self.prior is not None and self.prior.m != self.encoder.m:
            raise DimensionMismatch("cluster prior size does not match the encoder")


@dataclass(frozen=True)
class HierarchicalVq:
    """Layers of per-cluster stages; each layer's slices partition its input."""

    layers: tuple[tuple[HvqCluster, ...], ...]
    rep: str = "one_hot"

    def __post_init__(self) -> None:
        object.__setattr__(self, "layers", tuple(tuple(layer) for layer in self.layers))
        if not self.layers or any(not layer for layer in self.layers):
            raise InvalidDistribution("hierarchy must have at least one stage per layer")
        for cluster in self.layers[-1]:
            if cluster.prior is None:
                raise InvalidDistribution("top-layer clusters need a prior")


def hierarchical_vq_objective(
    hvq: HierarchicalVq, data: EmpiricalInput, unit: str = "bits"
) -> float:
    """Sum of per-cluster stage objectives plus the factorial top code length."""
    points = data.points
    w = data.weights
    total = 0.0
    for layer in hvq.layers:
        covered = sorted(d for cluster in layer for d in cluster.dims)
        if covered != list(range(points.shape[1])):
            raise DimensionMismatch("cluster slices must partition the representation")
        next_cols = []
        for cluster in layer:
            slice_data = EmpiricalInput(points[:, cluster.dims], w)
            d = dvq(cluster.encoder, cluster.codebook, slice_data)
            total += d / (4.0 * cluster.codebook.sigma**2)
            total += gaussian_log_constant(cluster.codebook)
            next_cols.append(embed_rows(cluster.encoder.probs, hvq.rep))
        points = np.hstack(next_cols)
    for cluster in hvq.layers[-1]:
        marginal = ProbVector.renormalized(w @ cluster.encoder.probs)
        total += code_length(marginal, cluster.prior, unit="nats")
    return from_nats(total, unit)
