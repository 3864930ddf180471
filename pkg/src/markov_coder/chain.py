"""Layered Markov source/model pairs and the central code-length objective.

A chain stores the source in its forward (recognition) orientation and the
model in its backward (generative) orientation; every other orientation is
derived on demand via Bayes reversal, which keeps the two decompositions of
the objective consistent by construction:

- ``objective_reversed`` sums per-layer cross terms with the source running
  bottom-up against the model's top-down conditionals, plus the top-layer
  code length.
- ``objective_forward`` computes the same total through the backward-source
  decomposition obtained by reversing each source stage.
- ``objective_bruteforce`` materializes the full joint tables and evaluates
  the cross-entropy directly; it exists purely as an oracle and is the only
  code path allowed to build a joint table.

The 3-layer variant with the middle layer excluded from the accounting
(``skip_layer_objective``) and the input-only code length used by the
conventional-modelling bound (``input_code_length``) round out the module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    CapExceeded,
    DimensionMismatch,
    InvalidDistribution,
    SupportMismatch,
)
from .prob import (
    ProbVector,
    TransitionMatrix,
    bayes_reverse,
    code_length,
    conditional_entropy,
    entropy,
    from_nats,
    push_forward,
)

#: Joint tables are oracle-only; refuse to materialize more cells than this.
DEFAULT_CELL_CAP = 10_000_000


@dataclass(frozen=True)
class LayeredChain:
    """Source and model over ``L+1`` layers.

    ``source_forward[l]`` maps layer ``l`` to layer ``l+1`` (columns indexed
    by the lower layer); ``model_backward[l]`` maps layer ``l+1`` down to
    layer ``l``.  ``model_top`` is the model's marginal over the top layer.
    """

    layer_sizes: tuple[int, ...]
    source_prior: ProbVector
    source_forward: tuple[TransitionMatrix, ...]
    model_backward: tuple[TransitionMatrix, ...]
    model_top: ProbVector

    def __post_init__(self) -> None:
        sizes = tuple(int(m) for m in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "source_forward", tuple(self.source_forward))
        object.__setattr__(self, "model_backward", tuple(self.model_backward))
        if len(sizes) < 1 or any(m < 1 for m in sizes):
            raise InvalidDistribution("layer sizes must be positive")
        depth = len(sizes) - 1
        if len(self.source_forward) != depth or len(self.model_backward) != depth:
            raise DimensionMismatch(
                f"{len(sizes)} layers require {depth} transitions per direction"
            )
        if self.source_prior.m != sizes[0]:
            raise DimensionMismatch("source prior size does not match layer 0")
        if self.model_top.m != sizes[-1]:
            raise DimensionMismatch("model top size does not match layer L")
        for l in range(depth):
            fwd, bwd = self.source_forward[l], self.model_backward[l]
            if (fwd.m_from, fwd.m_to) != (sizes[l], sizes[l + 1]):
                raise DimensionMismatch(f"source_forward[{l}] has wrong shape")
            if (bwd.m_from, bwd.m_to) != (sizes[l + 1], sizes[l]):
                raise DimensionMismatch(f"model_backward[{l}] has wrong shape")

    @property
    def depth(self) -> int:
        """Number of transitions L (layers are 0..L)."""
        return len(self.layer_sizes) - 1


@dataclass(frozen=True)
class JointTable:
    """Dense joint distribution over all layer states; oracle checks only."""

    dims: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=float)
        if arr.shape != tuple(self.dims):
            raise DimensionMismatch("joint table shape does not match dims")
        if np.any(arr < 0.0):
            raise InvalidDistribution("joint table has negative entries")
        if abs(float(arr.sum()) - 1.0) > 1e-10:
            raise InvalidDistribution("joint table does not sum to 1 within 1e-10")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)


def _check_cap(sizes: tuple[int, ...], cap: int) -> None:
    cells = 1
    for m in sizes:
        cells *= m
        if cells > cap:
            raise CapExceeded(f"joint table would need more than {cap} cells")


def all_source_marginals(c: LayeredChain) -> list[ProbVector]:
    """Source marginals for every layer, ``[P^0, ..., P^L]``."""
    out = [c.source_prior]
    for t in c.source_forward:
        out.append(push_forward(t, out[-1]))
    return out


def source_marginals(c: LayeredChain) -> list[ProbVector]:
    """Source marginals above the input, ``[P^1, ..., P^L]``."""
    return all_source_marginals(c)[1:]


def model_input_marginal(c: LayeredChain) -> ProbVector:
    """The model's marginal at layer 0, pushing ``model_top`` downward."""
    q = c.model_top
    for t in reversed(c.model_backward):
        q = push_forward(t, q)
    return q


def _layer_term_nats(
    p_l: np.ndarray, fwd: TransitionMatrix, bwd: TransitionMatrix
) -> float:
    """One layer of the reversed decomposition, in nats.

    ``-sum_{i_l} P^l_{i_l} sum_{i_{l+1}} fwd[i_{l+1}, i_l] log bwd[i_l, i_{l+1}]``.
    """
    weights = p_l[np.newaxis, :] * fwd.matrix  # joint mass over (i_{l+1}, i_l)
    logs = bwd.matrix.T  # aligned so logs[i_{l+1}, i_l] = bwd[i_l, i_{l+1}]
    mask = weights > 0.0
    if np.any(logs[mask] == 0.0):
        raise SupportMismatch(
            "model conditional is 0 on a source transition with positive mass"
        )
    return float(-np.sum(weights[mask] * np.log(logs[mask])))


def objective_reversed(c: LayeredChain, unit: str = "bits") -> float:
    """Joint code length with source and model influence in opposite directions."""
    marginals = all_source_marginals(c)
    total = 0.0
    for l in range(c.depth):
        total += _layer_term_nats(
            marginals[l].probs, c.source_forward[l], c.model_backward[l]
        )
    total += code_length(marginals[-1], c.model_top, unit="nats")
    return from_nats(total, unit)


def objective_forward(c: LayeredChain, unit: str = "bits") -> float:
    """Same total as :func:`objective_reversed` via the backward-source form.

    Each source stage is Bayes-reversed first, so the per-layer term becomes
    an average over the upper layer of conditional code lengths.
    """
    marginals = all_source_marginals(c)
    total = 0.0
    for l in range(c.depth):
        reversed_stage, upper = bayes_reverse(c.source_forward[l], marginals[l])
        weights = upper.probs[np.newaxis, :] * reversed_stage.matrix
        logs = c.model_backward[l].matrix
        mask = weights > 0.0
        if np.any(logs[mask] == 0.0):
            raise SupportMismatch(
                "model conditional is 0 on a source transition with positive mass"
            )
        total += float(-np.sum(weights[mask] * np.log(logs[mask])))
    total += code_length(marginals[-1], c.model_top, unit="nats")
    return from_nats(total, unit)


def joint_source_table(c: LayeredChain, cap: int = DEFAULT_CELL_CAP) -> JointTable:
    """Materialize the joint source distribution over all layers."""
    _check_cap(c.layer_sizes, cap)
    arr = c.source_prior.probs
    for t in c.source_forward:
        arr = arr[..., np.newaxis] * t.matrix.T  # append the next layer's axis
    return JointTable(c.layer_sizes, arr)


def joint_model_table(c: LayeredChain, cap: int = DEFAULT_CELL_CAP) -> JointTable:
    """Materialize the joint model distribution over all layers."""
    _check_cap(c.layer_sizes, cap)
    arr = c.model_top.probs
    for t in reversed(c.model_backward):
        # prepend the lower layer's axis
        shape = (t.m_to, t.m_from) + (1,) * (arr.ndim - 1)
        arr = t.matrix.reshape(shape) * arr[np.newaxis, ...]
    return JointTable(c.layer_sizes, arr)


def objective_bruteforce(
    c: LayeredChain, unit: str = "bits", cap: int = DEFAULT_CELL_CAP
) -> float:
    """Oracle: ``-sum joint_P log joint_Q`` by full joint-state enumeration."""
    p = joint_source_table(c, cap).values
    q = joint_model_table(c, cap).values
    mask = p > 0.0
    if np.any(q[mask] == 0.0):
        raise SupportMismatch("joint model is 0 on a joint state with source mass")
    return from_nats(float(-np.sum(p[mask] * np.log(q[mask]))), unit)


def skip_layer_objective(c: LayeredChain, unit: str = "bits") -> float:
    """3-layer objective with only layers 0 and 2 in the accounting.

    Uses the composed transitions ``P^{2|0} = P^{2|1} P^{1|0}`` and
    ``Q^{0|2} = Q^{0|1} Q^{1|2}`` plus the top-layer code length.
    """
    if c.depth != 2:
        raise DimensionMismatch("skip-layer objective requires exactly 3 layers")
    p20 = c.source_forward[1].matrix @ c.source_forward[0].matrix
    q02 = c.model_backward[0].matrix @ c.model_backward[1].matrix
    weights = c.source_prior.probs[np.newaxis, :] * p20  # over (i_2, i_0)
    logs = q02.T
    mask = weights > 0.0
    if np.any(logs[mask] == 0.0):
        raise SupportMismatch("composed model conditional is 0 with source mass")
    total = float(-np.sum(weights[mask] * np.log(logs[mask])))
    p2 = push_forward(c.source_forward[1], push_forward(c.source_forward[0], c.source_prior))
    total += code_length(p2, c.model_top, unit="nats")
    return from_nats(total, unit)


def input_code_length(c: LayeredChain, unit: str = "bits") -> float:
    """Code length of the input layer alone against the model's marginal.

    Never exceeds the joint objective: the chain transformation can only add
    bits relative to modelling the input directly.
    """
    return code_length(c.source_prior, model_input_marginal(c), unit=unit)


def with_perfect_model(
    source_prior: ProbVector,
    source_forward: tuple[TransitionMatrix, ...] | list[TransitionMatrix],
    model_top: ProbVector | None = None,
) -> LayeredChain:
    """Chain whose model is the exact Bayes reversal of the source.

    With ``model_top`` omitted it defaults to the source's top marginal, in
    which case the joint objective collapses to the joint source entropy.
    """
    source_forward = tuple(source_forward)
    marginals = [source_prior]
    backward = []
    for t in source_forward:
        r, m = bayes_reverse(t, marginals[-1])
        backward.append(r)
        marginals.append(m)
    sizes = tuple([source_prior.m] + [t.m_to for t in source_forward])
    top = marginals[-1] if model_top is None else model_top
    return LayeredChain(sizes, source_prior, source_forward, tuple(backward), top)


def joint_source_entropy(c: LayeredChain, unit: str = "bits") -> float:
    """Entropy of the joint source via the chain rule (no joint table)."""
    marginals = all_source_marginals(c)
    total = entropy(c.source_prior, unit="nats")
    for l in range(c.depth):
        total += conditional_entropy(c.source_forward[l], marginals[l], unit="nats")
    return from_nats(total, unit)


def is_perfect_model(c: LayeredChain, tol: float = 1e-9) -> bool:
    """True when the model equals the Bayes reversal of the source within tol."""
    marginals = all_source_marginals(c)
    for l in range(c.depth):
        r, _ = bayes_reverse(c.source_forward[l], marginals[l])
        if float(np.max(np.abs(r.matrix - c.model_backward[l].matrix))) > tol:
            return False
    return float(np.max(np.abs(marginals[-1].probs - c.model_top.probs))) <= tol
