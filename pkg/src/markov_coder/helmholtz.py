"""Two-layer comparison between joint-density and input-density objectives.

The quantity computed here drops the cost of specifying the hidden layer
from the joint objective:

    d_hm = L(P, Q) - sum_x P0(x) H(rec(.|x))

It is sandwiched between the input-only code length and the full joint code
length, with both gaps available in closed form: the upper gap is the
average encoder entropy and the lower gap is the average divergence of the
encoder from the model's exact posterior.  The decomposition into the shared
sparse-encoder term plus an encoder-vs-top-prior divergence separates the
pressure toward sparse codes from the pressure toward distributed codes.
Only the two-layer form is treated; multilayer variants are out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, SupportMismatch
from .chain import LayeredChain, input_code_length, objective_reversed
from .prob import (
    ProbVector,
    TransitionMatrix,
    bayes_reverse,
    conditional_entropy,
    from_nats,
    push_forward,
)


@dataclass(frozen=True)
class TwoLayerInstance:
    """Source prior and encoder plus generative conditional and top prior."""

    p0: ProbVector
    rec: TransitionMatrix  # P(layer1 | layer0)
    gen: TransitionMatrix  # Q(layer0 | layer1)
    gen_prior: ProbVector  # Q over layer 1

    def __post_init__(self) -> None:
        if self.rec.m_from != self.p0.m:
            raise DimensionMismatch("encoder input size does not match the prior")
        if self.gen.m_to != self.p0.m or self.gen.m_from != self.rec.m_to:
            raise DimensionMismatch("generative conditional has the wrong shape")
        if self.gen_prior.m != self.rec.m_to:
            raise DimensionMismatch("generative prior does not match layer 1")

    def as_chain(self) -> LayeredChain:
        return LayeredChain(
            (self.p0.m, self.rec.m_to),
            self.p0,
            (self.rec,),
            (self.gen,),
            self.gen_prior,
        )

    def model_input_marginal(self) -> ProbVector:
        return push_forward(self.gen, self.gen_prior)


def _avg_log(inst: TwoLayerInstance, values: np.ndarray) -> float:
    """``sum_{x,y} P0(x) rec(y|x) log values[y, x]`` over the encoder support.

    ``values`` must be strictly positive wherever the encoder joint carries
    mass; a zero there is a support violation.
    """
    weights = inst.p0.probs[np.newaxis, :] * inst.rec.matrix
    mask = weights > 0.0
    if np.any(values[mask] <= 0.0):
        raise SupportMismatch("model probability is 0 on an encoder transition with mass")
    return float(np.sum(weights[mask] * np.log(values[mask])))


def d_hm(inst: TwoLayerInstance, unit: str = "bits") -> float:
    """The hidden-state-free objective.

    Computed directly as ``-E log(Q0(x) Q(y|x)) + E log rec(y|x)`` where
    ``Q(y|x)`` is the Bayes reversal of the generative pair and the
    expectation runs over the source joint.
    """
    reversed_gen, q0 = bayes_reverse(inst.gen, inst.gen_prior)
    model_joint = q0.probs[np.newaxis, :] * reversed_gen.matrix  # over (y, x)
    return from_nats(_avg_log(inst, inst.rec.matrix) - _avg_log(inst, model_joint), unit)


def hm_decomposition(inst: TwoLayerInstance, unit: str = "bits") -> tuple[float, float]:
    """Split into the sparse-encoder term and the distributed-pressure term.

    The first is the shared ``-E log gen(x|y)`` term of the joint objective;
    the second is the average divergence of encoder columns from the top
    prior and is non-negative.  They sum to :func:`d_hm`.
    """
    sparse = -_avg_log(inst, inst.gen.matrix.T)
    q1 = np.broadcast_to(inst.gen_prior.probs[:, np.newaxis], inst.rec.matrix.shape)
    distributed = _avg_log(inst, inst.rec.matrix) - _avg_log(inst, q1)
    return from_nats(sparse, unit), from_nats(distributed, unit)


@dataclass(frozen=True)
class SandwichReport:
    """Input code length, hidden-free objective, joint objective and gaps."""

    input_code_length: float
    d_hm: float
    joint_objective: float
    lower_gap: float  # d_hm - input code length
    upper_gap: float  # joint objective - d_hm
    unit: str

    def to_dict(self) -> dict:
        return {
            "input_code_length": self.input_code_length,
            "d_hm": self.d_hm,
            "joint_objective": self.joint_objective,
            "lower_gap": self.lower_gap,
            "upper_gap": self.upper_gap,
            "unit": self.unit,
        }


def sandwich_report(inst: TwoLayerInstance, unit: str = "bits") -> SandwichReport:
    """Evaluate the full inequality chain for one instance."""
    chain = inst.as_chain()
    low = input_code_length(chain, unit=unit)
    mid = d_hm(inst, unit=unit)
    high = objective_reversed(chain, unit=unit)
    return SandwichReport(low, mid, high, mid - low, high - mid, unit)


def encoder_entropy_gap(inst: TwoLayerInstance, unit: str = "bits") -> float:
    """The exact upper gap: average entropy of the encoder columns."""
    return conditional_entropy(inst.rec, inst.p0, unit=unit)


def posterior_divergence_gap(inst: TwoLayerInstance, unit: str = "bits") -> float:
    """The exact lower gap: average divergence of the encoder from the model posterior."""
    reversed_gen, _ = bayes_reverse(inst.gen, inst.gen_prior)
    return from_nats(
        _avg_log(inst, inst.rec.matrix) - _avg_log(inst, reversed_gen.matrix), unit
    )
