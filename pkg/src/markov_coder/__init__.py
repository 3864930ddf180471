"""Minimum-code-length modelling of layered Markov sources.

Discrete information primitives, the layered source/model objective in all
of its decompositions, soft vector quantisers and VQ-ladders, topographic
maps via probability leakage, tree-structured cluster objectives,
partitioned-mixture factorial encoders and the hidden-state-free comparison
objective, with every identity enforced against brute-force oracles.
"""

from .errors import (
    CapExceeded,
    CoderError,
    DeadCode,
    DeadModel,
    DimensionMismatch,
    InvalidDistribution,
    NotDeterministic,
    SchemaError,
    SupportMismatch,
    ZeroEvidence,
    ZeroMarginal,
)
from .prob import (
    ProbVector,
    TransitionMatrix,
    bayes_reverse,
    code_length,
    conditional_entropy,
    entropy,
    push_forward,
    relative_entropy,
)
from .chain import (
    JointTable,
    LayeredChain,
    input_code_length,
    joint_source_entropy,
    objective_bruteforce,
    objective_forward,
    objective_reversed,
    skip_layer_objective,
    source_marginals,
    with_perfect_model,
)
from .softvq import (
    EmpiricalInput,
    GaussianCodebook,
    SigmaSchedule,
    SoftEncoder,
    TraceRow,
    dvq,
    dvq_pairwise,
    optimal_encoder_row,
    optimal_reconstruction,
    train_soft_vq,
    two_layer_objective,
)
from .ladder import (
    LadderStage,
    LeakageMatrix,
    VqLadder,
    compose_leakage,
    ladder_objective,
    leakage_from_spec,
    leaked_dvq,
    skip_identity_check,
    train_ladder,
    train_topo_map,
)
from .ace import (
    HierarchicalVq,
    HvqCluster,
    TreeSource,
    TreeTopology,
    ace_flat_identity,
    ace_tree_objective,
    cluster_entropy_decomposition,
    cluster_mutual_information,
    hierarchical_vq_objective,
)
from .pmd import (
    FactorialEncoderBank,
    PmdConfig,
    bayes_posterior,
    exact_product_dvq,
    factorial_dvq_bound,
    pmd_posterior,
    repeated_model_bound,
    train_pmd_stage,
)
from .helmholtz import TwoLayerInstance, d_hm, hm_decomposition, sandwich_report

__version__ = "0.1.0"
