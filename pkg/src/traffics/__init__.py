"""Traffic distributions of random matrices: graphs, laws, free products and Monte Carlo checks."""

from .algebra import (
    clt_moment,
    clt_parameter,
    clt_tau0,
    diagonal_law,
    free_product,
    joint_with_transpose,
    kappa,
    mixed_star_moment,
    nc_free_oracle,
    star_moment,
    tau0_from_tau,
    tau_from_tau0,
    transpose_law,
)
from .dsl import graph_from_json, graph_to_json, parse_graph
from .ensembles import EnsembleSpec, MCReport, hadamard_compose, mc_estimate, sample
from .errors import ContractError, DomainError, GuardError, ParseError, TruncationError
from .evaluation import (
    MatrixFamily,
    check_permutation_equivariance,
    eval_monomial,
    eval_n_graph,
    injective_density,
    injective_trace,
    pairing,
    trace_test_graph,
)
from .graph import (
    CanonicalForm,
    EdgeLabel,
    GraphMonomial,
    NGraphMonomial,
    StarTestGraph,
    adjoint,
    canonicalize,
    classify,
    close,
    colored_component_tree,
    degree_op,
    delta,
    from_word,
    hadamard,
    multiply,
    quotient,
    substitute,
    transpose,
)
from .laws import (
    GraphonDensity,
    TrafficDistribution,
    compose_hadamard,
    graphon_density_iid,
    parse_law,
    sqrtN_law,
    tau0_haar,
    tau0_jlimit,
    tau0_permutation,
    tau0_semicircular,
)
from .local import RootedNetwork, check_freeprod_consistency, local_free_product, rooted_injective_count
from .partitions import (
    SetPartition,
    enumerate_noncrossing_partitions,
    enumerate_pair_partitions,
    enumerate_partitions,
    mobius_from_discrete,
    refines,
)

__version__ = "0.1.0"
