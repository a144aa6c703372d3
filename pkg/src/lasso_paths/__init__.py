"""Shortest paths as a lasso problem.

The s-t shortest path of a weighted graph is the limit ``lam -> 0`` of
the lasso ``min 1/2 ||y - Q beta||^2 + lam ||beta||_1`` with
``Q = D W^{-1}``, ``y = e_s - e_t``. This package follows that path
exactly with LARS, approximates it with ADMM and inexact ADMM, and checks
everything against Dijkstra.
"""

__version__ = "0.1.0"

from .admm import (
    SCISSORS_CONFIG,
    AdmmConfig,
    AdmmState,
    AdmmTrace,
    admm_lasso,
    extract_path,
    inadmm_lasso,
    lambda_max,
    normal_inverse_direct,
    normal_inverse_identity,
    soft_threshold,
)
from .dijkstra import (
    DistanceMap,
    bidirectional_settle_order,
    check_assumption_a1,
    dijkstra,
    shortest_path,
)
from .errors import *  # noqa: F401,F403
from .experiments import (
    ExperimentSpec,
    GrayImage,
    PixelMap,
    disk_image,
    edge_weight_from_gradient,
    gen_random_graph,
    read_pgm,
    run_experiment,
    scissors_graph,
    write_pgm,
)
from .graph import (
    Graph,
    Path,
    PathResult,
    RootedTree,
    build_graph,
    incidence_matrix,
    indicator_vector,
    laplacian,
    load_graph,
    path_incidence_vector,
    path_length,
    tree_incidence,
    tree_incidence_pseudoinverse,
    tree_path_matrix,
    weighted_incidence,
)
from .lars import LarsTrace, beta_at, closed_form_times, kkt_residual, lars_path
from .linalg import (
    CgResult,
    LinearOperator,
    SparseMatrix,
    conjugate_gradient,
    householder_qr,
    least_squares_solve,
    spd_factorize,
    spd_solve,
    spmv,
)
