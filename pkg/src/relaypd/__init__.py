"""Relay primal-dual simulator for decentralized composite optimization.

A single token (the "baton") carrying the global primal variable and a
perturbed dual aggregate walks a communication graph; the agent holding
it performs one primal-dual update and passes it to a random neighbor.
The library simulates this scheme with an optional differentially
private perturbation of the relayed aggregate, tracks the spent budget
with a zCDP accountant, and measures convergence against an independent
reference solver.
"""
from . import cli, engine, errors, harness, metrics, objective, privacy, topology
from .engine import (
    apply_mask,
    available_backends,
    centralized_step,
    default_backend,
    init_state,
    relay_step,
    run,
    run_centralized,
)
from .errors import RelaypdError
from .harness import (
    emit_results,
    gen_synthetic,
    load_config,
    load_csv_dataset,
    load_results,
    run_experiment,
    run_sweep,
)
from .metrics import fit_linear_rate, reference_solution, s_norm_dist
from .objective import (
    ProblemInstance,
    Regularizer,
    StepsizeSet,
    least_squares_loss,
    logistic_loss,
    problem_instance,
    prox_reg,
    stepsizes_from_fraction,
    validate_stepsizes,
)
from .privacy import (
    NoiseSchedule,
    PrivacyLedger,
    calibrate_sigma,
    noise_variance,
    total_budget,
    total_zcdp,
)
from .topology import (
    activation_probabilities,
    build_graph,
    generate_topology,
    read_graph_file,
    transition_matrix,
)

__version__ = "0.1.0"
