"""Energy-aware route selection for sensor networks, compiled to QUBO."""

from .network import (
    DEFAULT_ENERGY,
    Edge,
    EnergyParams,
    InfeasibleInstanceError,
    InstanceError,
    NetworkInstance,
    Node,
    Route,
    RouteTable,
    TrafficStream,
    build_edge_index,
    collect_paths,
    edge_energy_per_bit,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    make_instance,
    rx_energy,
    save_instance,
    tx_energy,
)
from .qubo import (
    FixReport,
    PathVar,
    Penalties,
    QuboProblem,
    SlackVar,
    WallVar,
    build_qubo,
    check_capacity,
    default_penalties,
    fix_variables,
    load_qubo,
    objective_energy,
    qubo_energy,
    qubo_from_dict,
    qubo_from_triples,
    qubo_to_dict,
    qubo_to_triples,
    route_costs,
    save_qubo,
)
from .domainwall import (EncodingMap, build_encoding_map, decode, dw_penalty,
                         substitute, wall_penalty_weight)
from .samplers import (
    DecodeContext,
    EmbeddingModel,
    RemoteSampler,
    SamplerConfig,
    Sample,
    SolveOutcome,
    brute_force_route,
    classify_sample,
    embedding_feasible,
    loopback_handle,
    solve_anneal,
    solve_exact,
)
from .experiments import (
    ExperimentRecord,
    SweepConfig,
    aggregate,
    gen_erdos_renyi,
    gen_exhaustive,
    records_from_csv,
    records_to_csv,
    run_pipeline,
    sweep,
)

__version__ = "0.1.0"
