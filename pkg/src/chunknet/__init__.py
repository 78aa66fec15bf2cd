"""Random linear network coding over line networks with dense, chunked and
overlapped chunked codes."""

from .bounds import (
    BoundResult,
    cc_bound,
    condition_diagnostics,
    conjecture_rank_failure_prob,
    dense_bound,
    erasure_bounds,
    flow_after_loss,
    occ_bound,
    occ_small_overlap_bound,
)
from .coding import CodeSpec, Kind, NodeState, Packet, TerminalReport, chunk_support, emit, make_code_spec, simulate
from .decoding import DecodeOutcome, decode_chunked, decode_global
from .experiment import (
    ExperimentConfig,
    PointEstimate,
    StopRule,
    SweepTable,
    aperture_rank_experiment,
    overhead,
    run_point,
    run_sweep,
)
from .gf2 import BinaryMatrix, BinaryVector, rank, random_bernoulli, solve, xor_combine
from .rng import Stream, derive_seed
from .schedule import Schedule, Transmission, capacity, capacity_maxflow_oracle, generate_schedule

__version__ = "0.1.0"
