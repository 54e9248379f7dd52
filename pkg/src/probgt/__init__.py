"""Probabilistic group testing for distributed matrix-vector products with attacked workers."""

from .field import DEFAULT_PRIME, FieldElement, FieldMismatchError, PrimeField, matmul_mod
from .gt_core import (
    AttackSchedule,
    ContactMatrix,
    ExperimentParams,
    SamplingMatrix,
    ScoreTable,
    derive_sampling_matrix,
    evaluate_tests,
    generate_contact_matrix,
    sample_attacks,
    score_slots,
    score_worker_slot,
    select_parameters,
    threshold_decode,
)
from .analysis import check_h_bounds, expected_scores, h, threshold_d
from .coding import (
    EncodedShares,
    GeneratorMatrix,
    ParityMatrix,
    build_code,
    build_generator,
    build_parity_matrix,
    encode,
)
from .sim import (
    ContractViolation,
    DecodeFailure,
    decode_product,
    find_reconstruction_row,
    gamma,
    identify,
    reconstruct,
    run_pipeline_trial,
    worker_round,
)
from .records import TrialRecord

__version__ = "0.1.0"
