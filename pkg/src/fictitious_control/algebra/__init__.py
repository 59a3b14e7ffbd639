"""Algebraic solvability: counting, prolongation, matching, DM, right inverse."""
from .counting import (ProlongationCounts, compute_h, count_derivatives, find_min_prolongation,
                       multi_indices, multi_indices_upto, prolongation_counts)
from .dm import DMDecomposition, dulmage_mendelsohn
from .matching import hopcroft_karp, maximum_matching, structural_rank
from .operator import DifferentialOperator, apply_operator_polynomial, differentiate
from .pattern import Equation, SparsePattern, Unknown, build_prolonged_matrix, prolonged_columns
from .solvability import (RCOND_MIN, SolvabilityReport, SquareCandidate, build_C,
                          check_rank_condition, check_square_candidate, extract_inverse_operator,
                          find_square_candidate_p, pipeline_order, rcond, square_candidate,
                          state_operator, verify_right_inverse)

__all__ = [
    "ProlongationCounts", "compute_h", "count_derivatives", "find_min_prolongation",
    "multi_indices", "multi_indices_upto", "prolongation_counts",
    "DMDecomposition", "dulmage_mendelsohn",
    "hopcroft_karp", "maximum_matching", "structural_rank",
    "DifferentialOperator", "apply_operator_polynomial", "differentiate",
    "Equation", "SparsePattern", "Unknown", "build_prolonged_matrix", "prolonged_columns",
    "RCOND_MIN", "SolvabilityReport", "SquareCandidate", "build_C", "check_rank_condition",
    "check_square_candidate", "extract_inverse_operator", "find_square_candidate_p",
    "pipeline_order", "rcond", "square_candidate", "state_operator", "verify_right_inverse",
]
