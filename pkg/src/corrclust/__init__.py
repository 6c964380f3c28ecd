"""Correlation clustering on complete signed graphs: pivot algorithms, LP rounding, bounds."""
from .algorithms import (BbcParams, RoundingFunctions, bbc_cautious, cgw_round, clean_up, cmsy_round,
                         eval_f_minus, eval_f_plus, exact_opt, is_delta_clean, is_delta_good, kwik_cluster)
from .instances import (Clustering, CostBreakdown, SignedCompleteGraph, disagreement_cost,
                        enumerate_bad_triangles, gen_gap_star, gen_planted, gen_single_negative_edge,
                        new_graph, read_graph, write_graph)
from .lp import FractionalMetric, LpSolution, metric_from_clustering, objective_value, solve_relaxation, verify_metric

__version__ = "0.1.0"
