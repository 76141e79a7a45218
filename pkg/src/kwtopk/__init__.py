"""Continual top-k keyword search over an embedded relational store."""

from .cngen import CandidateNetwork, cluster_cns, compute_tuple_sets, generate_cns, kmeans_1d
from .engine import Engine, MaintenancePolicy, OpMetrics, Result, UpdateOp, validate_jtt
from .jtt import JTT
from .lattice import Lattice, LatticeNode
from .oracle import brute_force_topk, enumerate_jtts
from .score import KeywordQuery, ScoreEnvelope, tscore, tscore_upper
from .store import SchemaGraph, Store, Tuple, load_schema, parse_schema, tokenize

__all__ = [
    "CandidateNetwork",
    "Engine",
    "JTT",
    "KeywordQuery",
    "Lattice",
    "LatticeNode",
    "MaintenancePolicy",
    "OpMetrics",
    "Result",
    "SchemaGraph",
    "ScoreEnvelope",
    "Store",
    "Tuple",
    "UpdateOp",
    "brute_force_topk",
    "cluster_cns",
    "compute_tuple_sets",
    "enumerate_jtts",
    "generate_cns",
    "kmeans_1d",
    "load_schema",
    "parse_schema",
    "tokenize",
    "tscore",
    "tscore_upper",
    "validate_jtt",
]

__version__ = "0.1.0"
