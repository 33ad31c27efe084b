"""Distributed quantum Merlin-Arthur certification of equality between distant inputs."""

from .fingerprint import HashFamily, fingerprint_of, make_family
from .linalg import BinaryPOVM, DensityMatrix, DimensionCapError, PureState, RegisterLayout
from .path import (AcceptanceReport, GlobalState, Honest, PathInstance, ProductStates,
                   RotationAttack, exact_acceptance, repeat_protocol, sampled_acceptance)
from .protocols import OneWayProtocol, eq_protocol, noisy_protocol, toy_eq_protocol
from .tree import Network, build_cert_tree, label_tree, verify_labels
from .tree_protocol import PathRotation, TreeInstance, run_tree_protocol

__version__ = "0.1.0"

__all__ = [
    "HashFamily", "fingerprint_of", "make_family", "BinaryPOVM", "DensityMatrix",
    "DimensionCapError", "PureState", "RegisterLayout", "AcceptanceReport", "GlobalState",
    "Honest", "PathInstance", "ProductStates", "RotationAttack", "exact_acceptance",
    "repeat_protocol", "sampled_acceptance", "OneWayProtocol", "eq_protocol", "noisy_protocol",
    "toy_eq_protocol", "Network", "build_cert_tree", "label_tree", "verify_labels",
    "PathRotation", "TreeInstance", "run_tree_protocol",
]
