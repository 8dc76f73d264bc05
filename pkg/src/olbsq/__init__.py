"""Oblivious location-based service queries.

A provider encrypts an m x n grid of services under pairing-based masks; a
user retrieves an l x k rectangle without revealing where it starts, and both
sides prove honest behaviour with Fiat-Shamir proofs.
"""

from olbsq.catalog import EncryptedCatalog, PublicParams, SecretKey, ServiceCell, setup
from olbsq.errors import (
    AbortReason,
    DecodeError,
    IntegrityError,
    OLBSQError,
    ProtocolAbort,
)
from olbsq.transfer import (
    KeyBundle,
    ProviderSession,
    RecoveredServices,
    UserSession,
    derive_keys,
    ideal_functionality,
    recover_services,
    run_protocol,
)
from olbsq.zkp import build_query, prove_sp1, prove_sp2, verify_query, verify_sp1, verify_sp2

__version__ = "0.1.0"

__all__ = [
    "AbortReason",
    "DecodeError",
    "EncryptedCatalog",
    "IntegrityError",
    "KeyBundle",
    "OLBSQError",
    "ProtocolAbort",
    "ProviderSession",
    "PublicParams",
    "RecoveredServices",
    "SecretKey",
    "ServiceCell",
    "UserSession",
    "build_query",
    "derive_keys",
    "ideal_functionality",
    "prove_sp1",
    "prove_sp2",
    "recover_services",
    "run_protocol",
    "setup",
    "verify_query",
    "verify_sp1",
    "verify_sp2",
]
