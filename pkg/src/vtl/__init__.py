"""Value-transfer ledger with individual chains and spontaneous sharding.

Public surface: core data model, signature schemes, the abstract log,
locally-executable validation, per-node state machines, and a deterministic
round-based simulator.
"""

from vtl.core import (
    Abstract,
    Block,
    IndividualChain,
    LedgerError,
    NodeId,
    Transaction,
    TxId,
    append_block,
    block_hash,
    canonical_encode,
    genesis_block,
    make_abstract,
    verify_abstract,
)
from vtl.crypto import SCHEMES, Ed25519Scheme, Keyring, Signer, StubScheme
from vtl.mainchain import Equivocation, MainChain, MainChainBlock, is_confirmed
from vtl.node import BEHAVIORS, InsufficientFundsError, Node
from vtl.oracle import OracleWorld, oracle_validate
from vtl.simnet import (
    CSV_HEADER,
    ConfigError,
    Metrics,
    ScenarioConfig,
    SimulationError,
    Simulator,
    predict_g,
)
from vtl.validation import (
    IncompleteStoreError,
    LocalStore,
    ProofBundle,
    ProofError,
    UnconfirmedError,
    VerifyResult,
    build_proof,
    validate,
    validate_in_store,
    verify_proof,
)

__version__ = "1.0.0"

__all__ = [
    "Abstract",
    "Block",
    "BEHAVIORS",
    "CSV_HEADER",
    "ConfigError",
    "Ed25519Scheme",
    "Equivocation",
    "Metrics",
    "OracleWorld",
    "ScenarioConfig",
    "SimulationError",
    "Simulator",
    "IncompleteStoreError",
    "IndividualChain",
    "InsufficientFundsError",
    "Keyring",
    "LedgerError",
    "LocalStore",
    "MainChain",
    "MainChainBlock",
    "Node",
    "NodeId",
    "ProofBundle",
    "ProofError",
    "SCHEMES",
    "Signer",
    "StubScheme",
    "Transaction",
    "TxId",
    "UnconfirmedError",
    "VerifyResult",
    "append_block",
    "block_hash",
    "build_proof",
    "canonical_encode",
    "genesis_block",
    "is_confirmed",
    "make_abstract",
    "oracle_validate",
    "predict_g",
    "validate",
    "validate_in_store",
    "verify_abstract",
    "verify_proof",
]
