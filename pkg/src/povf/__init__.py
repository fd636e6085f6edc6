"""PoVF consensus primitives and a deterministic network simulator."""

__version__ = "0.1.0"

from povf.chain import (
    Block,
    BlockHeader,
    Epoch,
    GenesisParams,
    RegularParams,
    Transaction,
    build_genesis,
    merkle_root,
    propose_block,
    validate_block,
)
from povf.clocksync import ClockState, apply_sync_round, ntp_offset
from povf.delay_buffer import DelayBuffer, InsertStatus
from povf.heartbeat import Registry, RegistryEntry, registration_seed
from povf.selection import SelectionParams, consensus_probability, is_selected
from povf.vdf import BACKEND, VdfOutput, VdfParams, vdf_eval, vdf_setup, vdf_verify
from povf.verdict import Verdict
from povf.vrf import VrfKeyPair, VrfOutput, vrf_eval, vrf_keygen, vrf_verify

__all__ = [
    "BACKEND", "Block", "BlockHeader", "ClockState", "DelayBuffer", "Epoch", "GenesisParams",
    "InsertStatus", "Registry", "RegistryEntry", "RegularParams", "SelectionParams",
    "Transaction", "VdfOutput", "VdfParams", "Verdict", "VrfKeyPair", "VrfOutput",
    "apply_sync_round", "build_genesis", "consensus_probability", "is_selected",
    "merkle_root", "ntp_offset", "propose_block", "registration_seed", "validate_block",
    "vdf_eval", "vdf_setup", "vdf_verify", "vrf_eval", "vrf_keygen", "vrf_verify",
]
