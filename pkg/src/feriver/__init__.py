"""Differential co-verification of RV32I cores with frame-readback observation."""

from .arbiter import Arbiter, CheckVerdict, SessionReport, StrobeConfig, drive_session
from .backends import (
    DutBackend,
    FaultMode,
    FaultSpec,
    GoldenBackend,
    GprSnapshot,
    Mutation,
    inject_static_faults,
)
from .checkpoint import Checkpoint, parse_checkpoint, serialize_checkpoint
from .engine import active_kernel
from .harness import RunConfig, TimeModel, run_bench, run_verify
from .isa import ArchState, DecodedInstr, decode, disassemble, encode, execute
from .pcap import (
    FrameAddress,
    FrameStore,
    Geometry,
    GprLayout,
    ReadbackRequest,
    extract_gprs,
    far_decode,
    far_encode,
    far_increment,
    locate_marker,
    mirror_gprs,
    readback,
)
from .replay import ReplayWindow, reconstruct
from .workloads import MemImage, builtin_workloads, load_bin, load_mem

__version__ = "0.1.0"

__all__ = [
    "ArchState", "Arbiter", "Checkpoint", "CheckVerdict", "DecodedInstr",
    "DutBackend", "FaultMode", "FaultSpec", "FrameAddress", "FrameStore",
    "Geometry", "GoldenBackend", "GprLayout", "GprSnapshot", "MemImage",
    "Mutation", "ReadbackRequest", "ReplayWindow", "RunConfig", "SessionReport",
    "StrobeConfig", "TimeModel", "active_kernel", "builtin_workloads", "decode",
    "disassemble", "drive_session", "encode", "execute", "extract_gprs",
    "far_decode", "far_encode", "far_increment", "inject_static_faults",
    "load_bin", "load_mem", "locate_marker", "mirror_gprs", "parse_checkpoint",
    "readback", "reconstruct", "run_bench", "run_verify", "serialize_checkpoint",
    "__version__",
]
