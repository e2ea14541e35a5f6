"""Structured mismatch records and their canonical JSON form.

A checkpoint captures one failed strobe comparison: its id and strobe
index, the golden pc and mnemonic of the last retired instruction, the two
31-register sets (one extracted from the frame readback, one from the ISS),
the names of the differing registers, and the raw DUT pc as an auxiliary
field. Serialization is canonical and byte-stable: fixed key order,
lowercase 0x-prefixed 8-digit hex words, registers keyed x1..x31 ascending.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .errors import SchemaViolation

_KEYS = ("checkpoint_id", "strobe_index", "pc", "mnemonic",
         "gpr_bitstream", "gpr_iss", "mismatched", "dut_pc_raw")
_REG_NAMES = tuple(f"x{i}" for i in range(1, 32))
_HEX_RE = re.compile(r"^0x[0-9a-f]{8}$")


def mismatched_names(gpr_bitstream, gpr_iss) -> list:
    return [name for name, a, b in zip(_REG_NAMES, gpr_bitstream, gpr_iss) if a != b]


@dataclass(frozen=True)
class Checkpoint:
    checkpoint_id: int
    strobe_index: int
    pc: int
    mnemonic: str
    gpr_bitstream: tuple   # x1..x31 from frame readback
    gpr_iss: tuple         # x1..x31 from the golden model
    mismatched: tuple      # ("x7", ...) ascending
    dut_pc_raw: int

    def __post_init__(self):
        if self.checkpoint_id < 0 or self.strobe_index < 0:
            raise SchemaViolation("checkpoint and strobe indices must be >= 0")
        if len(self.gpr_bitstream) != 31 or len(self.gpr_iss) != 31:
            raise SchemaViolation("register sets must carry x1..x31")
        expect = tuple(mismatched_names(self.gpr_bitstream, self.gpr_iss))
        if tuple(self.mismatched) != expect:
            raise SchemaViolation(
                f"mismatched list {list(self.mismatched)} inconsistent with "
                f"register sets (expected {list(expect)})")
        if not self.mismatched:
            raise SchemaViolation("a checkpoint needs at least one differing register")

    @classmethod
    def build(cls, checkpoint_id, strobe_index, pc, mnemonic,
              gpr_bitstream, gpr_iss, dut_pc_raw) -> "Checkpoint":
        return cls(checkpoint_id=checkpoint_id, strobe_index=strobe_index,
                   pc=pc, mnemonic=mnemonic,
                   gpr_bitstream=tuple(gpr_bitstream), gpr_iss=tuple(gpr_iss),
                   mismatched=tuple(mismatched_names(gpr_bitstream, gpr_iss)),
                   dut_pc_raw=dut_pc_raw)


def _hex8(v: int) -> str:
    return f"0x{v & 0xFFFFFFFF:08x}"


def serialize_checkpoint(cp: Checkpoint) -> str:
    doc = {
        "checkpoint_id": cp.checkpoint_id,
        "strobe_index": cp.strobe_index,
        "pc": _hex8(cp.pc),
        "mnemonic": cp.mnemonic,
        "gpr_bitstream": {n: _hex8(v) for n, v in zip(_REG_NAMES, cp.gpr_bitstream)},
        "gpr_iss": {n: _hex8(v) for n, v in zip(_REG_NAMES, cp.gpr_iss)},
        "mismatched": list(cp.mismatched),
        "dut_pc_raw": _hex8(cp.dut_pc_raw),
    }
    return json.dumps(doc, indent=2) + "\n"


def _parse_hex(value, where: str) -> int:
    if not isinstance(value, str) or not _HEX_RE.match(value):
        raise SchemaViolation(f"{where}: not an 8-digit lowercase hex word: {value!r}")
    return int(value, 16)


def _parse_regs(obj, where: str) -> tuple:
    if not isinstance(obj, dict) or tuple(obj) != _REG_NAMES:
        raise SchemaViolation(f"{where}: register object must hold exactly x1..x31 ascending")
    return tuple(_parse_hex(obj[n], f"{where}.{n}") for n in _REG_NAMES)


def parse_checkpoint(text: str) -> Checkpoint:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"not JSON: {exc}") from None
    if not isinstance(doc, dict) or set(doc) != set(_KEYS):
        missing = set(_KEYS) - set(doc if isinstance(doc, dict) else ())
        extra = set(doc) - set(_KEYS) if isinstance(doc, dict) else set()
        raise SchemaViolation(f"bad key set (missing {sorted(missing)}, extra {sorted(extra)})")
    for key in ("checkpoint_id", "strobe_index"):
        if not isinstance(doc[key], int) or isinstance(doc[key], bool):
            raise SchemaViolation(f"{key} must be an integer")
    if not isinstance(doc["mnemonic"], str):
        raise SchemaViolation("mnemonic must be a string")
    if not isinstance(doc["mismatched"], list):
        raise SchemaViolation("mismatched must be a list")
    return Checkpoint(
        checkpoint_id=doc["checkpoint_id"],
        strobe_index=doc["strobe_index"],
        pc=_parse_hex(doc["pc"], "pc"),
        mnemonic=doc["mnemonic"],
        gpr_bitstream=_parse_regs(doc["gpr_bitstream"], "gpr_bitstream"),
        gpr_iss=_parse_regs(doc["gpr_iss"], "gpr_iss"),
        mismatched=tuple(doc["mismatched"]),
        dut_pc_raw=_parse_hex(doc["dut_pc_raw"], "dut_pc_raw"),
    )
