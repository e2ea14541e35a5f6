"""RV32I base-ISA semantics: decode, encode, single-step execute, disassemble.

Values of the ``Word32`` domain are plain Python ints kept in [0, 2^32);
signed interpretation is two's complement. Arithmetic wraps modulo 2^32.

The module covers the base integer set only: no CSRs, no privileged modes,
FENCE retires as a no-op, ECALL/EBREAK halt cleanly. Misaligned accesses,
misaligned jump targets, accesses outside the loaded image and illegal
instructions raise fatal diagnostics (`errors.SimDiagnostic`).
"""

from __future__ import annotations

import struct
from array import array
from dataclasses import dataclass, field

from .errors import IllegalInstruction, ImmediateOutOfRange, InvalidField

Word32 = int

MASK32 = 0xFFFFFFFF


def u32(v: int) -> int:
    return v & MASK32


def s32(v: int) -> int:
    v &= MASK32
    return v - 0x1_0000_0000 if v & 0x8000_0000 else v


def sign_extend(value: int, bits: int) -> int:
    value &= (1 << bits) - 1
    if value & (1 << (bits - 1)):
        value -= 1 << bits
    return value


# ---------------------------------------------------------------------------
# decode / encode tables

# kind -> (format, opcode, funct3, funct7)
_FORMATS = {
    "lui":   ("U", 0b0110111, None, None),
    "auipc": ("U", 0b0010111, None, None),
    "jal":   ("J", 0b1101111, None, None),
    "jalr":  ("I", 0b1100111, 0b000, None),
    "beq":   ("B", 0b1100011, 0b000, None),
    "bne":   ("B", 0b1100011, 0b001, None),
    "blt":   ("B", 0b1100011, 0b100, None),
    "bge":   ("B", 0b1100011, 0b101, None),
    "bltu":  ("B", 0b1100011, 0b110, None),
    "bgeu":  ("B", 0b1100011, 0b111, None),
    "lb":    ("I", 0b0000011, 0b000, None),
    "lh":    ("I", 0b0000011, 0b001, None),
    "lw":    ("I", 0b0000011, 0b010, None),
    "lbu":   ("I", 0b0000011, 0b100, None),
    "lhu":   ("I", 0b0000011, 0b101, None),
    "sb":    ("S", 0b0100011, 0b000, None),
    "sh":    ("S", 0b0100011, 0b001, None),
    "sw":    ("S", 0b0100011, 0b010, None),
    "addi":  ("I", 0b0010011, 0b000, None),
    "slti":  ("I", 0b0010011, 0b010, None),
    "sltiu": ("I", 0b0010011, 0b011, None),
    "xori":  ("I", 0b0010011, 0b100, None),
    "ori":   ("I", 0b0010011, 0b110, None),
    "andi":  ("I", 0b0010011, 0b111, None),
    "slli":  ("SH", 0b0010011, 0b001, 0b0000000),
    "srli":  ("SH", 0b0010011, 0b101, 0b0000000),
    "srai":  ("SH", 0b0010011, 0b101, 0b0100000),
    "add":   ("R", 0b0110011, 0b000, 0b0000000),
    "sub":   ("R", 0b0110011, 0b000, 0b0100000),
    "sll":   ("R", 0b0110011, 0b001, 0b0000000),
    "slt":   ("R", 0b0110011, 0b010, 0b0000000),
    "sltu":  ("R", 0b0110011, 0b011, 0b0000000),
    "xor":   ("R", 0b0110011, 0b100, 0b0000000),
    "srl":   ("R", 0b0110011, 0b101, 0b0000000),
    "sra":   ("R", 0b0110011, 0b101, 0b0100000),
    "or":    ("R", 0b0110011, 0b110, 0b0000000),
    "and":   ("R", 0b0110011, 0b111, 0b0000000),
    "fence": ("F", 0b0001111, 0b000, None),
    "ecall": ("SYS", 0b1110011, 0b000, None),
    "ebreak": ("SYS", 0b1110011, 0b000, None),
}

KINDS = tuple(_FORMATS)

# (opcode, funct3) -> kind, for formats where funct3 is decisive
_BY_OP_F3 = {}
for _k, (_fmt, _op, _f3, _f7) in _FORMATS.items():
    if _fmt in ("I", "B", "S", "F"):
        _BY_OP_F3[(_op, _f3)] = _k

# (opcode, funct3, funct7) -> kind for R and shift-immediate forms
_BY_OP_F3_F7 = {}
for _k, (_fmt, _op, _f3, _f7) in _FORMATS.items():
    if _fmt in ("R", "SH"):
        _BY_OP_F3_F7[(_op, _f3, _f7)] = _k


@dataclass(frozen=True)
class DecodedInstr:
    """One decoded instruction.

    ``imm`` carries the fully assembled, sign-extended immediate: branch and
    jump offsets are byte offsets (already shifted), LUI/AUIPC immediates are
    already moved to bits [31:12], shift-immediates hold the plain shamt.
    Fields unused by the instruction's format are zero. ``raw`` is excluded
    from equality so decode(encode(i)) == i regardless of the origin word.
    """

    kind: str
    rd: int = 0
    rs1: int = 0
    rs2: int = 0
    imm: int = 0
    raw: Word32 = field(default=0, compare=False)


def _bits(w, hi, lo):
    return (w >> lo) & ((1 << (hi - lo + 1)) - 1)


def decode(word: Word32) -> DecodedInstr:
    """Decode one 32-bit word; raises IllegalInstruction for non-RV32I words."""
    w = u32(word)
    opcode = w & 0x7F
    rd = _bits(w, 11, 7)
    f3 = _bits(w, 14, 12)
    rs1 = _bits(w, 19, 15)
    rs2 = _bits(w, 24, 20)
    f7 = _bits(w, 31, 25)

    if opcode == 0b0110111 or opcode == 0b0010111:
        kind = "lui" if opcode == 0b0110111 else "auipc"
        return DecodedInstr(kind, rd=rd, imm=sign_extend(w & 0xFFFFF000, 32), raw=w)
    if opcode == 0b1101111:
        imm = sign_extend(
            (_bits(w, 31, 31) << 20) | (_bits(w, 19, 12) << 12)
            | (_bits(w, 20, 20) << 11) | (_bits(w, 30, 21) << 1), 21)
        return DecodedInstr("jal", rd=rd, imm=imm, raw=w)
    if opcode == 0b1110011:
        if f3 == 0 and rd == 0 and rs1 == 0:
            if _bits(w, 31, 20) == 0:
                return DecodedInstr("ecall", raw=w)
            if _bits(w, 31, 20) == 1:
                return DecodedInstr("ebreak", raw=w)
        raise IllegalInstruction(w)
    if opcode == 0b0010011 and f3 in (0b001, 0b101):
        kind = _BY_OP_F3_F7.get((opcode, f3, f7))
        if kind is None:
            raise IllegalInstruction(w)
        return DecodedInstr(kind, rd=rd, rs1=rs1, imm=rs2, raw=w)
    if opcode == 0b0110011:
        kind = _BY_OP_F3_F7.get((opcode, f3, f7))
        if kind is None:
            raise IllegalInstruction(w)
        return DecodedInstr(kind, rd=rd, rs1=rs1, rs2=rs2, raw=w)

    kind = _BY_OP_F3.get((opcode, f3))
    if kind is None:
        raise IllegalInstruction(w)
    fmt = _FORMATS[kind][0]
    if fmt == "I" or fmt == "F":
        return DecodedInstr(kind, rd=rd, rs1=rs1, imm=sign_extend(_bits(w, 31, 20), 12), raw=w)
    if fmt == "S":
        imm = sign_extend((f7 << 5) | rd, 12)
        return DecodedInstr(kind, rs1=rs1, rs2=rs2, imm=imm, raw=w)
    # B
    imm = sign_extend(
        (_bits(w, 31, 31) << 12) | (_bits(w, 7, 7) << 11)
        | (_bits(w, 30, 25) << 5) | (_bits(w, 11, 8) << 1), 13)
    return DecodedInstr(kind, rs1=rs1, rs2=rs2, imm=imm, raw=w)


def _check_reg(name, v):
    if not 0 <= v <= 31:
        raise InvalidField(f"{name}={v} outside x0..x31")


def encode(instr: DecodedInstr) -> Word32:
    """Exact inverse of decode on the valid-instruction domain."""
    if instr.kind not in _FORMATS:
        raise InvalidField(f"unknown instruction kind {instr.kind!r}")
    fmt, opcode, f3, f7 = _FORMATS[instr.kind]
    _check_reg("rd", instr.rd)
    _check_reg("rs1", instr.rs1)
    _check_reg("rs2", instr.rs2)
    imm = instr.imm

    if fmt == "R":
        return u32((f7 << 25) | (instr.rs2 << 20) | (instr.rs1 << 15)
                   | (f3 << 12) | (instr.rd << 7) | opcode)
    if fmt == "SH":
        if not 0 <= imm <= 31:
            raise ImmediateOutOfRange(f"shift amount {imm} outside 0..31")
        return u32((f7 << 25) | (imm << 20) | (instr.rs1 << 15)
                   | (f3 << 12) | (instr.rd << 7) | opcode)
    if fmt == "I" or fmt == "F":
        if not -2048 <= imm <= 2047:
            raise ImmediateOutOfRange(f"I-immediate {imm} outside 12 bits")
        return u32(((imm & 0xFFF) << 20) | (instr.rs1 << 15)
                   | (f3 << 12) | (instr.rd << 7) | opcode)
    if fmt == "S":
        if not -2048 <= imm <= 2047:
            raise ImmediateOutOfRange(f"S-immediate {imm} outside 12 bits")
        imm &= 0xFFF
        return u32(((imm >> 5) << 25) | (instr.rs2 << 20) | (instr.rs1 << 15)
                   | (f3 << 12) | ((imm & 0x1F) << 7) | opcode)
    if fmt == "B":
        if not -4096 <= imm <= 4094:
            raise ImmediateOutOfRange(f"B-immediate {imm} outside 13 bits")
        if imm & 1:
            raise InvalidField("branch offset must be even")
        imm &= 0x1FFF
        return u32((((imm >> 12) & 1) << 31) | (((imm >> 5) & 0x3F) << 25)
                   | (instr.rs2 << 20) | (instr.rs1 << 15) | (f3 << 12)
                   | (((imm >> 1) & 0xF) << 8) | (((imm >> 11) & 1) << 7) | opcode)
    if fmt == "U":
        if imm & 0xFFF:
            raise InvalidField("U-immediate has nonzero low 12 bits")
        if not -0x8000_0000 <= imm <= 0x7FFF_F000:
            raise ImmediateOutOfRange(f"U-immediate {imm} outside 32 bits")
        return u32((imm & 0xFFFFF000) | (instr.rd << 7) | opcode)
    if fmt == "J":
        if not -(1 << 20) <= imm <= (1 << 20) - 2:
            raise ImmediateOutOfRange(f"J-immediate {imm} outside 21 bits")
        if imm & 1:
            raise InvalidField("jump offset must be even")
        imm &= 0x1FFFFF
        return u32((((imm >> 20) & 1) << 31) | (((imm >> 1) & 0x3FF) << 21)
                   | (((imm >> 11) & 1) << 20) | (((imm >> 12) & 0xFF) << 12)
                   | (instr.rd << 7) | opcode)
    # SYS
    tail = 0 if instr.kind == "ecall" else 1
    return u32((tail << 20) | opcode)


_LOADS = {"lb", "lh", "lw", "lbu", "lhu"}
_STORES = {"sb", "sh", "sw"}
_BRANCHES = {"beq", "bne", "blt", "bge", "bltu", "bgeu"}


def disassemble(word: Word32) -> str:
    """Total function: lower-case mnemonic with plain xN register names."""
    try:
        i = decode(word)
    except IllegalInstruction:
        return f"illegal(0x{u32(word):08x})"
    k = i.kind
    if k in ("lui", "auipc"):
        return f"{k} x{i.rd}, 0x{(i.imm >> 12) & 0xFFFFF:x}"
    if k == "jal":
        return f"jal x{i.rd}, {i.imm}"
    if k == "jalr":
        return f"jalr x{i.rd}, {i.imm}(x{i.rs1})"
    if k in _BRANCHES:
        return f"{k} x{i.rs1}, x{i.rs2}, {i.imm}"
    if k in _LOADS:
        return f"{k} x{i.rd}, {i.imm}(x{i.rs1})"
    if k in _STORES:
        return f"{k} x{i.rs2}, {i.imm}(x{i.rs1})"
    if k in ("fence", "ecall", "ebreak"):
        return k
    # register-register and register-immediate ALU forms
    if k in ("slli", "srli", "srai"):
        return f"{k} x{i.rd}, x{i.rs1}, {i.imm}"
    if _FORMATS[k][0] == "R":
        return f"{k} x{i.rd}, x{i.rs1}, x{i.rs2}"
    return f"{k} x{i.rd}, x{i.rs1}, {i.imm}"


# ---------------------------------------------------------------------------
# architectural state

@dataclass
class ArchState:
    """Full architectural state of one hart.

    Registers live in an array('I') of 32 entries with x0 pinned to zero;
    memory is a flat little-endian bytearray covering [base, base+len).
    ``last_pc``/``last_raw`` describe the most recently retired instruction
    (what strobe snapshots report).
    """

    pc: Word32
    regs: array
    mem: bytearray
    base: Word32
    retired: int = 0
    halted: bool = False
    last_pc: Word32 = 0
    last_raw: Word32 = 0

    @classmethod
    def from_words(cls, words, base=0, entry=None) -> "ArchState":
        mem = bytearray(struct.pack(f"<{len(words)}I", *(u32(w) for w in words)))
        return cls(pc=u32(base if entry is None else entry),
                   regs=array("I", [0] * 32), mem=mem, base=u32(base))

    def copy(self) -> "ArchState":
        return ArchState(pc=self.pc, regs=array("I", self.regs),
                         mem=bytearray(self.mem), base=self.base,
                         retired=self.retired, halted=self.halted,
                         last_pc=self.last_pc, last_raw=self.last_raw)

    def reg_tuple(self) -> tuple:
        """x1..x31 as a 31-tuple (x0 is never observed)."""
        return tuple(self.regs[1:32])


def execute(state: ArchState, instr: DecodedInstr) -> ArchState:
    """Pure single-instruction step: returns the post-state, input untouched."""
    from . import engine  # late import: engine selects the kernel at load

    if state.halted:
        raise ValueError("execute on a halted state")
    post = state.copy()
    word = encode(instr)
    # run the word through the block kernel against a 1-word overlay at pc
    engine.step_one(post, word)
    return post
