"""Workload images: .mem/.bin loaders and the bundled benchmark fixtures.

The bundled fixtures are hand-assembled RV32I (through the package encoder)
so the repository stays toolchain-free: a selection sort and an iterative
quicksort over one fixed 64-element array, and a message-digest-style mixing
loop over a fixed 16-word block. Every fixture ends in EBREAK and leaves a
digest in x10/x11:

* sorts: x10 = fold of rol1(x10) xor a_sorted[i] over the array,
  x11 = sum of the elements mod 2^32 (order-insensitive conservation check);
* digest loop: x10 = A xor C, x11 = B xor D of the final 4-word state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import EmptyImage, MisalignedDirective, ParseError
from .isa import MASK32, DecodedInstr, encode, sign_extend


@dataclass(frozen=True)
class MemImage:
    """A loaded memory image: ``words`` cover [base, base + 4*len) densely.

    ``code_words`` counts the leading instruction words; fault injection
    draws its sites from that region only (data words are not instructions).
    Loaders default it to the whole image.
    """

    base: int
    words: tuple
    entry: int
    code_words: int = field(default=-1)

    def __post_init__(self):
        if not self.words:
            raise EmptyImage("image has no words")
        if self.base % 4:
            raise MisalignedDirective(f"image base 0x{self.base:08x} not 4-byte aligned")
        if self.entry % 4:
            raise MisalignedDirective(f"entry 0x{self.entry:08x} not 4-byte aligned")
        if not self.base <= self.entry < self.base + 4 * len(self.words):
            raise ParseError(0, f"entry 0x{self.entry:08x} outside image")
        if self.code_words == -1:
            object.__setattr__(self, "code_words", len(self.words))
        if not 0 <= self.code_words <= len(self.words):
            raise ParseError(0, f"code_words {self.code_words} outside image")


def load_mem(text: str, name: str = "<mem>") -> MemImage:
    """Parse readmemh-style text: hex words, @WORDADDR directives, // comments."""
    sparse = {}
    cursor = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("//", 1)[0]
        for tok in body.split():
            if tok.startswith("@"):
                try:
                    cursor = int(tok[1:], 16)
                except ValueError:
                    raise ParseError(lineno, f"bad address directive {tok!r}") from None
                if cursor < 0:
                    raise ParseError(lineno, f"negative address {tok!r}")
                continue
            if len(tok) > 8:
                raise ParseError(lineno, f"word {tok!r} wider than 32 bits")
            try:
                value = int(tok, 16)
            except ValueError:
                raise ParseError(lineno, f"not a hex word: {tok!r}") from None
            sparse[cursor] = value
            cursor += 1
    if not sparse:
        raise EmptyImage(f"{name}: no words")
    lo = min(sparse)
    hi = max(sparse)
    words = tuple(sparse.get(i, 0) for i in range(lo, hi + 1))
    base = 4 * lo
    return MemImage(base=base, words=words, entry=base)


def load_mem_file(path) -> MemImage:
    p = Path(path)
    return load_mem(p.read_text(), name=p.name)


def load_bin(path, base: int = 0) -> MemImage:
    """Raw little-endian 32-bit word image; base given by the caller."""
    data = Path(path).read_bytes()
    if len(data) % 4:
        raise ParseError(0, f"{path}: size {len(data)} is not a multiple of 4")
    if not data:
        raise EmptyImage(f"{path}: empty file")
    words = tuple(int.from_bytes(data[i:i + 4], "little") for i in range(0, len(data), 4))
    return MemImage(base=base, words=words, entry=base)


# ---------------------------------------------------------------------------
# miniature two-pass assembler for the fixtures

_R = {"add", "sub", "sll", "slt", "sltu", "xor", "srl", "sra", "or", "and"}
_I = {"addi", "slti", "sltiu", "xori", "ori", "andi"}
_SH = {"slli", "srli", "srai"}
_LD = {"lb", "lh", "lw", "lbu", "lhu"}
_ST = {"sb", "sh", "sw"}
_BR = {"beq", "bne", "blt", "bge", "bltu", "bgeu"}


class Program:
    """Builds a word image from instructions, labels and data words."""

    def __init__(self):
        self._items = []      # ("ins", mnem, ops) | ("li", rd, value) | ("word", v)
        self._labels = {}     # name -> word index
        self._n = 0

    def label(self, name: str):
        if name in self._labels:
            raise ValueError(f"duplicate label {name!r}")
        self._labels[name] = self._n
        return self

    def ins(self, mnem: str, *ops):
        self._items.append(("ins", mnem, ops))
        self._n += 1
        return self

    def li(self, rd: int, value):
        """Load a 32-bit constant or label address; always two words."""
        self._items.append(("li", rd, value))
        self._n += 2
        return self

    def word(self, value: int):
        self._items.append(("word", value & MASK32))
        self._n += 1
        return self

    def words(self, values):
        for v in values:
            self.word(v)
        return self

    def here(self) -> int:
        return self._n

    def _value(self, v, base):
        if isinstance(v, str):
            return base + 4 * self._labels[v]
        return v

    def _encode_one(self, mnem, ops, idx, base):
        pc = base + 4 * idx
        if mnem in _R:
            return encode(DecodedInstr(mnem, rd=ops[0], rs1=ops[1], rs2=ops[2]))
        if mnem in _I or mnem in _SH:
            return encode(DecodedInstr(mnem, rd=ops[0], rs1=ops[1], imm=ops[2]))
        if mnem in _LD:
            return encode(DecodedInstr(mnem, rd=ops[0], rs1=ops[2], imm=ops[1]))
        if mnem in _ST:
            return encode(DecodedInstr(mnem, rs2=ops[0], rs1=ops[2], imm=ops[1]))
        if mnem in _BR:
            return encode(DecodedInstr(mnem, rs1=ops[0], rs2=ops[1],
                                       imm=self._value(ops[2], base) - pc))
        if mnem == "jal":
            return encode(DecodedInstr(mnem, rd=ops[0],
                                       imm=self._value(ops[1], base) - pc))
        if mnem == "jalr":
            return encode(DecodedInstr(mnem, rd=ops[0], rs1=ops[2], imm=ops[1]))
        if mnem in ("lui", "auipc"):
            return encode(DecodedInstr(mnem, rd=ops[0], imm=ops[1]))
        if mnem in ("fence", "ecall", "ebreak"):
            return encode(DecodedInstr(mnem))
        raise ValueError(f"unknown mnemonic {mnem!r}")

    def assemble(self, base: int = 0) -> list:
        out = []
        idx = 0
        for item in self._items:
            if item[0] == "word":
                out.append(item[1])
                idx += 1
            elif item[0] == "li":
                _, rd, value = item
                v = self._value(value, base) & MASK32
                lo = sign_extend(v & 0xFFF, 12)
                hi = (v - lo) & MASK32
                out.append(encode(DecodedInstr("lui", rd=rd, imm=sign_extend(hi, 32))))
                out.append(encode(DecodedInstr("addi", rd=rd, rs1=rd, imm=lo)))
                idx += 2
            else:
                _, mnem, ops = item
                out.append(self._encode_one(mnem, ops, idx, base))
                idx += 1
        return out


# ---------------------------------------------------------------------------
# fixtures

SORT_ELEMENTS = 64
_LCG_MUL = 1103515245
_LCG_ADD = 12345


def _lcg_words(seed: int, count: int) -> list:
    out = []
    x = seed & MASK32
    for _ in range(count):
        x = (_LCG_MUL * x + _LCG_ADD) & MASK32
        out.append(x)
    return out


def sort_input_array() -> list:
    """The fixed unsigned array both sort fixtures operate on."""
    return _lcg_words(0x13572468, SORT_ELEMENTS)


def digest_input_block() -> tuple:
    """(msg16, k16, shifts4) consumed by the mixing-loop fixture."""
    return (_lcg_words(0x0BADF00D, 16), _lcg_words(0xC0FFEE11, 16), [7, 12, 17, 22])


def _digest_epilogue(p: Program, n_label_reg_setup=True):
    """Shared sort epilogue: x10 = fold rol1^a[i], x11 = sum; then EBREAK.

    Expects x1 = &array, x2 = element count.
    """
    p.label("sum_init")
    p.ins("addi", 5, 0, 0)
    p.ins("addi", 10, 0, 0)
    p.ins("addi", 11, 0, 0)
    p.label("sum_loop")
    p.ins("bge", 5, 2, "sum_done")
    p.ins("slli", 9, 5, 2)
    p.ins("add", 9, 9, 1)
    p.ins("lw", 3, 0, 9)
    p.ins("slli", 4, 10, 1)
    p.ins("srli", 6, 10, 31)
    p.ins("or", 10, 4, 6)
    p.ins("xor", 10, 10, 3)
    p.ins("add", 11, 11, 3)
    p.ins("addi", 5, 5, 1)
    p.ins("jal", 0, "sum_loop")
    p.label("sum_done")
    p.ins("ebreak")


def _build_ssort() -> MemImage:
    p = Program()
    p.li(1, "array")
    p.ins("addi", 2, 0, SORT_ELEMENTS)
    p.ins("addi", 5, 0, 0)                  # i
    p.label("outer")
    p.ins("addi", 6, 2, -1)
    p.ins("bge", 5, 6, "sum_init")
    p.ins("add", 7, 5, 0)                   # min_idx = i
    p.ins("addi", 8, 5, 1)                  # j = i + 1
    p.label("inner")
    p.ins("bge", 8, 2, "swap")
    p.ins("slli", 9, 8, 2)
    p.ins("add", 9, 9, 1)
    p.ins("lw", 3, 0, 9)                    # a[j]
    p.ins("slli", 9, 7, 2)
    p.ins("add", 9, 9, 1)
    p.ins("lw", 4, 0, 9)                    # a[min_idx]
    p.ins("bgeu", 3, 4, "no_new_min")
    p.ins("add", 7, 8, 0)
    p.label("no_new_min")
    p.ins("addi", 8, 8, 1)
    p.ins("jal", 0, "inner")
    p.label("swap")
    p.ins("slli", 9, 7, 2)
    p.ins("add", 9, 9, 1)
    p.ins("lw", 3, 0, 9)                    # a[min_idx]
    p.ins("slli", 4, 5, 2)
    p.ins("add", 4, 4, 1)
    p.ins("lw", 6, 0, 4)                    # a[i]
    p.ins("sw", 3, 0, 4)
    p.ins("sw", 6, 0, 9)
    p.ins("addi", 5, 5, 1)
    p.ins("jal", 0, "outer")
    _digest_epilogue(p)
    code = p.here()
    p.label("array")
    p.words(sort_input_array())
    words = p.assemble(base=0)
    return MemImage(base=0, words=tuple(words), entry=0, code_words=code)


def _build_qsort() -> MemImage:
    # Two full passes: the second runs on sorted input, the last-element
    # pivot's worst case, which keeps the fixture comfortably past the
    # 10k-retirement floor without growing the array.
    p = Program()
    p.li(1, "array")
    p.ins("addi", 2, 0, SORT_ELEMENTS)
    p.li(4, "stack")
    p.ins("addi", 16, 0, 2)                 # remaining passes
    p.label("pass_start")
    p.ins("add", 3, 4, 0)                   # stack top = base
    p.ins("sw", 0, 0, 3)                    # push lo = 0
    p.ins("addi", 13, 2, -1)
    p.ins("sw", 13, 4, 3)                   # push hi = n-1
    p.ins("addi", 3, 3, 8)
    p.label("loop")
    p.ins("beq", 3, 4, "pass_end")
    p.ins("addi", 3, 3, -8)
    p.ins("lw", 5, 0, 3)                    # lo
    p.ins("lw", 6, 4, 3)                    # hi
    p.ins("bge", 5, 6, "loop")
    p.ins("slli", 9, 6, 2)
    p.ins("add", 9, 9, 1)
    p.ins("lw", 12, 0, 9)                   # pivot = a[hi]
    p.ins("addi", 7, 5, -1)                 # i = lo - 1
    p.ins("add", 8, 5, 0)                   # j = lo
    p.label("part")
    p.ins("bge", 8, 6, "place_pivot")
    p.ins("slli", 9, 8, 2)
    p.ins("add", 9, 9, 1)
    p.ins("lw", 13, 0, 9)                   # a[j]
    p.ins("bltu", 12, 13, "no_swap")        # skip unless a[j] <= pivot
    p.ins("addi", 7, 7, 1)
    p.ins("slli", 14, 7, 2)
    p.ins("add", 14, 14, 1)
    p.ins("lw", 15, 0, 14)                  # a[i]
    p.ins("sw", 13, 0, 14)
    p.ins("sw", 15, 0, 9)
    p.label("no_swap")
    p.ins("addi", 8, 8, 1)
    p.ins("jal", 0, "part")
    p.label("place_pivot")
    p.ins("addi", 7, 7, 1)                  # p = i + 1
    p.ins("slli", 14, 7, 2)
    p.ins("add", 14, 14, 1)
    p.ins("lw", 13, 0, 14)                  # a[p]
    p.ins("slli", 9, 6, 2)
    p.ins("add", 9, 9, 1)
    p.ins("lw", 15, 0, 9)                   # a[hi]
    p.ins("sw", 15, 0, 14)
    p.ins("sw", 13, 0, 9)
    p.ins("sw", 5, 0, 3)                    # push (lo, p-1)
    p.ins("addi", 14, 7, -1)
    p.ins("sw", 14, 4, 3)
    p.ins("addi", 3, 3, 8)
    p.ins("addi", 14, 7, 1)                 # push (p+1, hi)
    p.ins("sw", 14, 0, 3)
    p.ins("sw", 6, 4, 3)
    p.ins("addi", 3, 3, 8)
    p.ins("jal", 0, "loop")
    p.label("pass_end")
    p.ins("addi", 16, 16, -1)
    p.ins("bne", 16, 0, "pass_start")
    _digest_epilogue(p)
    code = p.here()
    p.label("array")
    p.words(sort_input_array())
    p.label("stack")
    p.words([0] * 160)
    words = p.assemble(base=0)
    return MemImage(base=0, words=tuple(words), entry=0, code_words=code)


DIGEST_ROUNDS = 480
_STATE_INIT = (0x67452301, 0xEFCDAB89, 0x98BADCFE, 0x10325476)


def _build_md5() -> MemImage:
    msg, ktab, shifts = digest_input_block()
    p = Program()
    p.li(1, "msg")
    p.li(2, "ktab")
    p.li(3, "shift")
    p.ins("addi", 4, 0, 32)
    p.li(20, _STATE_INIT[0])
    p.li(21, _STATE_INIT[1])
    p.li(22, _STATE_INIT[2])
    p.li(23, _STATE_INIT[3])
    p.ins("addi", 5, 0, 0)                  # round counter
    p.li(19, DIGEST_ROUNDS)
    p.label("round")
    p.ins("bge", 5, 19, "fin")
    p.ins("andi", 6, 5, 15)
    p.ins("slli", 7, 6, 2)
    p.ins("add", 8, 7, 1)
    p.ins("lw", 8, 0, 8)                    # m = msg[r & 15]
    p.ins("add", 9, 7, 2)
    p.ins("lw", 9, 0, 9)                    # k = ktab[r & 15]
    p.ins("and", 12, 21, 22)
    p.ins("xori", 13, 21, -1)
    p.ins("and", 13, 13, 23)
    p.ins("or", 12, 12, 13)                 # F(B, C, D)
    p.ins("add", 14, 20, 12)
    p.ins("add", 14, 14, 8)
    p.ins("add", 14, 14, 9)                 # T = A + F + m + k
    p.ins("andi", 15, 5, 3)
    p.ins("slli", 15, 15, 2)
    p.ins("add", 15, 15, 3)
    p.ins("lw", 15, 0, 15)                  # s = shift[r & 3]
    p.ins("sll", 16, 14, 15)
    p.ins("sub", 17, 4, 15)
    p.ins("srl", 17, 14, 17)
    p.ins("or", 16, 16, 17)                 # rol(T, s)
    p.ins("add", 16, 21, 16)                # newB
    p.ins("add", 20, 23, 0)                 # A = D
    p.ins("add", 23, 22, 0)                 # D = C
    p.ins("add", 22, 21, 0)                 # C = B
    p.ins("add", 21, 16, 0)                 # B = newB
    p.ins("addi", 5, 5, 1)
    p.ins("jal", 0, "round")
    p.label("fin")
    p.ins("xor", 10, 20, 22)
    p.ins("xor", 11, 21, 23)
    p.ins("ebreak")
    code = p.here()
    p.label("msg")
    p.words(msg)
    p.label("ktab")
    p.words(ktab)
    p.label("shift")
    p.words(shifts)
    words = p.assemble(base=0)
    return MemImage(base=0, words=tuple(words), entry=0, code_words=code)


_BUILTIN_BUILDERS = {"ssort": _build_ssort, "qsort": _build_qsort, "md5": _build_md5}
_builtin_cache = {}


def builtin_workloads() -> dict:
    """Name -> MemImage for the bundled fixtures (built once, then cached)."""
    for name, build in _BUILTIN_BUILDERS.items():
        if name not in _builtin_cache:
            _builtin_cache[name] = build()
    return dict(_builtin_cache)


def resolve_workload(spec: str) -> tuple:
    """Map 'builtin:<name>' or a file path to (name, MemImage)."""
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        images = builtin_workloads()
        if name not in images:
            raise ParseError(0, f"unknown builtin workload {name!r} "
                                f"(have: {', '.join(sorted(images))})")
        return name, images[name]
    path = Path(spec)
    if path.suffix == ".bin":
        return path.stem, load_bin(path)
    return path.stem, load_mem_file(path)
