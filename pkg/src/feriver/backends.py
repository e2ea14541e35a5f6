"""The two lock-step execution sources: golden ISS and fault-injectable DUT.

Both interpret the same ISA; the DUT differs in three observable ways:

* its register file is mirrored into a frame-store span after every
  writeback, and its strobe signal carries *no* register values - the
  arbiter sees DUT registers only through frame readback;
* it executes the (possibly mutated) DUT image and applies the runtime
  fault model;
* its architectural state can be overwritten from the golden model
  (resync) after a mismatch.

Fault site bookkeeping: Static-mode sites are 0-based image word indices,
fixed at injection time (the first execution of word w in straight-line
code is retirement ordinal w+1); Bernoulli-mode sites are retirement
ordinals, appended as the run encounters them.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from . import engine
from .errors import EmptyImage
from .isa import ArchState, MASK32, decode
from .errors import IllegalInstruction
from .pcap import FrameStore, GprLayout
from .workloads import MemImage


class Source(enum.Enum):
    ISS = "iss"
    DUT = "dut"


class FaultMode(enum.Enum):
    STATIC = "static"
    BERNOULLI = "bernoulli"


class Mutation(enum.Enum):
    INSTR_BITFLIP = "bitflip"
    WRONG_RD_RESULT = "wrongrd"


@dataclass(frozen=True)
class GprSnapshot:
    """Per-strobe architectural observation from one source (x0 never sent)."""

    source: Source
    strobe_index: int
    retired: int
    pc: int           # pc of the last retired instruction
    raw_instr: int
    regs: tuple       # x1..x31

    def __post_init__(self):
        if len(self.regs) != 31:
            raise ValueError(f"snapshot carries {len(self.regs)} registers, want 31")


@dataclass(frozen=True)
class FramesReadySignal:
    """DUT strobe announcement: registers stay behind the readback channel."""

    source: Source
    strobe_index: int
    retired: int
    pc: int
    raw_instr: int


@dataclass
class FaultSpec:
    mode: FaultMode = FaultMode.STATIC
    rate: float = 0.0
    seed: int = 0
    mutation: Mutation = Mutation.WRONG_RD_RESULT
    sites: list = field(default_factory=list)   # (index, description)

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError(f"rate {self.rate} outside [0, 1]")

    @classmethod
    def none(cls) -> "FaultSpec":
        return cls(rate=0.0)

    def summary(self) -> dict:
        return {"mode": self.mode.value, "rate": self.rate, "seed": self.seed,
                "mutation": self.mutation.value, "sites": len(self.sites)}


_RD_WRITERS = frozenset((
    "lui", "auipc", "jal", "jalr", "lb", "lh", "lw", "lbu", "lhu",
    "addi", "slti", "sltiu", "xori", "ori", "andi", "slli", "srli", "srai",
    "add", "sub", "sll", "slt", "sltu", "xor", "srl", "sra", "or", "and",
))


def _writes_visible_rd(word: int) -> bool:
    try:
        d = decode(word)
    except IllegalInstruction:
        return False
    return d.kind in _RD_WRITERS and d.rd != 0


class _Stream:
    """Counter-based deterministic draw stream (same mixer as the kernels)."""

    def __init__(self, seed: int):
        self.seed = seed
        self.n = 0

    def next(self) -> int:
        self.n += 1
        return engine.coin(self.seed, self.n)

    def below(self, n: int) -> int:
        return self.next() % n


def inject_static_faults(image: MemImage, rate: float, seed: int,
                         mutation: Mutation) -> tuple:
    """Mutate ceil(rate x code-words) distinct instruction words of the image.

    InstrBitFlip flips one drawn bit of the stored word (the flip may land in
    an unused field and stay architecturally silent, or produce an illegal
    word and kill the DUT run - both are authentic outcomes). WrongRdResult
    leaves the stored word alone and marks the site so the DUT computes
    result+1 into rd whenever it executes from that address; sites are drawn
    only from words whose instruction writes rd != x0, so every execution is
    architecturally visible.
    """
    if not image.words:
        raise EmptyImage("cannot inject into an empty image")
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"rate {rate} outside [0, 1]")

    spec = FaultSpec(mode=FaultMode.STATIC, rate=rate, seed=seed, mutation=mutation)
    if rate == 0.0:
        return image, spec

    code = range(image.code_words)
    if mutation is Mutation.WRONG_RD_RESULT:
        eligible = [w for w in code if _writes_visible_rd(image.words[w])]
    else:
        eligible = list(code)
    n_sites = min(math.ceil(rate * image.code_words), len(eligible))
    if n_sites == 0:
        return image, spec

    stream = _Stream(seed)
    order = list(eligible)
    for i in range(len(order) - 1, 0, -1):
        j = stream.below(i + 1)
        order[i], order[j] = order[j], order[i]
    chosen = sorted(order[:n_sites])

    words = list(image.words)
    for w in chosen:
        addr = image.base + 4 * w
        if mutation is Mutation.INSTR_BITFLIP:
            bit = stream.below(32)
            words[w] = (words[w] ^ (1 << bit)) & MASK32
            spec.sites.append((w, f"static bitflip of bit {bit} at word {w} (pc 0x{addr:08x})"))
        else:
            spec.sites.append((w, f"static wrongrd at word {w} (pc 0x{addr:08x})"))

    mutated = MemImage(base=image.base, words=tuple(words), entry=image.entry,
                       code_words=image.code_words)
    return mutated, spec


def state_from_image(image: MemImage) -> ArchState:
    return ArchState.from_words(image.words, base=image.base, entry=image.entry)


def runtime_fault_for(fault: FaultSpec, n_words: int) -> engine.RuntimeFault:
    """Compile a FaultSpec into the representation the kernels consume."""
    if fault.mode is FaultMode.BERNOULLI and fault.rate > 0.0:
        mut = engine.MUT_BITFLIP if fault.mutation is Mutation.INSTR_BITFLIP \
            else engine.MUT_WRONGRD
        return engine.RuntimeFault(
            mode=engine.FAULT_BERNOULLI,
            threshold=engine.RuntimeFault.bernoulli_threshold(fault.rate),
            seed=fault.seed, mutation=mut)
    mask = b""
    if (fault.mode is FaultMode.STATIC
            and fault.mutation is Mutation.WRONG_RD_RESULT and fault.sites):
        m = bytearray(n_words)
        for w, _desc in fault.sites:
            m[w] = 1
        mask = bytes(m)
    return engine.RuntimeFault(wrongrd_mask=mask)


def resync_state(st: ArchState, golden: ArchState, image: MemImage,
                 fault: FaultSpec) -> None:
    """Overwrite one architectural state from another, keeping injected
    image mutations in place (they model persistent implementation bugs)."""
    st.regs[:] = golden.regs
    st.mem[:] = golden.mem
    st.pc = golden.pc
    st.retired = golden.retired
    st.halted = golden.halted
    st.last_pc = golden.last_pc
    st.last_raw = golden.last_raw
    if fault.mode is FaultMode.STATIC:
        for w, _desc in fault.sites:
            st.mem[4 * w:4 * w + 4] = image.words[w].to_bytes(4, "little")


class GoldenBackend:
    """Reference ISS: plain interpretation, registers reported in snapshots."""

    source = Source.ISS

    def __init__(self, image: MemImage):
        self.image = image
        self.state = state_from_image(image)
        self.strobe_index = 0

    def run_to_strobe(self, k: int) -> GprSnapshot:
        if k < 1:
            raise ValueError("strobe interval must be >= 1")
        if not self.state.halted:
            engine.run_state_block(self.state, k)
        snap = GprSnapshot(self.source, self.strobe_index, self.state.retired,
                           self.state.last_pc, self.state.last_raw,
                           self.state.reg_tuple())
        self.strobe_index += 1
        return snap


class DutBackend:
    """Emulated device under test with frame-mirrored registers and faults."""

    source = Source.DUT

    def __init__(self, image: MemImage, store: FrameStore, layout: GprLayout,
                 fault: FaultSpec | None = None):
        self.image = image
        self.state = state_from_image(image)
        self.store = store
        self.layout = layout
        self.span = layout.install(store)
        self.fault = fault or FaultSpec.none()
        self.strobe_index = 0
        self._rt = runtime_fault_for(self.fault, len(image.words))
        self._events = [] if self._rt.mode == engine.FAULT_BERNOULLI else None

    def run_to_strobe(self, k: int) -> FramesReadySignal:
        if k < 1:
            raise ValueError("strobe interval must be >= 1")
        if not self.state.halted:
            with self.store.lock:
                engine.run_state_block(self.state, k, fault=self._rt,
                                       span=self.span, events=self._events)
            self._drain_events()
        sig = FramesReadySignal(self.source, self.strobe_index, self.state.retired,
                                self.state.last_pc, self.state.last_raw)
        self.strobe_index += 1
        return sig

    def _drain_events(self):
        if not self._events:
            return
        kind = self.fault.mutation.value
        for ordinal, _code, detail in self._events:
            suffix = f", bit {detail}" if self.fault.mutation is Mutation.INSTR_BITFLIP else ""
            self.fault.sites.append(
                (ordinal, f"bernoulli {kind} at retirement {ordinal}{suffix}"))
        self._events.clear()

    def resync_from(self, golden: ArchState) -> None:
        """Overwrite architectural state from the golden model and re-mirror."""
        with self.store.lock:
            resync_state(self.state, golden, self.image, self.fault)
            self.span[1:32] = self.state.regs[1:32]
