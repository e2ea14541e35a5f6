"""Kernel selection and block-execution wrappers.

The hot loop lives in a compiled extension (feriver._kernel) when it built;
otherwise the pure-Python twin (feriver._pykernel) is used. Setting
FERIVER_PURE=1 in the environment forces the fallback, which is how the
benchmark compares the two.
"""

from __future__ import annotations

import os
from array import array
from dataclasses import dataclass

from .errors import IllegalInstruction, MisalignedAccess, MisalignedJump, OutOfImage

if os.environ.get("FERIVER_PURE") == "1":
    from . import _pykernel as _impl

    KERNEL = "pure"
else:
    try:
        from . import _kernel as _impl  # type: ignore[no-redef]

        KERNEL = "compiled"
    except ImportError:
        from . import _pykernel as _impl

        KERNEL = "pure"

STOP_OK = 0
STOP_HALT = 1

FAULT_NONE = 0
FAULT_BERNOULLI = 1

MUT_BITFLIP = 0
MUT_WRONGRD = 1

_EMPTY_MASK = b""
_EMPTY_SPAN = array("I")

mix64 = _impl.mix64
coin = _impl.coin


def active_kernel() -> str:
    return KERNEL


def kernel_module(name: str):
    """Explicit kernel lookup ('pure' or 'compiled'); used by the benchmark."""
    if name == "pure":
        from . import _pykernel

        return _pykernel
    from . import _kernel

    return _kernel


@dataclass
class RuntimeFault:
    """Fault model compiled down to what the kernels consume."""

    mode: int = FAULT_NONE          # FAULT_NONE / FAULT_BERNOULLI
    threshold: int = 0              # bernoulli: fire when mix >> 11 < threshold
    seed: int = 0
    mutation: int = MUT_WRONGRD
    wrongrd_mask: bytes = _EMPTY_MASK  # static WrongRdResult sites by word index

    @staticmethod
    def bernoulli_threshold(rate: float) -> int:
        return int(rate * (1 << 53) + 0.5)


def _raise_stop(stop: int, detail: int):
    if stop == 2:
        raise IllegalInstruction(detail)
    if stop == 3:
        raise MisalignedAccess(detail)
    if stop == 4:
        raise MisalignedJump(detail)
    raise OutOfImage(detail)


def run_state_block(state, max_instrs: int, fault: RuntimeFault | None = None,
                    span=None, events=None, kernel=None) -> int:
    """Advance ``state`` by up to max_instrs instructions in place.

    Returns the number of instructions retired in this block. Raises the
    corresponding SimDiagnostic on a fatal stop, with state advanced up to
    (not including) the faulting instruction.
    """
    impl = kernel or _impl
    f = fault or _NO_FAULT
    pc, retired, last_pc, last_raw, count, stop, detail = impl.run_block(
        state.regs, state.mem, state.base, state.pc, state.retired, max_instrs,
        f.mode, f.threshold, f.seed, f.mutation, f.wrongrd_mask,
        span if span is not None else _EMPTY_SPAN, events)
    state.pc = pc
    state.retired = retired
    if count:
        state.last_pc = last_pc
        state.last_raw = last_raw
    if stop == STOP_HALT:
        state.halted = True
    elif stop != STOP_OK:
        _raise_stop(stop, detail)
    return count


def step_one(state, word: int) -> None:
    """Apply one supplied instruction word at state.pc (no fetch)."""
    next_pc, stop, detail, _rd = _impl.exec_word(
        state.regs, state.mem, state.base, state.pc, word, False)
    if stop > STOP_HALT:
        _raise_stop(stop, detail)
    state.last_pc = state.pc
    state.last_raw = word & 0xFFFFFFFF
    state.pc = next_pc
    state.retired += 1
    state.regs[0] = 0
    if stop == STOP_HALT:
        state.halted = True


_NO_FAULT = RuntimeFault()
