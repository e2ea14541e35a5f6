"""Deterministic divergence-window replay rendered as a VCD waveform.

Both backends are re-executed instruction by instruction across the window
leading to a checkpoint. One VCD timestep per retired instruction carries a
toggling clk, golden and DUT pc/instruction words, both x1..x31 register
files, and a ``diverged`` flag that latches high at the first step where the
compared registers differ. The replay must land exactly on the checkpoint's
two register sets, otherwise the session was not reproducible and the
waveform would be fiction.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import engine
from .arbiter import Arbiter, StrobeConfig, WindowContext, drive_session
from .backends import (
    DutBackend,
    FaultMode,
    FaultSpec,
    GoldenBackend,
    Mutation,
    inject_static_faults,
    resync_state,
    runtime_fault_for,
)
from .errors import NonReproducibleSession
from .isa import ArchState
from .pcap import FrameStore, Geometry
from .vcd import VcdWriter
from .workloads import MemImage

CLK_PERIOD_NS = 10


@dataclass(frozen=True)
class ReplayWindow:
    """Replay scope: the last W retirements before a checkpoint boundary."""

    start_retired: int
    end_retired: int
    base_state: ArchState      # last-known-good golden state at or before start

    @classmethod
    def for_boundary(cls, boundary_retired: int, window: int,
                     base_state: ArchState) -> "ReplayWindow":
        if window < 1:
            raise ValueError("window must span at least one instruction")
        return cls(start_retired=max(0, boundary_retired - window),
                   end_retired=boundary_retired, base_state=base_state)


def _declare_vars(writer: VcdWriter):
    ids = {}
    ids["clk"] = writer.var(("feriver",), "clk", 1)
    ids["diverged"] = writer.var(("feriver",), "diverged", 1)
    for side in ("golden", "dut"):
        scope = ("feriver", side)
        ids[f"{side}.pc"] = writer.var(scope, "pc", 32)
        ids[f"{side}.instr"] = writer.var(scope, "instr", 32)
        for i in range(1, 32):
            ids[f"{side}.x{i}"] = writer.var(scope, f"x{i}", 32)
    return ids


def _side_values(ids, side, state: ArchState) -> dict:
    vals = {ids[f"{side}.pc"]: state.last_pc, ids[f"{side}.instr"]: state.last_raw}
    regs = state.regs
    for i in range(1, 32):
        vals[ids[f"{side}.x{i}"]] = regs[i]
    return vals


def render_window(ctx: WindowContext, window: int) -> str:
    """Replay the checkpoint's divergence window from retained boundary states."""
    cp = ctx.checkpoint
    end = ctx.boundary_retired
    start = max(0, end - window)

    base = None
    for retired, g_copy, d_copy in ctx.retained:
        if retired <= start and (base is None or retired > base[0]):
            base = (retired, g_copy, d_copy)
    if base is None:
        raise NonReproducibleSession(
            f"no retained boundary state at or before retirement {start}")
    cursor, golden, dut = base[0], base[1].copy(), base[2].copy()

    rt = runtime_fault_for(ctx.fault, len(ctx.dut_image.words))
    v = ctx.cfg.strobe_counter

    writer = VcdWriter()
    ids = _declare_vars(writer)
    diverged = False
    began = False
    n_steps = 0

    def record_step():
        nonlocal diverged, n_steps, began
        if not began:
            return
        n_steps += 1
        diverged = diverged or golden.reg_tuple() != dut.reg_tuple()
        changes = {ids["clk"]: 1, ids["diverged"]: int(diverged)}
        changes.update(_side_values(ids, "golden", golden))
        changes.update(_side_values(ids, "dut", dut))
        writer.step(CLK_PERIOD_NS * n_steps, changes)
        writer.step(CLK_PERIOD_NS * n_steps + CLK_PERIOD_NS // 2, {ids["clk"]: 0})

    def maybe_begin():
        nonlocal diverged, began
        if not began and golden.retired == start:
            diverged = golden.reg_tuple() != dut.reg_tuple()
            initial = {ids["clk"]: 0, ids["diverged"]: int(diverged)}
            initial.update(_side_values(ids, "golden", golden))
            initial.update(_side_values(ids, "dut", dut))
            writer.begin(initial)
            began = True

    # Window-by-window lockstep: per window each side independently runs up
    # to strobe_counter instructions (or to its own halt), exactly like the
    # session; interior boundaries re-apply the arbiter's resync decision.
    while golden.retired < end:
        maybe_begin()
        for _ in range(v):
            stepped = False
            if not golden.halted:
                engine.run_state_block(golden, 1)
                stepped = True
            if not dut.halted:
                engine.run_state_block(dut, 1, fault=rt)
                stepped = True
            if not stepped:
                break
            record_step()
            maybe_begin()
        if golden.retired < end and ctx.cfg.resync \
                and golden.reg_tuple() != dut.reg_tuple():
            resync_state(dut, golden, ctx.dut_image, ctx.fault)
    if not began or n_steps == 0:
        raise NonReproducibleSession("empty replay window")

    if golden.reg_tuple() != cp.gpr_iss or dut.reg_tuple() != cp.gpr_bitstream:
        raise NonReproducibleSession(
            f"replay of checkpoint {cp.checkpoint_id} did not land on the "
            f"recorded register sets at retirement {end}")
    if golden.last_pc != cp.pc:
        raise NonReproducibleSession(
            f"replay pc 0x{golden.last_pc:08x} differs from checkpoint pc 0x{cp.pc:08x}")
    return writer.text()


class _Captured(Exception):
    def __init__(self, ctx):
        super().__init__("window captured")
        self.ctx = ctx


def reconstruct(workload: MemImage, fault: FaultSpec, cp, window: int,
                cfg: StrobeConfig, geometry: Geometry | None = None) -> str:
    """Offline reconstruction: re-run the session from scratch, replay, render.

    The session must be fully determined by (workload, fault, cfg): static
    bit-flip images are re-derived from the fault's seed, WrongRdResult and
    Bernoulli faults replay from the fault spec directly.
    """
    if window < 1:
        raise ValueError("window must span at least one instruction")
    dut_image = workload
    if (fault.mode is FaultMode.STATIC and fault.rate > 0.0
            and fault.mutation is Mutation.INSTR_BITFLIP):
        dut_image, rederived = inject_static_faults(
            workload, fault.rate, fault.seed, fault.mutation)
        if rederived.sites != fault.sites:
            raise NonReproducibleSession(
                "fault spec does not re-derive from (workload, rate, seed)")

    store = FrameStore(geometry=geometry or Geometry())
    golden = GoldenBackend(workload)
    dut = DutBackend(dut_image, store, cfg.gpr_layout, fault=_replay_copy(fault))

    def capture(ctx: WindowContext):
        if ctx.checkpoint.checkpoint_id == cp.checkpoint_id:
            if ctx.checkpoint != cp:
                raise NonReproducibleSession(
                    f"checkpoint {cp.checkpoint_id} replayed differently")
            raise _Captured(ctx)

    arb = Arbiter(store, cfg, golden=golden, dut=dut)
    try:
        drive_session(golden, dut, arb, cfg, on_checkpoint=capture,
                      retain_window=window)
    except _Captured as hit:
        return render_window(hit.ctx, window)
    raise NonReproducibleSession(
        f"session ended without reproducing checkpoint {cp.checkpoint_id}")


def _replay_copy(fault: FaultSpec) -> FaultSpec:
    """Fresh spec so the replay does not append to the caller's site list."""
    return FaultSpec(mode=fault.mode, rate=fault.rate, seed=fault.seed,
                     mutation=fault.mutation, sites=list(fault.sites))
