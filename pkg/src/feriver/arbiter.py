"""Rendezvous, comparison and session driving.

The arbiter buffers one outstanding submission per source, pairs them by
strobe index, reads the DUT registers back through the frame channel and
compares them word-for-word with the ISS snapshot. A mismatch produces a
Checkpoint, raises a halt event on the poll-able event queue and, when
resynchronization is enabled, overwrites the DUT state from the golden
model so the session can continue.

Comparison domain is x1..x31 only: a pc divergence without a register
divergence is not a mismatch, though both pcs are recorded when a
checkpoint is built.

``drive_session`` loops run-to-strobe / submit / check until the golden
program halts (or the first mismatch, without resync), keeping a short
history of boundary state copies so divergence windows can be replayed
without re-running the session.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass

from .backends import DutBackend, FaultSpec, GoldenBackend, Source
from .checkpoint import Checkpoint
from .errors import (
    DuplicateIndex,
    IncompleteRendezvous,
    OutOfOrderSubmission,
    TooManyFrames,
)
from .isa import disassemble
from .pcap import (
    MAX_DATA_FRAMES,
    FrameAddress,
    FrameStore,
    GprLayout,
    ReadbackRequest,
    extract_gprs,
    readback,
)


@dataclass(frozen=True)
class StrobeConfig:
    strobe_counter: int
    gpr_layout: GprLayout
    readback_start: FrameAddress
    n_frames: int
    resync: bool = False

    def __post_init__(self):
        if self.strobe_counter < 1:
            raise ValueError("strobe_counter must be >= 1")
        if self.n_frames > MAX_DATA_FRAMES:
            raise TooManyFrames(
                f"n_frames={self.n_frames}: a readback transaction is limited to "
                f"{MAX_DATA_FRAMES} data frames + 1 padding frame")
        if self.n_frames < self.gpr_layout.n_frames:
            raise ValueError("readback window smaller than the register span")

    @classmethod
    def default(cls, strobe_counter: int = 1, resync: bool = False,
                layout: GprLayout | None = None) -> "StrobeConfig":
        lay = layout or GprLayout(start=FrameAddress(block_type=1))
        return cls(strobe_counter=strobe_counter, gpr_layout=lay,
                   readback_start=lay.start, n_frames=lay.n_frames, resync=resync)


@dataclass(frozen=True)
class CheckVerdict:
    strobe_index: int
    verdict: str                 # "match" | "mismatch"
    checkpoint: Checkpoint | None = None

    def __post_init__(self):
        if (self.verdict == "mismatch") != (self.checkpoint is not None):
            raise ValueError("mismatch verdicts carry a checkpoint, matches do not")


@dataclass(frozen=True)
class HaltEvent:
    strobe_index: int
    verdict: str


class Arbiter:
    """Serialized rendezvous point between the two sources."""

    def __init__(self, store: FrameStore, cfg: StrobeConfig,
                 golden: GoldenBackend | None = None,
                 dut: DutBackend | None = None,
                 phase_times: dict | None = None):
        self.store = store
        self.cfg = cfg
        self.golden = golden
        self.dut = dut
        self.phase_times = phase_times if phase_times is not None else {}
        self.phase_times.setdefault("readback", 0.0)
        self.phase_times.setdefault("compare", 0.0)
        self._lock = threading.Lock()
        self._buffer = {Source.ISS: None, Source.DUT: None}
        self._next_accept = {Source.ISS: 0, Source.DUT: 0}
        self._next_checkpoint_id = 0
        self._events = deque()

    def submit(self, item, source: Source | None = None) -> None:
        src = source or item.source
        with self._lock:
            idx = item.strobe_index
            expected = self._next_accept[src]
            if idx < expected:
                raise DuplicateIndex(f"{src.value} already submitted strobe {idx}")
            if idx > expected or self._buffer[src] is not None:
                raise OutOfOrderSubmission(
                    f"{src.value} submitted strobe {idx}, next unconsumed is {expected}")
            self._buffer[src] = item
            self._next_accept[src] = idx + 1

    def ready(self, strobe_index: int) -> bool:
        with self._lock:
            iss, dut = self._buffer[Source.ISS], self._buffer[Source.DUT]
            return (iss is not None and dut is not None
                    and iss.strobe_index == dut.strobe_index == strobe_index)

    def poll_event(self) -> HaltEvent | None:
        with self._lock:
            return self._events.popleft() if self._events else None

    def check(self, strobe_index: int) -> CheckVerdict:
        with self._lock:
            iss = self._buffer[Source.ISS]
            sig = self._buffer[Source.DUT]
            if (iss is None or sig is None
                    or iss.strobe_index != strobe_index
                    or sig.strobe_index != strobe_index):
                raise IncompleteRendezvous(
                    f"strobe {strobe_index} checked before both sources submitted")
            t0 = time.perf_counter()
            payload = readback(self.store,
                               ReadbackRequest(self.cfg.readback_start, self.cfg.n_frames))
            dut_regs = extract_gprs(payload, self.cfg.gpr_layout, self.store.geometry)
            t1 = time.perf_counter()
            self.phase_times["readback"] += t1 - t0

            checkpoint = None
            if dut_regs != iss.regs:
                checkpoint = Checkpoint.build(
                    checkpoint_id=self._next_checkpoint_id,
                    strobe_index=strobe_index,
                    pc=iss.pc,
                    mnemonic=disassemble(iss.raw_instr),
                    gpr_bitstream=dut_regs,
                    gpr_iss=iss.regs,
                    dut_pc_raw=sig.pc)
                self._next_checkpoint_id += 1
                if self.cfg.resync and self.golden is not None and self.dut is not None:
                    self.dut.resync_from(self.golden.state)
            self._buffer[Source.ISS] = None
            self._buffer[Source.DUT] = None
            verdict = CheckVerdict(strobe_index=strobe_index,
                                   verdict="mismatch" if checkpoint else "match",
                                   checkpoint=checkpoint)
            self._events.append(HaltEvent(strobe_index, verdict.verdict))
            self.phase_times["compare"] += time.perf_counter() - t1
        return verdict


@dataclass
class SessionReport:
    workload: str
    strobe_counter: int
    fault: dict
    retired: int
    strobes: int
    checkpoints: int
    times: dict
    throughput_ips: float

    def to_doc(self) -> dict:
        return {
            "workload": self.workload,
            "strobe_counter": self.strobe_counter,
            "fault": self.fault,
            "retired": self.retired,
            "strobes": self.strobes,
            "checkpoints": self.checkpoints,
            "times": {k: round(v, 6) for k, v in self.times.items()},
            "throughput_ips": round(self.throughput_ips, 3),
        }


@dataclass
class WindowContext:
    """Everything a divergence-window replay needs, captured at checkpoint time."""

    checkpoint: Checkpoint
    boundary_retired: int
    retained: list                  # [(retired, golden_state_copy, dut_state_copy)]
    cfg: StrobeConfig
    fault: FaultSpec
    dut_image: object
    golden_image: object


def drive_session(golden: GoldenBackend, dut: DutBackend, arbiter: Arbiter,
                  cfg: StrobeConfig, *, workload_name: str = "?",
                  on_checkpoint=None, schedule: str = "interleaved",
                  retain_window: int | None = None) -> SessionReport:
    """Run the full co-verification loop; returns counts and phase times."""
    if schedule not in ("interleaved", "threaded"):
        raise ValueError(f"unknown schedule {schedule!r}")
    v = cfg.strobe_counter
    window = retain_window if retain_window is not None else 2 * v
    keep = max(2, -(-window // v) + 1)

    times = arbiter.phase_times
    times.setdefault("parallel_run", 0.0)
    times.setdefault("reconstruct", 0.0)
    retained = deque(maxlen=keep)
    retained.append((0, golden.state.copy(), dut.state.copy()))
    checkpoints = 0
    strobe = 0
    t_session = time.perf_counter()

    def handle_verdict(verdict) -> bool:
        """Returns True when the session should stop."""
        nonlocal checkpoints, strobe
        if verdict.checkpoint is not None:
            checkpoints += 1
            if on_checkpoint is not None:
                t0 = time.perf_counter()
                on_checkpoint(WindowContext(
                    checkpoint=verdict.checkpoint,
                    boundary_retired=golden.state.retired,
                    retained=list(retained),
                    cfg=cfg, fault=dut.fault,
                    dut_image=dut.image, golden_image=golden.image))
                times["reconstruct"] += time.perf_counter() - t0
            if not cfg.resync:
                return True
        retained.append((golden.state.retired, golden.state.copy(), dut.state.copy()))
        strobe += 1
        return golden.state.halted

    if schedule == "interleaved":
        while True:
            t0 = time.perf_counter()
            arbiter.submit(golden.run_to_strobe(v))
            arbiter.submit(dut.run_to_strobe(v))
            times["parallel_run"] += time.perf_counter() - t0
            if handle_verdict(arbiter.check(strobe)):
                break
    else:
        _run_threaded(golden, dut, arbiter, v, times, handle_verdict)

    wall = time.perf_counter() - t_session
    retired = golden.state.retired
    return SessionReport(
        workload=workload_name, strobe_counter=v, fault=dut.fault.summary(),
        retired=retired, strobes=strobe, checkpoints=checkpoints,
        times=dict(times), throughput_ips=(retired / wall if wall > 0 else 0.0))


def _run_threaded(golden, dut, arbiter, v, times, handle_verdict):
    """Two backend threads rendezvous at the arbiter once per window."""
    cond = threading.Condition()
    released = -1          # all windows <= released are fully checked
    stop = False
    failures = []

    def worker(backend):
        nonlocal stop
        i = 0
        while True:
            with cond:
                cond.wait_for(lambda: released >= i - 1 or stop)
                if stop:
                    return
            try:
                arbiter.submit(backend.run_to_strobe(v))
            except Exception as exc:  # diagnostics propagate to the coordinator
                with cond:
                    failures.append(exc)
                    stop = True
                    cond.notify_all()
                return
            with cond:
                cond.notify_all()
            i += 1

    threads = [threading.Thread(target=worker, args=(b,), daemon=True)
               for b in (golden, dut)]
    t0 = time.perf_counter()
    for t in threads:
        t.start()
    try:
        i = 0
        while True:
            with cond:
                cond.wait_for(lambda: arbiter.ready(i) or stop)
                if stop:
                    break
            times["parallel_run"] += time.perf_counter() - t0
            done = handle_verdict(arbiter.check(i))
            with cond:
                if done:
                    stop = True
                    cond.notify_all()
                    break
                released = i
                cond.notify_all()
            t0 = time.perf_counter()
            i += 1
    finally:
        with cond:
            stop = True
            cond.notify_all()
        for t in threads:
            t.join(timeout=10.0)
    if failures:
        raise failures[0]
