"""Rendezvous protocol, verdicts, and whole-session driving."""

import math
import random

import pytest

from genprog import rand_alu_program, rand_program_with_protected_site
from feriver.arbiter import Arbiter, StrobeConfig, drive_session
from feriver.backends import (
    DutBackend,
    FaultMode,
    FaultSpec,
    GoldenBackend,
    Mutation,
)
from feriver.checkpoint import serialize_checkpoint
from feriver.errors import (
    DuplicateIndex,
    IncompleteRendezvous,
    OutOfOrderSubmission,
    TooManyFrames,
)
from feriver.pcap import FrameAddress, FrameStore, GprLayout
from feriver.workloads import MemImage, builtin_workloads


def _image(words):
    return MemImage(base=0, words=tuple(words), entry=0)


def make_bed(image, *, k=1, resync=False, fault=None):
    cfg = StrobeConfig.default(strobe_counter=k, resync=resync)
    store = FrameStore()
    golden = GoldenBackend(image)
    dut = DutBackend(image, store, cfg.gpr_layout, fault=fault)
    arb = Arbiter(store, cfg, golden=golden, dut=dut)
    return cfg, store, golden, dut, arb


def test_strobe_config_validation():
    with pytest.raises(ValueError):
        StrobeConfig.default(strobe_counter=0)
    lay = GprLayout(start=FrameAddress(block_type=1))
    with pytest.raises(TooManyFrames):
        StrobeConfig(strobe_counter=1, gpr_layout=lay,
                     readback_start=lay.start, n_frames=10)


# --- submit protocol -----------------------------------------------------------

def test_submit_either_order_buffers_both():
    img = _image(rand_alu_program(random.Random(0), 6))
    for golden_first in (True, False):
        _cfg, _store, golden, dut, arb = make_bed(img)
        snap = golden.run_to_strobe(1)
        sig = dut.run_to_strobe(1)
        if golden_first:
            arb.submit(snap)
            arb.submit(sig)
        else:
            arb.submit(sig)
            arb.submit(snap)
        assert arb.ready(0)


def test_submit_out_of_order_rejected():
    img = _image(rand_alu_program(random.Random(0), 6))
    _cfg, _store, golden, _dut, arb = make_bed(img)
    s0 = golden.run_to_strobe(1)
    s1 = golden.run_to_strobe(1)
    s2 = golden.run_to_strobe(1)
    arb.submit(s0)
    with pytest.raises(OutOfOrderSubmission):
        arb.submit(s2)
    with pytest.raises(OutOfOrderSubmission):
        arb.submit(s1)    # idx 1 while idx 0 is still unconsumed


def test_submit_duplicate_rejected():
    img = _image(rand_alu_program(random.Random(0), 6))
    _cfg, _store, golden, dut, arb = make_bed(img)
    snap = golden.run_to_strobe(1)
    arb.submit(snap)
    with pytest.raises(DuplicateIndex):
        arb.submit(snap)                     # still buffered
    arb.submit(dut.run_to_strobe(1))
    arb.check(0)
    with pytest.raises(DuplicateIndex):
        arb.submit(snap)                     # already consumed


def test_check_requires_both_sources():
    img = _image(rand_alu_program(random.Random(0), 6))
    _cfg, _store, golden, _dut, arb = make_bed(img)
    arb.submit(golden.run_to_strobe(1))
    with pytest.raises(IncompleteRendezvous):
        arb.check(0)


# --- verdicts --------------------------------------------------------------------

def test_match_produces_no_checkpoint_and_event():
    img = _image(rand_alu_program(random.Random(1), 10))
    _cfg, _store, golden, dut, arb = make_bed(img, k=4)
    arb.submit(golden.run_to_strobe(4))
    arb.submit(dut.run_to_strobe(4))
    verdict = arb.check(0)
    assert verdict.verdict == "match" and verdict.checkpoint is None
    event = arb.poll_event()
    assert event is not None and event.strobe_index == 0
    assert arb.poll_event() is None


def test_mismatch_in_x7_only():
    words = rand_alu_program(random.Random(2), 6)
    img = _image(words)
    # make word 2 write x7 so the +1 lands exactly there
    from feriver.isa import DecodedInstr, encode
    words = list(words)
    words[2] = encode(DecodedInstr("addi", rd=7, rs1=0, imm=100))
    img = _image(words)
    fault = FaultSpec(mode=FaultMode.STATIC, mutation=Mutation.WRONG_RD_RESULT,
                      rate=0.01, seed=0, sites=[(2, "x")])
    _cfg, _store, golden, dut, arb = make_bed(img, k=7, fault=fault)
    arb.submit(golden.run_to_strobe(7))
    arb.submit(dut.run_to_strobe(7))
    verdict = arb.check(0)
    assert verdict.verdict == "mismatch"
    cp = verdict.checkpoint
    assert cp.mismatched == ("x7",)
    assert cp.gpr_bitstream[6] == 101 and cp.gpr_iss[6] == 100
    assert cp.checkpoint_id == 0


def test_checkpoint_fields_record_both_pcs_and_mnemonic():
    img = _image(rand_alu_program(random.Random(3), 5))
    fault = FaultSpec(mode=FaultMode.STATIC, mutation=Mutation.WRONG_RD_RESULT,
                      rate=0.01, seed=0, sites=[(1, "x")])
    _cfg, _store, golden, dut, arb = make_bed(img, k=6, fault=fault)
    snap = golden.run_to_strobe(6)
    arb.submit(snap)
    arb.submit(dut.run_to_strobe(6))
    cp = arb.check(0).checkpoint
    assert cp.pc == snap.pc
    from feriver.isa import disassemble
    assert cp.mnemonic == disassemble(snap.raw_instr)
    assert cp.dut_pc_raw == dut.state.last_pc


def test_order_independence_identical_checkpoint_bytes():
    words = rand_program_with_protected_site(random.Random(4), 9, 3)
    img = _image(words)
    fault = FaultSpec(mode=FaultMode.STATIC, mutation=Mutation.WRONG_RD_RESULT,
                      rate=0.01, seed=0, sites=[(3, "x")])
    blobs = []
    for dut_first in (False, True):
        _cfg, _store, golden, dut, arb = make_bed(img, k=10, fault=fault)
        snap = golden.run_to_strobe(10)
        sig = dut.run_to_strobe(10)
        for item in ((sig, snap) if dut_first else (snap, sig)):
            arb.submit(item)
        verdict = arb.check(0)
        blobs.append(serialize_checkpoint(verdict.checkpoint).encode())
    assert blobs[0] == blobs[1]


# --- sessions --------------------------------------------------------------------

def test_zero_fault_qsort_session_counts():
    img = builtin_workloads()["qsort"]
    cfg, _store, golden, dut, arb = _session_bed(img, k=10)
    report = drive_session(golden, dut, arb, cfg, workload_name="qsort")
    assert report.checkpoints == 0
    assert report.retired == 33895            # golden-run oracle, pinned
    assert report.strobes == math.ceil(33895 / 10)
    assert report.workload == "qsort"


def _session_bed(image, *, k=1, resync=False, fault=None, dut_image=None):
    cfg = StrobeConfig.default(strobe_counter=k, resync=resync)
    store = FrameStore()
    golden = GoldenBackend(image)
    dut = DutBackend(dut_image or image, store, cfg.gpr_layout, fault=fault)
    arb = Arbiter(store, cfg, golden=golden, dut=dut)
    return cfg, store, golden, dut, arb


def test_wrongrd_at_site_strobe1():
    # fault at retirement ordinal 4 (word 3), k=1: checkpoint at strobe_index 3
    words = rand_program_with_protected_site(random.Random(5), 8, 3)
    img = _image(words)
    fault = FaultSpec(mode=FaultMode.STATIC, mutation=Mutation.WRONG_RD_RESULT,
                      rate=0.01, seed=0, sites=[(3, "x")])
    seen = []
    cfg, _store, golden, dut, arb = _session_bed(img, k=1, fault=fault)
    report = drive_session(golden, dut, arb, cfg,
                           on_checkpoint=lambda ctx: seen.append(ctx.checkpoint))
    assert report.checkpoints == 1
    assert seen[0].strobe_index == 3
    assert seen[0].pc == 12                   # address of the 4th instruction


def test_wrongrd_same_site_strobe3():
    words = rand_program_with_protected_site(random.Random(5), 8, 3)
    img = _image(words)
    fault = FaultSpec(mode=FaultMode.STATIC, mutation=Mutation.WRONG_RD_RESULT,
                      rate=0.01, seed=0, sites=[(3, "x")])
    seen = []
    cfg, _store, golden, dut, arb = _session_bed(img, k=3, fault=fault)
    drive_session(golden, dut, arb, cfg,
                  on_checkpoint=lambda ctx: seen.append(ctx.checkpoint))
    # first boundary at-or-after retirement 4 is retirement 6 (strobe_index 1)
    assert seen[0].strobe_index == 1
    assert seen[0].pc == 20


def test_no_false_positives_1000_random_programs():
    rng = random.Random(2718)
    for _ in range(1_000):
        words = rand_alu_program(rng, rng.randrange(5, 40))
        img = _image(words)
        k = rng.randrange(1, 9)
        cfg, _store, golden, dut, arb = _session_bed(img, k=k)
        report = drive_session(golden, dut, arb, cfg)
        assert report.checkpoints == 0
        assert report.retired == len(words)


def test_no_false_positives_bundled_workloads():
    for name, img in builtin_workloads().items():
        cfg, _store, golden, dut, arb = _session_bed(img, k=7)
        report = drive_session(golden, dut, arb, cfg)
        assert report.checkpoints == 0, name


def test_resync_next_strobe_matches():
    rng = random.Random(12)
    words = rand_program_with_protected_site(rng, 30, 10)
    img = _image(words)
    fault = FaultSpec(mode=FaultMode.STATIC, mutation=Mutation.WRONG_RD_RESULT,
                      rate=0.01, seed=0, sites=[(10, "x")])
    cfg, _store, golden, dut, arb = _session_bed(img, k=2, resync=True, fault=fault)
    seen = []
    report = drive_session(golden, dut, arb, cfg,
                           on_checkpoint=lambda ctx: seen.append(ctx.checkpoint))
    assert report.checkpoints == 1           # site executes once, then resync
    assert seen[0].strobe_index == 5         # boundary at retirement 12


def test_checkpoint_count_conservation():
    """Checkpoints == strobe boundaries whose register sets differ (manual diff)."""
    rng = random.Random(515)
    for _ in range(10):
        n = rng.randrange(20, 60)
        sites = sorted(rng.sample(range(n), 3))
        words = rand_alu_program(rng, n)
        img = _image(words)
        k = rng.randrange(1, 5)
        fault = FaultSpec(mode=FaultMode.STATIC, mutation=Mutation.WRONG_RD_RESULT,
                          rate=0.1, seed=0, sites=[(s, "x") for s in sites])

        # independent boundary diff with plain backends, no arbiter
        cfg, store, golden, dut, arb = _session_bed(img, k=k, resync=True, fault=fault)
        from feriver.pcap import ReadbackRequest, extract_gprs, readback
        expected = 0
        g2 = GoldenBackend(img)
        store2 = FrameStore()
        fault2 = FaultSpec(mode=fault.mode, rate=fault.rate, seed=fault.seed,
                           mutation=fault.mutation, sites=list(fault.sites))
        d2 = DutBackend(img, store2, cfg.gpr_layout, fault=fault2)
        while not g2.state.halted:
            snap = g2.run_to_strobe(k)
            d2.run_to_strobe(k)
            payload = readback(store2, ReadbackRequest(cfg.gpr_layout.start,
                                                       cfg.gpr_layout.n_frames))
            if extract_gprs(payload, cfg.gpr_layout, store2.geometry) != snap.regs:
                expected += 1
                d2.resync_from(g2.state)

        report = drive_session(golden, dut, arb, cfg)
        assert report.checkpoints == expected


def test_checkpoint_ids_dense_and_gapless():
    rng = random.Random(31)
    words = rand_alu_program(rng, 40)
    img = _image(words)
    fault = FaultSpec(mode=FaultMode.STATIC, mutation=Mutation.WRONG_RD_RESULT,
                      rate=0.2, seed=0,
                      sites=[(s, "x") for s in (5, 15, 25)])
    cfg, _store, golden, dut, arb = _session_bed(img, k=1, resync=True, fault=fault)
    ids = []
    drive_session(golden, dut, arb, cfg,
                  on_checkpoint=lambda ctx: ids.append(ctx.checkpoint.checkpoint_id))
    assert ids == list(range(len(ids)))
    assert len(ids) >= 3


def test_interleaved_and_threaded_equivalent():
    rng = random.Random(606)
    words = rand_program_with_protected_site(rng, 50, 20)
    img = _image(words)

    def run(schedule):
        fault = FaultSpec(mode=FaultMode.STATIC, mutation=Mutation.WRONG_RD_RESULT,
                          rate=0.05, seed=0, sites=[(20, "x")])
        cfg, _store, golden, dut, arb = _session_bed(img, k=3, resync=True,
                                                     fault=fault)
        blobs = []
        report = drive_session(golden, dut, arb, cfg, schedule=schedule,
                               on_checkpoint=lambda ctx:
                               blobs.append(serialize_checkpoint(ctx.checkpoint)))
        return blobs, report.retired, report.strobes, report.checkpoints

    a = run("interleaved")
    b = run("threaded")
    assert a == b
    assert a[3] == 1
