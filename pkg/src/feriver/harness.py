"""Five-stage workflow orchestration behind the command line.

Stages: (1) configuration, (2) workload insertion and fault injection,
(3) lock-step parallel execution, (4) strobe checking, (5) checkpoint
serialization and waveform reconstruction. ``run_verify`` executes stages
2-5 for one configuration and writes report.json plus one
checkpoint_<id>.json / checkpoint_<id>.vcd pair per mismatch;
``run_bench`` sweeps (workload, error_rate) cells with resync on and writes
one CSV row per cell, reconstructing windows in memory to account their
cost without flooding the disk.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from pathlib import Path

from .arbiter import Arbiter, SessionReport, StrobeConfig, drive_session
from .backends import (
    DutBackend,
    FaultMode,
    FaultSpec,
    GoldenBackend,
    Mutation,
    inject_static_faults,
)
from .checkpoint import serialize_checkpoint
from .errors import FeriverError, UncalibratedModel
from .pcap import FrameStore, Geometry, GprLayout, far_decode
from .replay import render_window
from .workloads import resolve_workload

DEFAULT_FAR = 0x0080_0000     # block-type 001 (the register-file block RAM)

BENCH_HEADER = ("workload,error_rate,retired,checkpoints,throughput_ips,"
                "t_parallel,t_readback,t_compare,t_reconstruct,status")

_MUTATIONS = {"bitflip": Mutation.INSTR_BITFLIP, "wrongrd": Mutation.WRONG_RD_RESULT}
_FAULT_MODES = {"static": FaultMode.STATIC, "bernoulli": FaultMode.BERNOULLI}


@dataclass
class RunConfig:
    workload: str = "builtin:qsort"
    strobe_counter: int = 1
    error_rate: float = 0.0
    seed: int = 1
    mutation: str = "wrongrd"
    fault_mode: str = "static"
    resync: bool = False
    vcd_window: int = 0            # 0 -> 2 x strobe_counter
    far: int = DEFAULT_FAR
    frames: int = 1
    out: str = "feriver-out"
    schedule: str = "interleaved"

    def __post_init__(self):
        if self.mutation not in _MUTATIONS:
            raise ValueError(f"mutation must be one of {sorted(_MUTATIONS)}")
        if self.fault_mode not in _FAULT_MODES:
            raise ValueError(f"fault_mode must be one of {sorted(_FAULT_MODES)}")
        if not 0.0 <= self.error_rate <= 1.0:
            raise ValueError("error_rate must be in [0, 1]")

    @property
    def window(self) -> int:
        return self.vcd_window if self.vcd_window > 0 else 2 * self.strobe_counter

    def out_dir(self) -> Path:
        return Path(os.environ.get("FERIVER_OUT", self.out))


_BOOL_KEYS = {"resync"}
_INT_KEYS = {"strobe_counter", "seed", "vcd_window", "frames"}
_FLOAT_KEYS = {"error_rate"}
_HEX_KEYS = {"far"}
_STR_KEYS = {"workload", "mutation", "fault_mode", "out", "schedule"}


def parse_config_file(path) -> dict:
    """Flat key=value defaults; '#' starts a comment; keys match RunConfig."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FeriverError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key in _BOOL_KEYS:
            if val.lower() not in ("0", "1", "true", "false", "on", "off"):
                raise FeriverError(f"{path}:{lineno}: bad boolean {val!r}")
            values[key] = val.lower() in ("1", "true", "on")
        elif key in _INT_KEYS:
            values[key] = int(val, 0)
        elif key in _FLOAT_KEYS:
            values[key] = float(val)
        elif key in _HEX_KEYS:
            values[key] = int(val, 16)
        elif key in _STR_KEYS:
            values[key] = val
        else:
            raise FeriverError(f"{path}:{lineno}: unknown key {key!r}")
    return values


def _strobe_config(cfg: RunConfig) -> StrobeConfig:
    layout = GprLayout(start=far_decode(cfg.far), n_frames=cfg.frames)
    return StrobeConfig(strobe_counter=cfg.strobe_counter, gpr_layout=layout,
                        readback_start=layout.start, n_frames=cfg.frames,
                        resync=cfg.resync)


def _prepare(cfg: RunConfig):
    """Stages 1-2: resolve the workload, inject faults, wire the testbed."""
    name, image = resolve_workload(cfg.workload)
    mutation = _MUTATIONS[cfg.mutation]
    if cfg.error_rate > 0.0 and cfg.fault_mode == "static":
        dut_image, fault = inject_static_faults(image, cfg.error_rate, cfg.seed, mutation)
    elif cfg.error_rate > 0.0:
        dut_image = image
        fault = FaultSpec(mode=FaultMode.BERNOULLI, rate=cfg.error_rate,
                          seed=cfg.seed, mutation=mutation)
    else:
        dut_image = image
        fault = FaultSpec.none()
    scfg = _strobe_config(cfg)
    store = FrameStore(geometry=Geometry())
    golden = GoldenBackend(image)
    dut = DutBackend(dut_image, store, scfg.gpr_layout, fault=fault)
    arb = Arbiter(store, scfg, golden=golden, dut=dut)
    return name, scfg, golden, dut, arb


class StageFailure(FeriverError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage}: {cause}")
        self.stage = stage
        self.cause = cause


def run_verify(cfg: RunConfig, *, quiet: bool = False) -> tuple:
    """Stages 2-5 for one config. Returns (exit_status, SessionReport|None)."""
    try:
        name, scfg, golden, dut, arb = _prepare(cfg)
    except Exception as exc:
        raise StageFailure("2 (workload insertion / configuration)", exc) from exc

    out = cfg.out_dir()
    out.mkdir(parents=True, exist_ok=True)

    def emit(ctx):
        cp = ctx.checkpoint
        (out / f"checkpoint_{cp.checkpoint_id}.json").write_text(serialize_checkpoint(cp))
        (out / f"checkpoint_{cp.checkpoint_id}.vcd").write_text(
            render_window(ctx, cfg.window))

    try:
        report = drive_session(golden, dut, arb, scfg, workload_name=name,
                               on_checkpoint=emit, schedule=cfg.schedule,
                               retain_window=cfg.window)
    except StageFailure:
        raise
    except FeriverError as exc:
        raise StageFailure("3/4 (parallel execution / checking)", exc) from exc

    (out / "report.json").write_text(json.dumps(report.to_doc(), indent=2) + "\n")
    if not quiet:
        print(f"{name}: retired={report.retired} strobes={report.strobes} "
              f"checkpoints={report.checkpoints} "
              f"throughput={report.throughput_ips / 1e6:.3f} MIPS")
    return (0 if report.checkpoints == 0 else 1), report


def run_bench(cfg: RunConfig, workloads, rates) -> tuple:
    """One session per (workload, rate) cell, resync on. Returns (exit, csv, reports)."""
    rows = [BENCH_HEADER]
    reports = {}
    failures = 0
    cells = 0
    for spec in workloads:
        cell_name = (spec.split(":", 1)[1] if spec.startswith("builtin:")
                     else Path(spec).stem).replace(",", ";")
        for rate in rates:
            cells += 1
            cell = replace(cfg, workload=spec, error_rate=rate, resync=True)
            try:
                name, scfg, golden, dut, arb = _prepare(cell)

                def render_only(ctx):
                    render_window(ctx, cell.window)

                report = drive_session(golden, dut, arb, scfg, workload_name=name,
                                       on_checkpoint=render_only,
                                       schedule=cell.schedule,
                                       retain_window=cell.window)
                reports[(name, rate)] = report
                t = report.times
                rows.append(
                    f"{name},{rate:g},{report.retired},{report.checkpoints},"
                    f"{report.throughput_ips:.3f},{t['parallel_run']:.6f},"
                    f"{t['readback']:.6f},{t['compare']:.6f},"
                    f"{t['reconstruct']:.6f},ok")
            except Exception as exc:
                failures += 1
                label = type(exc).__name__
                rows.append(f"{cell_name},{rate:g},0,0,0,0,0,0,0,error:{label}")
    exit_status = 1 if failures == cells else 0
    return exit_status, "\n".join(rows) + "\n", reports


@dataclass
class TimeModel:
    """First-order session-time model: one unit cost per phase driver."""

    parallel_unit: float | None = None      # seconds per retired instruction
    check_unit: float | None = None         # seconds per strobe
    reconstruct_unit: float | None = None   # seconds per checkpoint

    @classmethod
    def calibrate(cls, baseline: SessionReport, reconstruct_time: float) -> "TimeModel":
        """Units from a rate-0 session plus one timed reconstruction."""
        if baseline.retired == 0 or baseline.strobes == 0:
            raise UncalibratedModel("baseline session retired nothing")
        t = baseline.times
        return cls(
            parallel_unit=t["parallel_run"] / baseline.retired,
            check_unit=(t["readback"] + t["compare"]) / baseline.strobes,
            reconstruct_unit=reconstruct_time)

    def predict(self, retired: int, strobes: int, checkpoints: int) -> float:
        if None in (self.parallel_unit, self.check_unit, self.reconstruct_unit):
            raise UncalibratedModel("calibrate() before predict()")
        return (self.parallel_unit * retired + self.check_unit * strobes
                + self.reconstruct_unit * checkpoints)


def predict_time(model: TimeModel, retired: int, strobes: int, checkpoints: int) -> float:
    return model.predict(retired, strobes, checkpoints)


def measured_session_time(report: SessionReport) -> float:
    """The wall time the model predicts: the sum of the accounted phases."""
    t = report.times
    return t["parallel_run"] + t["readback"] + t["compare"] + t["reconstruct"]
