"""Software model of the configuration-frame readback channel.

Frame addresses are 26-bit packed values segmented as:

    block_type  [25:23]   valid types; 011 never appears in a stored frame
    top_bottom  [22]      0 = top-half rows, 1 = bottom-half rows
    row         [21:17]
    major       [16:7]    column of a resource type
    minor       [6:0]     frame within a major column

A frame is a fixed run of 32-bit words (101 on the modeled device, so one
frame is 404 bytes). Readback transactions stream whole frames in
address-increment order and append one padding frame; a single transaction
carries at most 9 data frames (10 frames = 4040 bytes, under the 4 KiB
transfer ceiling). Register files monitored through this channel sit in a
span of consecutive frames bracketed by a read-only tracing marker
(0xdeadbeef by default) in the first word of the first frame and the last
word of the last frame.
"""

from __future__ import annotations

import struct
import threading
from array import array
from dataclasses import dataclass, field

from .errors import (
    EndOfRow,
    FieldOutOfRange,
    InvalidBlockType,
    LayoutOverflow,
    LengthMismatch,
    MarkerAmbiguous,
    MarkerCheckFailed,
    MarkerNotFound,
    MissingFrame,
    ReservedBitsSet,
    TooManyFrames,
)

MARKER = 0xDEADBEEF
MAX_DATA_FRAMES = 9

# block-type mapping is device data; keep it a table, not scattered literals
BLOCK_TYPES = {"clk": 0b000, "bram": 0b001, "clb": 0b010}
RESERVED_BLOCK_TYPE = 0b011

_FIELD_BITS = (("block_type", 3), ("top_bottom", 1), ("row", 5),
               ("major", 10), ("minor", 7))


@dataclass(frozen=True, order=True)
class FrameAddress:
    block_type: int = 0
    top_bottom: int = 0
    row: int = 0
    major: int = 0
    minor: int = 0

    def __post_init__(self):
        for name, bits in _FIELD_BITS:
            v = getattr(self, name)
            if not 0 <= v < (1 << bits):
                raise FieldOutOfRange(f"{name}={v} does not fit in {bits} bits")


def far_encode(fa: FrameAddress) -> int:
    """Pack into bits [25:0]; bits [31:26] are zero."""
    return ((fa.block_type << 23) | (fa.top_bottom << 22) | (fa.row << 17)
            | (fa.major << 7) | fa.minor)


def far_decode(word: int, *, stored_frame: bool = False) -> FrameAddress:
    """Inverse of far_encode; ``stored_frame`` rejects the reserved block type."""
    if word & ~0x03FF_FFFF:
        raise ReservedBitsSet(f"bits [31:26] set in FAR word 0x{word & 0xFFFFFFFF:08x}")
    fa = FrameAddress(block_type=(word >> 23) & 0x7, top_bottom=(word >> 22) & 0x1,
                      row=(word >> 17) & 0x1F, major=(word >> 7) & 0x3FF,
                      minor=word & 0x7F)
    if stored_frame and fa.block_type == RESERVED_BLOCK_TYPE:
        raise InvalidBlockType(f"block type 011 in stored frame address 0x{word:08x}")
    return fa


@dataclass(frozen=True)
class Geometry:
    frame_words: int = 101
    rows: int = 2
    majors_per_row: int = 16
    minors_per_major: int = 36

    def contains(self, fa: FrameAddress) -> bool:
        return (fa.block_type != RESERVED_BLOCK_TYPE and fa.block_type <= 0b010
                and fa.row < self.rows and fa.major < self.majors_per_row
                and fa.minor < self.minors_per_major)


def far_increment(fa: FrameAddress, geometry: Geometry) -> FrameAddress:
    """Next frame address within the same row; EndOfRow at the row's last frame."""
    minor = fa.minor + 1
    major = fa.major
    if minor >= geometry.minors_per_major:
        minor = 0
        major += 1
        if major >= geometry.majors_per_row:
            raise EndOfRow(f"increment past last frame of row {fa.row}")
    return FrameAddress(fa.block_type, fa.top_bottom, fa.row, major, minor)


@dataclass(frozen=True)
class ReadbackRequest:
    start: FrameAddress
    n_data_frames: int


@dataclass
class FrameStore:
    """Frame-addressed configuration memory plus the current FAR.

    Single writer (the DUT backend) and single reader (the arbiter); the
    lock enforces that readback never overlaps a running DUT window.
    Frame payloads are any mutable uint32 sequences of frame_words entries,
    which lets a register span alias one flat buffer for cheap mirroring.
    """

    geometry: Geometry = field(default_factory=Geometry)
    frames: dict = field(default_factory=dict)   # int FAR word -> word sequence
    far: FrameAddress = field(default_factory=FrameAddress)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def put(self, fa: FrameAddress, words) -> None:
        if fa.block_type == RESERVED_BLOCK_TYPE:
            raise InvalidBlockType("block type 011 cannot be stored")
        if not self.geometry.contains(fa):
            raise FieldOutOfRange(f"{fa} outside geometry {self.geometry}")
        if len(words) != self.geometry.frame_words:
            raise LengthMismatch(
                f"frame must hold {self.geometry.frame_words} words, got {len(words)}")
        self.frames[far_encode(fa)] = words

    def get(self, fa: FrameAddress):
        key = far_encode(fa)
        if key not in self.frames:
            raise MissingFrame(f"no frame at 0x{key:08x}")
        return self.frames[key]


def readback(store: FrameStore, req: ReadbackRequest) -> array:
    """Stream ``n_data_frames`` frames from req.start plus one padding frame.

    Pure observation: returns (n+1) * frame_words words as array('I') and
    only moves store.far. Data frames appear in address-increment order,
    the padding frame is all zeros.
    """
    n = req.n_data_frames
    if n > MAX_DATA_FRAMES:
        raise TooManyFrames(
            f"{n} data frames requested; a single transaction carries at most "
            f"{MAX_DATA_FRAMES} data frames + 1 padding frame")
    if n < 1:
        raise ValueError("n_data_frames must be >= 1")
    fw = store.geometry.frame_words
    with store.lock:
        store.far = req.start
        chunks = []
        for i in range(n):
            frame = store.get(store.far)
            chunks.append(memoryview(frame).tobytes())
            if i + 1 < n:
                store.far = far_increment(store.far, store.geometry)
            else:
                # FAR lands on the address after the last data frame; at a row
                # end it stays on the last frame (increment stops there).
                try:
                    store.far = far_increment(store.far, store.geometry)
                except EndOfRow:
                    pass
        chunks.append(bytes(4 * fw))
    return array("I", b"".join(chunks))


def locate_marker(store: FrameStore, marker: int = MARKER):
    """Find the bracket frames holding ``marker`` in their marker slots.

    Scans frames in address order; the marker must sit in the first word of
    exactly one frame and the last word of exactly one frame.
    """
    fw = store.geometry.frame_words
    first_hits = []
    last_hits = []
    for key in sorted(store.frames):
        words = store.frames[key]
        if words[0] == marker:
            first_hits.append(key)
        if words[fw - 1] == marker:
            last_hits.append(key)
    if not first_hits and not last_hits:
        raise MarkerNotFound(f"marker 0x{marker:08x} not present in any marker slot")
    if len(first_hits) != 1 or len(last_hits) != 1 or first_hits[0] > last_hits[0]:
        raise MarkerAmbiguous(
            f"marker 0x{marker:08x} found in {len(first_hits)} first-slots "
            f"and {len(last_hits)} last-slots")
    return far_decode(first_hits[0]), far_decode(last_hits[0])


@dataclass(frozen=True)
class GprLayout:
    """Placement of the 31 monitored registers inside a frame span.

    x1..x31 occupy span word positions 1..31, immediately after the leading
    marker; the trailing marker is the last word of the last frame. Pointing
    the monitor at different state only means building a new layout - no
    backend code refers to any concrete address.
    """

    start: FrameAddress
    n_frames: int = 1
    marker: int = MARKER

    def check(self, geometry: Geometry) -> None:
        if self.n_frames < 1:
            raise LayoutOverflow("span needs at least 1 frame")
        if self.n_frames > MAX_DATA_FRAMES:
            raise LayoutOverflow(
                f"span of {self.n_frames} frames exceeds the "
                f"{MAX_DATA_FRAMES}-data-frame transaction cap")
        if self.n_frames * geometry.frame_words < 33:
            raise LayoutOverflow("span too small for 31 registers + 2 markers")
        fa = self.start
        for _ in range(self.n_frames - 1):
            fa = far_increment(fa, geometry)  # EndOfRow propagates

    def span_addresses(self, geometry: Geometry):
        out = [self.start]
        for _ in range(self.n_frames - 1):
            out.append(far_increment(out[-1], geometry))
        return out

    def install(self, store: FrameStore) -> array:
        """Seed the span frames (zeroed, markers set) backed by one flat buffer.

        Returns the flat buffer; each span frame in the store is a writable
        view into it, so span[1..31] updates are visible to readback.
        """
        self.check(store.geometry)
        fw = store.geometry.frame_words
        buf = array("I", bytes(4 * fw * self.n_frames))
        buf[0] = self.marker
        buf[self.n_frames * fw - 1] = self.marker
        mv = memoryview(buf)
        for i, fa in enumerate(self.span_addresses(store.geometry)):
            store.put(fa, mv[i * fw:(i + 1) * fw])
        return buf


def mirror_gprs(store: FrameStore, regs, layout: GprLayout) -> None:
    """Write x1..x31 between the markers; the markers themselves stay put."""
    if len(regs) != 31:
        raise LengthMismatch(f"expected 31 registers, got {len(regs)}")
    layout.check(store.geometry)
    fw = store.geometry.frame_words
    addrs = layout.span_addresses(store.geometry)
    with store.lock:
        installed = all(far_encode(fa) in store.frames for fa in addrs)
        if not installed:
            buf = layout.install(store)
            buf[1:32] = array("I", regs)
            return
        for i, value in enumerate(regs):
            pos = 1 + i
            frame = store.frames[far_encode(addrs[pos // fw])]
            frame[pos % fw] = value & 0xFFFFFFFF


def extract_gprs(words, layout: GprLayout, geometry: Geometry | None = None) -> tuple:
    """Inverse of mirror_gprs over a readback payload for the layout's span."""
    fw = (geometry or Geometry()).frame_words
    expected = (layout.n_frames + 1) * fw
    if len(words) != expected:
        raise LengthMismatch(f"payload is {len(words)} words, expected {expected}")
    if words[0] != layout.marker or words[layout.n_frames * fw - 1] != layout.marker:
        raise MarkerCheckFailed("tracing markers missing from bracket positions")
    return tuple(words[1:32])


def write_frame_dump(path, words) -> None:
    """Binary little-endian 32-bit dump in payload order (test fixture format)."""
    with open(path, "wb") as fh:
        fh.write(struct.pack(f"<{len(words)}I", *words))


def read_frame_dump(path) -> array:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) % 4:
        raise LengthMismatch("frame dump is not a whole number of words")
    return array("I", data)
