"""Minimal deterministic VCD writer.

Emits plain four-state-free dumps: scalar wires as ``0<id>``/``1<id>``,
vectors as ``b<binary> <id>``. No date or tool headers, so identical data
always yields identical bytes.
"""

from __future__ import annotations

_ID_CHARS = "".join(chr(c) for c in range(33, 127))


def _id_code(n: int) -> str:
    out = _ID_CHARS[n % 94]
    n //= 94
    while n:
        n -= 1
        out = _ID_CHARS[n % 94] + out
        n //= 94
    return out


class VcdWriter:
    def __init__(self, timescale: str = "1ns"):
        self.timescale = timescale
        self._vars = []          # (scope_tuple, name, width, id)
        self._widths = {}        # id -> width
        self._values = {}        # id -> int
        self._body = []
        self._began = False
        self._last_time = -1

    def var(self, scope, name: str, width: int) -> str:
        if self._began:
            raise RuntimeError("all variables must be declared before begin()")
        vid = _id_code(len(self._vars))
        self._vars.append((tuple(scope), name, width, vid))
        self._widths[vid] = width
        self._values[vid] = None
        return vid

    def _fmt(self, vid: str, value: int) -> str:
        width = self._widths[vid]
        value &= (1 << width) - 1
        if width == 1:
            return f"{value}{vid}"
        return f"b{value:b} {vid}"

    def begin(self, initial: dict) -> None:
        """Write the header and the $dumpvars block at time 0."""
        if self._began:
            raise RuntimeError("begin() called twice")
        self._began = True
        lines = [f"$timescale {self.timescale} $end"]
        open_scopes = ()
        for scope, name, width, vid in self._vars:
            while open_scopes and open_scopes != scope[:len(open_scopes)]:
                lines.append("$upscope $end")
                open_scopes = open_scopes[:-1]
            while len(open_scopes) < len(scope):
                lines.append(f"$scope module {scope[len(open_scopes)]} $end")
                open_scopes = scope[:len(open_scopes) + 1]
            ref = name if width == 1 else f"{name} [{width - 1}:0]"
            lines.append(f"$var wire {width} {vid} {ref} $end")
        while open_scopes:
            lines.append("$upscope $end")
            open_scopes = open_scopes[:-1]
        lines.append("$enddefinitions $end")
        lines.append("#0")
        lines.append("$dumpvars")
        for _scope, _name, _width, vid in self._vars:
            value = initial.get(vid, 0)
            self._values[vid] = value
            lines.append(self._fmt(vid, value))
        lines.append("$end")
        self._body = lines
        self._last_time = 0

    def step(self, time: int, changes: dict) -> None:
        """Emit value changes at ``time``; unchanged signals are skipped."""
        if not self._began:
            raise RuntimeError("begin() must run before step()")
        if time <= self._last_time:
            raise ValueError(f"timestamps must increase ({time} after {self._last_time})")
        emitted = []
        for vid, value in changes.items():
            if self._values[vid] != value:
                self._values[vid] = value
                emitted.append(self._fmt(vid, value))
        if emitted:
            self._body.append(f"#{time}")
            self._body.extend(emitted)
            self._last_time = time

    def text(self) -> str:
        return "\n".join(self._body) + "\n"
