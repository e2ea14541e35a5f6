# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled execution kernel; contract identical to feriver._pykernel."""

from libc.stdint cimport int32_t, int64_t, uint8_t, uint32_t, uint64_t

M32 = 0xFFFFFFFF

cdef enum:
    C_OK = 0
    C_HALT = 1
    C_ILLEGAL = 2
    C_MISALIGNED_ACCESS = 3
    C_MISALIGNED_JUMP = 4
    C_OUT_OF_IMAGE = 5

STOP_OK = C_OK
STOP_HALT = C_HALT
STOP_ILLEGAL = C_ILLEGAL
STOP_MISALIGNED_ACCESS = C_MISALIGNED_ACCESS
STOP_MISALIGNED_JUMP = C_MISALIGNED_JUMP
STOP_OUT_OF_IMAGE = C_OUT_OF_IMAGE

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t BITKEY = 0xD1B54A32D192ED03ULL


cdef inline uint64_t c_mix64(uint64_t x) nogil:
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL
    return x ^ (x >> 31)


def mix64(x):
    return c_mix64(<uint64_t> x)


def coin(seed, ordinal):
    return c_mix64(<uint64_t> seed + <uint64_t> ordinal * GOLDEN)


cdef struct StepOut:
    uint32_t next_pc
    int stop
    uint32_t detail
    int rd_written


cdef inline StepOut c_exec(uint32_t[::1] regs, uint8_t[::1] mem, uint64_t base,
                           uint32_t pc, uint32_t word, bint plus_one) nogil:
    cdef StepOut out
    cdef Py_ssize_t size = mem.shape[0]
    cdef uint32_t opcode = word & 0x7F
    cdef uint32_t rd = (word >> 7) & 0x1F
    cdef uint32_t f3 = (word >> 12) & 0x7
    cdef uint32_t rs1 = (word >> 15) & 0x1F
    cdef uint32_t rs2 = (word >> 20) & 0x1F
    cdef uint32_t f7 = word >> 25
    cdef uint32_t a = regs[rs1]
    cdef uint32_t b = regs[rs2]
    cdef uint32_t nxt = pc + 4
    cdef uint64_t wb = 0
    cdef bint has_wb = False
    cdef bint halt = False
    cdef int32_t imm
    cdef uint32_t addr, t, uimm
    cdef int64_t off
    cdef int32_t sa, sb

    out.stop = C_OK
    out.detail = 0
    out.rd_written = 0

    if opcode == 0x13:  # OP-IMM
        imm = (<int32_t> word) >> 20
        if f3 == 0:
            wb = a + <uint32_t> imm; has_wb = True
        elif f3 == 1:
            if f7 != 0:
                out.stop = C_ILLEGAL; out.detail = word; out.next_pc = pc; return out
            wb = a << rs2; has_wb = True
        elif f3 == 5:
            if f7 == 0:
                wb = a >> rs2; has_wb = True
            elif f7 == 0x20:
                wb = <uint32_t> ((<int32_t> a) >> rs2); has_wb = True
            else:
                out.stop = C_ILLEGAL; out.detail = word; out.next_pc = pc; return out
        elif f3 == 2:
            wb = 1 if (<int32_t> a) < imm else 0; has_wb = True
        elif f3 == 3:
            wb = 1 if a < <uint32_t> imm else 0; has_wb = True
        elif f3 == 4:
            wb = a ^ <uint32_t> imm; has_wb = True
        elif f3 == 6:
            wb = a | <uint32_t> imm; has_wb = True
        else:
            wb = a & <uint32_t> imm; has_wb = True
    elif opcode == 0x33:  # OP
        if f7 == 0:
            if f3 == 0:
                wb = a + b
            elif f3 == 1:
                wb = a << (b & 31)
            elif f3 == 2:
                wb = 1 if (<int32_t> a) < (<int32_t> b) else 0
            elif f3 == 3:
                wb = 1 if a < b else 0
            elif f3 == 4:
                wb = a ^ b
            elif f3 == 5:
                wb = a >> (b & 31)
            elif f3 == 6:
                wb = a | b
            else:
                wb = a & b
            has_wb = True
        elif f7 == 0x20 and f3 == 0:
            wb = a - b; has_wb = True
        elif f7 == 0x20 and f3 == 5:
            wb = <uint32_t> ((<int32_t> a) >> (b & 31)); has_wb = True
        else:
            out.stop = C_ILLEGAL; out.detail = word; out.next_pc = pc; return out
    elif opcode == 0x03:  # LOAD
        imm = (<int32_t> word) >> 20
        addr = a + <uint32_t> imm
        off = <int64_t> addr - <int64_t> base
        if f3 == 2:
            if addr & 3:
                out.stop = C_MISALIGNED_ACCESS; out.detail = addr; out.next_pc = pc; return out
            if off < 0 or off + 4 > size:
                out.stop = C_OUT_OF_IMAGE; out.detail = addr; out.next_pc = pc; return out
            wb = mem[off] | (<uint32_t> mem[off + 1] << 8) | (<uint32_t> mem[off + 2] << 16) | (<uint32_t> mem[off + 3] << 24)
            has_wb = True
        elif f3 == 0 or f3 == 4:
            if off < 0 or off >= size:
                out.stop = C_OUT_OF_IMAGE; out.detail = addr; out.next_pc = pc; return out
            wb = mem[off]
            if f3 == 0 and wb & 0x80:
                wb = wb | 0xFFFFFF00UL
            has_wb = True
        elif f3 == 1 or f3 == 5:
            if addr & 1:
                out.stop = C_MISALIGNED_ACCESS; out.detail = addr; out.next_pc = pc; return out
            if off < 0 or off + 2 > size:
                out.stop = C_OUT_OF_IMAGE; out.detail = addr; out.next_pc = pc; return out
            wb = mem[off] | (<uint32_t> mem[off + 1] << 8)
            if f3 == 1 and wb & 0x8000:
                wb = wb | 0xFFFF0000UL
            has_wb = True
        else:
            out.stop = C_ILLEGAL; out.detail = word; out.next_pc = pc; return out
    elif opcode == 0x23:  # STORE
        imm = <int32_t> (((word >> 25) << 5) | ((word >> 7) & 0x1F))
        if imm & 0x800:
            imm -= 0x1000
        addr = a + <uint32_t> imm
        off = <int64_t> addr - <int64_t> base
        if f3 == 2:
            if addr & 3:
                out.stop = C_MISALIGNED_ACCESS; out.detail = addr; out.next_pc = pc; return out
            if off < 0 or off + 4 > size:
                out.stop = C_OUT_OF_IMAGE; out.detail = addr; out.next_pc = pc; return out
            mem[off] = b & 0xFF
            mem[off + 1] = (b >> 8) & 0xFF
            mem[off + 2] = (b >> 16) & 0xFF
            mem[off + 3] = (b >> 24) & 0xFF
        elif f3 == 0:
            if off < 0 or off >= size:
                out.stop = C_OUT_OF_IMAGE; out.detail = addr; out.next_pc = pc; return out
            mem[off] = b & 0xFF
        elif f3 == 1:
            if addr & 1:
                out.stop = C_MISALIGNED_ACCESS; out.detail = addr; out.next_pc = pc; return out
            if off < 0 or off + 2 > size:
                out.stop = C_OUT_OF_IMAGE; out.detail = addr; out.next_pc = pc; return out
            mem[off] = b & 0xFF
            mem[off + 1] = (b >> 8) & 0xFF
        else:
            out.stop = C_ILLEGAL; out.detail = word; out.next_pc = pc; return out
    elif opcode == 0x63:  # BRANCH
        if f3 == 2 or f3 == 3:
            out.stop = C_ILLEGAL; out.detail = word; out.next_pc = pc; return out
        sa = <int32_t> a
        sb = <int32_t> b
        if ((f3 == 0 and a == b) or (f3 == 1 and a != b)
                or (f3 == 4 and sa < sb) or (f3 == 5 and sa >= sb)
                or (f3 == 6 and a < b) or (f3 == 7 and a >= b)):
            uimm = (((word >> 31) & 1) << 12) | (((word >> 7) & 1) << 11) \
                | (((word >> 25) & 0x3F) << 5) | (((word >> 8) & 0xF) << 1)
            if uimm & 0x1000:
                uimm |= 0xFFFFE000UL
            t = pc + uimm
            if t & 3:
                out.stop = C_MISALIGNED_JUMP; out.detail = t; out.next_pc = pc; return out
            nxt = t
    elif opcode == 0x37:  # LUI
        wb = word & 0xFFFFF000UL; has_wb = True
    elif opcode == 0x17:  # AUIPC
        wb = pc + (word & 0xFFFFF000UL); has_wb = True
    elif opcode == 0x6F:  # JAL
        uimm = (((word >> 31) & 1) << 20) | (((word >> 12) & 0xFF) << 12) \
            | (((word >> 20) & 1) << 11) | (((word >> 21) & 0x3FF) << 1)
        if uimm & 0x100000:
            uimm |= 0xFFE00000UL
        t = pc + uimm
        if t & 3:
            out.stop = C_MISALIGNED_JUMP; out.detail = t; out.next_pc = pc; return out
        wb = pc + 4; has_wb = True
        nxt = t
    elif opcode == 0x67:  # JALR
        if f3 != 0:
            out.stop = C_ILLEGAL; out.detail = word; out.next_pc = pc; return out
        imm = (<int32_t> word) >> 20
        t = (a + <uint32_t> imm) & 0xFFFFFFFEUL
        if t & 3:
            out.stop = C_MISALIGNED_JUMP; out.detail = t; out.next_pc = pc; return out
        wb = pc + 4; has_wb = True
        nxt = t
    elif opcode == 0x0F:  # FENCE
        if f3 != 0:
            out.stop = C_ILLEGAL; out.detail = word; out.next_pc = pc; return out
    elif opcode == 0x73:  # SYSTEM
        if f3 == 0 and rd == 0 and rs1 == 0 and (word >> 20) <= 1:
            halt = True
        else:
            out.stop = C_ILLEGAL; out.detail = word; out.next_pc = pc; return out
    else:
        out.stop = C_ILLEGAL; out.detail = word; out.next_pc = pc; return out

    if has_wb and rd != 0:
        if plus_one:
            wb += 1
        regs[rd] = <uint32_t> wb
        out.rd_written = <int> rd
    out.next_pc = nxt
    if halt:
        out.stop = C_HALT
    return out


def exec_word(regs, mem, base, pc, word, plus_one=False):
    cdef uint32_t[::1] r = regs
    cdef uint8_t[::1] m = mem
    cdef StepOut o = c_exec(r, m, <uint64_t> base, <uint32_t> pc, <uint32_t> word, plus_one)
    return o.next_pc, o.stop, o.detail, o.rd_written


def run_block(regs, mem, base, pc, retired, max_instrs,
              fault_mode, threshold, seed, mutation,
              wrongrd_mask, span, events):
    cdef uint32_t[::1] r = regs
    cdef uint8_t[::1] m = mem
    cdef const uint8_t[::1] mask = wrongrd_mask
    cdef uint32_t[::1] sp = span
    cdef uint64_t c_base = base
    cdef uint32_t c_pc = <uint32_t> pc
    cdef uint64_t c_retired = retired
    cdef int64_t budget = max_instrs
    cdef int c_fault_mode = fault_mode
    cdef uint64_t c_threshold = threshold
    cdef uint64_t c_seed = seed
    cdef int c_mutation = mutation
    cdef Py_ssize_t n_mask = mask.shape[0]
    cdef bint mirror = sp.shape[0] > 0
    cdef Py_ssize_t size = m.shape[0]

    cdef uint32_t last_pc = 0
    cdef uint32_t last_raw = 0
    cdef int64_t count = 0
    cdef int stop = C_OK
    cdef uint32_t detail = 0
    cdef uint32_t word
    cdef int64_t off, widx
    cdef bint plus_one
    cdef uint64_t u, ordinal
    cdef int bit
    cdef StepOut o

    while count < budget:
        off = <int64_t> c_pc - <int64_t> c_base
        if (c_pc & 3) or off < 0 or off + 4 > size:
            stop = C_OUT_OF_IMAGE
            detail = c_pc
            break
        word = m[off] | (<uint32_t> m[off + 1] << 8) | (<uint32_t> m[off + 2] << 16) | (<uint32_t> m[off + 3] << 24)

        widx = off >> 2
        plus_one = widx < n_mask and mask[widx] != 0
        if c_fault_mode == 1:
            ordinal = c_retired + 1
            u = c_mix64(c_seed + ordinal * GOLDEN)
            if (u >> 11) < c_threshold:
                if c_mutation == 0:
                    bit = <int> (c_mix64(u ^ BITKEY) & 31)
                    word = word ^ (<uint32_t> 1 << bit)
                    if events is not None:
                        events.append((ordinal, 0, bit))
                else:
                    plus_one = True
                    if events is not None:
                        events.append((ordinal, 1, 0))

        o = c_exec(r, m, c_base, c_pc, word, plus_one)
        if o.stop >= C_ILLEGAL:
            stop = o.stop
            detail = o.detail
            break
        if o.rd_written and mirror:
            sp[o.rd_written] = r[o.rd_written]
        c_retired += 1
        count += 1
        last_pc = c_pc
        last_raw = word
        c_pc = o.next_pc
        if o.stop == C_HALT:
            stop = C_HALT
            break

    return c_pc, c_retired, last_pc, last_raw, count, stop, detail
