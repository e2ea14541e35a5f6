"""Pure-Python execution kernel (fallback when the compiled core is absent).

Contract shared with feriver._kernel:

``exec_word(regs, mem, base, pc, word, plus_one)``
    Apply one already-fetched instruction word at ``pc``. Returns
    ``(next_pc, stop, detail, rd_written)``; register/memory effects are
    applied unless ``stop`` signals a diagnostic. ``plus_one`` perturbs the
    destination-register result by +1 (the WrongRdResult fault model).

``run_block(...)``
    Fetch-decode-execute up to ``max_instrs`` instructions, applying the
    runtime fault model and mirroring register writebacks into ``span``.

Stop codes: 0 ran, 1 halted (ECALL/EBREAK retired), 2 illegal instruction,
3 misaligned access, 4 misaligned jump, 5 out-of-image access.
"""

M32 = 0xFFFFFFFF
M64 = 0xFFFFFFFFFFFFFFFF

STOP_OK = 0
STOP_HALT = 1
STOP_ILLEGAL = 2
STOP_MISALIGNED_ACCESS = 3
STOP_MISALIGNED_JUMP = 4
STOP_OUT_OF_IMAGE = 5

_GOLDEN = 0x9E3779B97F4A7C15
_BITKEY = 0xD1B54A32D192ED03


def mix64(x):
    x &= M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & M64
    return x ^ (x >> 31)


def coin(seed, ordinal):
    """Per-retirement fault draw; independent of block partitioning."""
    return mix64((seed + ordinal * _GOLDEN) & M64)


def exec_word(regs, mem, base, pc, word, plus_one=False):
    size = len(mem)
    opcode = word & 0x7F
    rd = (word >> 7) & 0x1F
    f3 = (word >> 12) & 0x7
    rs1 = (word >> 15) & 0x1F
    rs2 = (word >> 20) & 0x1F
    f7 = word >> 25
    a = regs[rs1]
    b = regs[rs2]
    nxt = (pc + 4) & M32
    wb = -1
    halt = False

    if opcode == 0x13:  # OP-IMM
        imm = word >> 20
        if imm & 0x800:
            imm -= 0x1000
        if f3 == 0:
            wb = (a + imm) & M32
        elif f3 == 1:
            if f7 != 0:
                return pc, STOP_ILLEGAL, word, 0
            wb = (a << rs2) & M32
        elif f3 == 5:
            if f7 == 0:
                wb = a >> rs2
            elif f7 == 0x20:
                wb = ((a - ((a & 0x80000000) << 1)) >> rs2) & M32
            else:
                return pc, STOP_ILLEGAL, word, 0
        elif f3 == 2:
            wb = int((a - ((a & 0x80000000) << 1)) < imm)
        elif f3 == 3:
            wb = int(a < (imm & M32))
        elif f3 == 4:
            wb = a ^ (imm & M32)
        elif f3 == 6:
            wb = a | (imm & M32)
        else:
            wb = a & (imm & M32)
    elif opcode == 0x33:  # OP
        if f3 == 0:
            if f7 == 0:
                wb = (a + b) & M32
            elif f7 == 0x20:
                wb = (a - b) & M32
            else:
                return pc, STOP_ILLEGAL, word, 0
        elif f3 == 1:
            if f7 != 0:
                return pc, STOP_ILLEGAL, word, 0
            wb = (a << (b & 31)) & M32
        elif f3 == 2:
            if f7 != 0:
                return pc, STOP_ILLEGAL, word, 0
            wb = int((a - ((a & 0x80000000) << 1)) < (b - ((b & 0x80000000) << 1)))
        elif f3 == 3:
            if f7 != 0:
                return pc, STOP_ILLEGAL, word, 0
            wb = int(a < b)
        elif f3 == 4:
            if f7 != 0:
                return pc, STOP_ILLEGAL, word, 0
            wb = a ^ b
        elif f3 == 5:
            if f7 == 0:
                wb = a >> (b & 31)
            elif f7 == 0x20:
                wb = ((a - ((a & 0x80000000) << 1)) >> (b & 31)) & M32
            else:
                return pc, STOP_ILLEGAL, word, 0
        elif f3 == 6:
            if f7 != 0:
                return pc, STOP_ILLEGAL, word, 0
            wb = a | b
        else:
            if f7 != 0:
                return pc, STOP_ILLEGAL, word, 0
            wb = a & b
    elif opcode == 0x03:  # LOAD
        imm = word >> 20
        if imm & 0x800:
            imm -= 0x1000
        addr = (a + imm) & M32
        off = addr - base
        if f3 == 2:
            if addr & 3:
                return pc, STOP_MISALIGNED_ACCESS, addr, 0
            if off < 0 or off + 4 > size:
                return pc, STOP_OUT_OF_IMAGE, addr, 0
            wb = mem[off] | (mem[off + 1] << 8) | (mem[off + 2] << 16) | (mem[off + 3] << 24)
        elif f3 == 0 or f3 == 4:
            if off < 0 or off >= size:
                return pc, STOP_OUT_OF_IMAGE, addr, 0
            wb = mem[off]
            if f3 == 0 and wb & 0x80:
                wb = (wb - 0x100) & M32
        elif f3 == 1 or f3 == 5:
            if addr & 1:
                return pc, STOP_MISALIGNED_ACCESS, addr, 0
            if off < 0 or off + 2 > size:
                return pc, STOP_OUT_OF_IMAGE, addr, 0
            wb = mem[off] | (mem[off + 1] << 8)
            if f3 == 1 and wb & 0x8000:
                wb = (wb - 0x10000) & M32
        else:
            return pc, STOP_ILLEGAL, word, 0
    elif opcode == 0x23:  # STORE
        imm = (f7 << 5) | rd
        if imm & 0x800:
            imm -= 0x1000
        addr = (a + imm) & M32
        off = addr - base
        if f3 == 2:
            if addr & 3:
                return pc, STOP_MISALIGNED_ACCESS, addr, 0
            if off < 0 or off + 4 > size:
                return pc, STOP_OUT_OF_IMAGE, addr, 0
            mem[off] = b & 0xFF
            mem[off + 1] = (b >> 8) & 0xFF
            mem[off + 2] = (b >> 16) & 0xFF
            mem[off + 3] = (b >> 24) & 0xFF
        elif f3 == 0:
            if off < 0 or off >= size:
                return pc, STOP_OUT_OF_IMAGE, addr, 0
            mem[off] = b & 0xFF
        elif f3 == 1:
            if addr & 1:
                return pc, STOP_MISALIGNED_ACCESS, addr, 0
            if off < 0 or off + 2 > size:
                return pc, STOP_OUT_OF_IMAGE, addr, 0
            mem[off] = b & 0xFF
            mem[off + 1] = (b >> 8) & 0xFF
        else:
            return pc, STOP_ILLEGAL, word, 0
        rd = 0
    elif opcode == 0x63:  # BRANCH
        if f3 == 0:
            taken = a == b
        elif f3 == 1:
            taken = a != b
        elif f3 == 4:
            taken = (a - ((a & 0x80000000) << 1)) < (b - ((b & 0x80000000) << 1))
        elif f3 == 5:
            taken = (a - ((a & 0x80000000) << 1)) >= (b - ((b & 0x80000000) << 1))
        elif f3 == 6:
            taken = a < b
        elif f3 == 7:
            taken = a >= b
        else:
            return pc, STOP_ILLEGAL, word, 0
        if taken:
            imm = (((word >> 31) & 1) << 12) | (((word >> 7) & 1) << 11) \
                | (((word >> 25) & 0x3F) << 5) | (((word >> 8) & 0xF) << 1)
            if imm & 0x1000:
                imm -= 0x2000
            t = (pc + imm) & M32
            if t & 3:
                return pc, STOP_MISALIGNED_JUMP, t, 0
            nxt = t
        rd = 0
    elif opcode == 0x37:  # LUI
        wb = word & 0xFFFFF000
    elif opcode == 0x17:  # AUIPC
        wb = (pc + (word & 0xFFFFF000)) & M32
    elif opcode == 0x6F:  # JAL
        imm = (((word >> 31) & 1) << 20) | (((word >> 12) & 0xFF) << 12) \
            | (((word >> 20) & 1) << 11) | (((word >> 21) & 0x3FF) << 1)
        if imm & 0x100000:
            imm -= 0x200000
        t = (pc + imm) & M32
        if t & 3:
            return pc, STOP_MISALIGNED_JUMP, t, 0
        wb = (pc + 4) & M32
        nxt = t
    elif opcode == 0x67:  # JALR
        if f3 != 0:
            return pc, STOP_ILLEGAL, word, 0
        imm = word >> 20
        if imm & 0x800:
            imm -= 0x1000
        t = (a + imm) & M32 & ~1
        if t & 3:
            return pc, STOP_MISALIGNED_JUMP, t, 0
        wb = (pc + 4) & M32
        nxt = t
    elif opcode == 0x0F:  # FENCE
        if f3 != 0:
            return pc, STOP_ILLEGAL, word, 0
        rd = 0
    elif opcode == 0x73:  # SYSTEM
        if f3 == 0 and rd == 0 and rs1 == 0 and (word >> 20) in (0, 1):
            halt = True
            rd = 0
        else:
            return pc, STOP_ILLEGAL, word, 0
    else:
        return pc, STOP_ILLEGAL, word, 0

    rd_written = 0
    if wb >= 0 and rd != 0:
        if plus_one:
            wb = (wb + 1) & M32
        regs[rd] = wb
        rd_written = rd
    return nxt, (STOP_HALT if halt else STOP_OK), 0, rd_written


def run_block(regs, mem, base, pc, retired, max_instrs,
              fault_mode, threshold, seed, mutation,
              wrongrd_mask, span, events):
    """Execute up to max_instrs instructions; see module docstring."""
    size = len(mem)
    n_mask = len(wrongrd_mask)
    mirror = len(span) > 0
    last_pc = 0
    last_raw = 0
    count = 0
    stop = STOP_OK
    detail = 0

    while count < max_instrs:
        off = pc - base
        if pc & 3 or off < 0 or off + 4 > size:
            stop, detail = STOP_OUT_OF_IMAGE, pc
            break
        word = mem[off] | (mem[off + 1] << 8) | (mem[off + 2] << 16) | (mem[off + 3] << 24)

        widx = off >> 2
        plus_one = widx < n_mask and wrongrd_mask[widx] != 0
        if fault_mode == 1:
            ordinal = retired + 1
            u = mix64((seed + ordinal * _GOLDEN) & M64)
            if (u >> 11) < threshold:
                if mutation == 0:
                    bit = mix64(u ^ _BITKEY) & 31
                    word ^= 1 << bit
                    if events is not None:
                        events.append((ordinal, 0, bit))
                else:
                    plus_one = True
                    if events is not None:
                        events.append((ordinal, 1, 0))

        nxt, stop, detail, rd_written = exec_word(regs, mem, base, pc, word, plus_one)
        if stop >= STOP_ILLEGAL:
            break
        if rd_written and mirror:
            span[rd_written] = regs[rd_written]
        retired += 1
        count += 1
        last_pc = pc
        last_raw = word
        pc = nxt
        if stop == STOP_HALT:
            break

    return pc, retired, last_pc, last_raw, count, stop, detail
