"""Exception hierarchy shared across the framework."""


class FeriverError(Exception):
    """Base class for all framework errors."""


class SimDiagnostic(FeriverError):
    """Fatal simulator diagnostic: halts the run, never becomes a checkpoint."""


# --- instruction semantics ---------------------------------------------------

class IllegalInstruction(SimDiagnostic):
    def __init__(self, word):
        super().__init__(f"illegal instruction 0x{word & 0xFFFFFFFF:08x}")
        self.word = word & 0xFFFFFFFF


class MisalignedAccess(SimDiagnostic):
    def __init__(self, addr):
        super().__init__(f"misaligned access at 0x{addr & 0xFFFFFFFF:08x}")
        self.addr = addr & 0xFFFFFFFF


class MisalignedJump(SimDiagnostic):
    def __init__(self, target):
        super().__init__(f"misaligned jump target 0x{target & 0xFFFFFFFF:08x}")
        self.target = target & 0xFFFFFFFF


class OutOfImage(SimDiagnostic):
    def __init__(self, addr):
        super().__init__(f"access outside loaded image at 0x{addr & 0xFFFFFFFF:08x}")
        self.addr = addr & 0xFFFFFFFF


class ImmediateOutOfRange(FeriverError):
    pass


class InvalidField(FeriverError):
    pass


# --- workload images ---------------------------------------------------------

class ParseError(FeriverError):
    def __init__(self, line, reason):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class MisalignedDirective(FeriverError):
    pass


class EmptyImage(FeriverError):
    pass


# --- frame-readback channel --------------------------------------------------

class FieldOutOfRange(FeriverError):
    pass


class ReservedBitsSet(FeriverError):
    pass


class InvalidBlockType(FeriverError):
    pass


class EndOfRow(FeriverError):
    pass


class TooManyFrames(FeriverError):
    pass


class MissingFrame(FeriverError):
    pass


class MarkerNotFound(FeriverError):
    pass


class MarkerAmbiguous(FeriverError):
    pass


class LayoutOverflow(FeriverError):
    pass


class MarkerCheckFailed(FeriverError):
    pass


class LengthMismatch(FeriverError):
    pass


# --- arbiter -----------------------------------------------------------------

class OutOfOrderSubmission(FeriverError):
    pass


class DuplicateIndex(FeriverError):
    pass


class IncompleteRendezvous(FeriverError):
    pass


# --- reconstruction ----------------------------------------------------------

class SchemaViolation(FeriverError):
    pass


class NonReproducibleSession(FeriverError):
    pass


# --- time model --------------------------------------------------------------

class UncalibratedModel(FeriverError):
    pass
