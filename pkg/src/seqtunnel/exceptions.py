"""Exception hierarchy shared by every stage of the pipeline."""


class SeqTunnelError(Exception):
    """Base class for all package errors."""


class GeometryError(SeqTunnelError, ValueError):
    pass


class OpenContour(GeometryError):
    pass


class FilletTooLarge(GeometryError):
    pass


class DensityTooLow(GeometryError):
    pass


class AboveGround(GeometryError):
    pass


class PoleHit(SeqTunnelError, ZeroDivisionError):
    pass


class ChargePointHit(PoleHit):
    pass


class DegenerateSpacing(SeqTunnelError, ValueError):
    pass


class SingularSystem(SeqTunnelError, ArithmeticError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class OutsideDomain(SeqTunnelError, ValueError):
    pass


class CoincidentJoints(SeqTunnelError, ValueError):
    pass


class BranchOverflow(SeqTunnelError, OverflowError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DecayFailure(SeqTunnelError, ArithmeticError):
    pass


class NonConvergence(SeqTunnelError, ArithmeticError):
    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class JointSingularity(SeqTunnelError, ValueError):
    pass


class ConformalitySingularity(SeqTunnelError, ZeroDivisionError):
    pass


class ConfigError(SeqTunnelError, ValueError):
    pass
