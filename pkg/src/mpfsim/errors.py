"""Exception types raised by the guidance library and simulator."""


class MpfError(Exception):
    """Base class for library errors."""


class RegularityViolation(MpfError):
    """The path derivative vanishes, so arc length cannot parameterize it."""


class AssumptionViolated(MpfError):
    """The vehicle is too slow to keep up with the moving path.

    ``step`` is set by the simulator to the index at which it happened.
    """

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class SingularSecondColumn(MpfError):
    """Steady-state direction is (anti)parallel to f3; w_d2 is undefined."""


class NonFiniteState(MpfError):
    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step
