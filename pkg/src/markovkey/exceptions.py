"""Exception and warning types raised by markovkey."""


class MarkovKeyError(Exception):
    """Base class for all library errors."""


class InvalidProcess(MarkovKeyError, ValueError):
    """A process graph or matrix violates its structural invariants."""


class NonStochasticGraph(InvalidProcess):
    pass


class SelfLoopOnTerminal(InvalidProcess):
    pass


class InvalidSplit(InvalidProcess):
    pass


class NotLumpable(MarkovKeyError, ValueError):
    pass


class DegenerateNullSpace(MarkovKeyError, ArithmeticError):
    pass


class NonTerminating(MarkovKeyError, ArithmeticError):
    """The process has a positive probability of never being absorbed."""


class MultiplePoleDetected(MarkovKeyError, ArithmeticError):
    pass


class ResidualImaginary(MarkovKeyError, ArithmeticError):
    pass


class UnknownEdge(MarkovKeyError, KeyError):
    pass


class ZeroMass(MarkovKeyError, ValueError):
    pass


class GridTooLarge(MarkovKeyError, MemoryError):
    pass


class BadBlockForm(InvalidProcess):
    pass


class DegenerateDistill(MarkovKeyError, ArithmeticError):
    pass


class LambdaOutOfRange(MarkovKeyError, ValueError):
    pass


class NeverSecure(MarkovKeyError, ArithmeticError):
    pass


class NegativeMassWarning(RuntimeWarning):
    """Extracted probabilities went negative beyond round-off."""


class InsufficientSamples(RuntimeWarning):
    """Monte Carlo standard error exceeds 5% of the estimate."""


class FidelityCollapse(RuntimeWarning):
    """An intermediate fidelity fell below 1/2, where distillation stops helping."""
