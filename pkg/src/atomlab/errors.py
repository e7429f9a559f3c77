class SpecError(ValueError):
    """Malformed atom, configuration or ensemble input."""


class AtomTooLargeError(SpecError):
    pass


class InfeasibleConstraintError(ValueError):
    pass


class NonGraphicalError(InfeasibleConstraintError):
    pass


class NonConvergenceError(RuntimeError):
    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SeriesDivergenceError(ArithmeticError):
    pass


class SamplerExhaustedError(RuntimeError):
    def __init__(self, message, attempts=0, accepted=0):
        super().__init__(message)
        self.attempts = attempts
        self.accepted = accepted

    @property
    def acceptance_estimate(self):
        return self.accepted / self.attempts if self.attempts else 0.0
