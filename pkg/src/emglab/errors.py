class EmgLabError(Exception):
    pass


class DomainError(EmgLabError, ValueError):
    """Argument outside the domain of a density, loss or kernel."""


class ContractError(EmgLabError, ValueError):
    """Shapes or lengths of inputs do not conform."""


class DescentError(EmgLabError, RuntimeError):
    """The line search could not find a descent step."""

    def __init__(self, message, grad_norm):
        super().__init__(f"{message} (|grad| = {grad_norm:.3e})")
        self.grad_norm = grad_norm


class FitError(EmgLabError, RuntimeError):
    pass
