"""Exceptions shared by the certification and closed-solution modules."""


class PreconditionError(ValueError):
    """Inputs violate an operation's contract (e.g. an unordered bracket)."""


class NotApplicableError(ValueError):
    """A hypothesis needed to even state the result does not hold."""


class BracketInvalid(RuntimeError):
    """Endpoint displacements do not have the signs a certificate promised."""

    def __init__(self, message, certificate=None, displacements=None):
        super().__init__(message)
        self.certificate = certificate
        self.displacements = displacements


class MaxIterExceeded(RuntimeError):
    pass


class BlowUpInsideBracket(RuntimeError):
    def __init__(self, gamma, t_escape):
        super().__init__(f"solution from gamma={gamma!r} escapes at t={t_escape!r}")
        self.gamma = gamma
        self.t_escape = t_escape
