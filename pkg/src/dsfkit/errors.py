"""Exception hierarchy.

Two families matter to callers: :class:`ValidationError` for inputs that are
malformed or violate a precondition that can be checked up front, and
:class:`NumericalError` for computations that were attempted and failed.
The CLI maps them to exit codes 2 and 1.
"""


class DsfError(Exception):
    """Base class for every error raised by dsfkit."""


class ValidationError(DsfError, ValueError):
    """Input has the wrong shape, domain or structure."""


class NumericalError(DsfError, ArithmeticError):
    """A numerical procedure could not produce a trustworthy result."""


class ConjugateSplitError(ValidationError):
    """A selection separates the two eigenvalues of a complex-conjugate block."""

    def __init__(self, message, block_index):
        super().__init__(message)
        self.block_index = block_index


class ReorderError(NumericalError):
    """A Schur block swap was rejected as too ill-conditioned."""

    def __init__(self, message, block_index):
        super().__init__(message)
        self.block_index = block_index


class SingularSylvesterError(NumericalError):
    """The Sylvester operator ``X -> AX - XB`` is (numerically) singular."""


class PoleHitError(NumericalError):
    """Evaluation point coincides with a pole to working precision."""

    def __init__(self, message, lam, condition=None):
        super().__init__(message)
        self.lam = lam
        self.condition = condition


class RegularityError(ValidationError):
    """The output matrix does not have full row rank."""


class FeedthroughError(ValidationError):
    """A nonzero feedthrough term where the construction requires D = 0."""


class UnobservableError(NumericalError):
    """Pole placement impossible: some modes of (A12, A22) are unobservable."""

    def __init__(self, message, modes):
        super().__init__(message)
        self.modes = list(modes)


class PlacementError(NumericalError):
    """Pole placement did not reach the requested accuracy within the retry budget."""


class UnstableError(NumericalError):
    """A matrix required to be stable has eigenvalues outside the stability region."""

    def __init__(self, message, eigenvalues=()):
        super().__init__(message)
        self.eigenvalues = list(eigenvalues)


class DisconjugacyError(NumericalError):
    """No invariant subspace of the right dimension has an invertible top block."""

    def __init__(self, message, best_condition=float("inf"), residual=None):
        super().__init__(message)
        self.best_condition = best_condition
        self.residual = residual


class IllPosedError(NumericalError):
    """A feedback loop ``I - Q`` is singular as a rational matrix."""
