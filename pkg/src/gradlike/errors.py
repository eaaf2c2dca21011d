"""Exception hierarchy.

Two families matter to callers (and to the CLI exit codes): ``InputError``
for contract violations on the caller's side, ``NumericalError`` for
numerical breakdowns inside an otherwise valid computation.
"""


class GradlikeError(Exception):
    pass


class InputError(GradlikeError, ValueError):
    pass


class NumericalError(GradlikeError, ArithmeticError):
    pass


class NegativeOffDiagonal(InputError):
    def __init__(self, i, j, value=None):
        self.i, self.j = i, j
        msg = f"negative off-diagonal entry at ({i}, {j})"
        if value is not None:
            msg += f": {value!r}"
        super().__init__(msg)


class RowSumViolation(InputError):
    def __init__(self, i, total=None):
        self.i = i
        msg = f"row {i} does not sum to zero"
        if total is not None:
            msg += f" (sum={total!r})"
        super().__init__(msg)


class NotStochastic(InputError):
    pass


class NotInSimplex(InputError):
    pass


class NotIrreducible(InputError):
    pass


class NotReversible(InputError):
    pass


class BoundaryPoint(InputError):
    pass


class DomainViolation(InputError):
    pass


class AsymmetricMatrix(InputError):
    pass


class EpsilonTooLarge(InputError):
    pass


class SchemaError(InputError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class DimensionMismatch(InputError):
    pass


class UnknownKind(InputError):
    def __init__(self, kind, where="kind"):
        self.kind = kind
        super().__init__(f"unknown {where} {kind!r}")


class SingularSystem(NumericalError):
    pass


class DegenerateDenominator(NumericalError):
    pass


class DegenerateKernelRow(NumericalError):
    pass


class RowOverflow(NumericalError):
    pass


class StepsizeUnderflow(NumericalError):
    pass


class NotAnEquilibrium(NumericalError):
    pass


class EquilibriaNotHyperbolic(NumericalError):
    pass


class FormulaMismatch(NumericalError):
    """Two independent evaluation routes disagree beyond tolerance."""


AsymmetricU = AsymmetricMatrix
