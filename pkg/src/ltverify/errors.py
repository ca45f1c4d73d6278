"""Exception hierarchy shared by every layer of the engine."""


class LTError(Exception):
    """Base class for all errors raised by ltverify."""


class InvalidParams(LTError, ValueError):
    pass


class PrecisionBudgetTooSmall(InvalidParams):
    pass


class NonEisensteinPolynomial(LTError, ValueError):
    pass


class NotDivisible(LTError, ArithmeticError):
    """The quotient is not integral at the available precision."""


class PrecisionExhausted(LTError, ArithmeticError):
    """A division would leave no trusted p-adic digits."""


class PrecisionHorizon(LTError, ArithmeticError):
    """An element is zero at its known precision and cannot be certified zero."""


class NotIdempotent(LTError, ArithmeticError):
    pass


class NonClosedTable(LTError, ValueError):
    pass


class RelationInconsistent(LTError, ValueError):
    pass


class BaseMismatch(LTError, TypeError):
    pass


class DomainMismatch(LTError, TypeError):
    pass


class ConstantTermNotComposable(LTError, ArithmeticError):
    pass


class LinearCoefficientNotUnit(LTError, ArithmeticError):
    pass


class NotLacunary(LTError, ValueError):
    pass


class FrobeniusConditionUnverified(LTError, ArithmeticError):
    pass


class MembershipUncertifiable(LTError, ArithmeticError):
    pass


class InvalidConfig(LTError, ValueError):
    pass
