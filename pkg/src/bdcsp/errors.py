"""Exception types raised across the package."""


class BdcspError(Exception):
    """Base class for all errors raised by bdcsp."""


class EmptyAcceptance(BdcspError, ValueError):
    pass


class AsymmetricWeights(BdcspError, ValueError):
    pass


class ArityMismatch(BdcspError, ValueError):
    pass


class IndivisibleStubs(BdcspError, ValueError):
    pass


class BudgetExceeded(BdcspError, RuntimeError):
    pass


class NotSuperset(BdcspError, ValueError):
    pass


class ArityNot2(BdcspError, ValueError):
    pass


class TooLarge(BdcspError, ValueError):
    pass


class IndexOutOfRange(BdcspError, IndexError):
    pass


class StrategyOverBudget(BdcspError, RuntimeError):
    pass


class SupportMismatch(BdcspError, ValueError):
    pass


class ZeroNormalizer(BdcspError, ZeroDivisionError):
    pass


class WrongPredicate(BdcspError, ValueError):
    pass


class UnknownRecipe(BdcspError, KeyError):
    pass
