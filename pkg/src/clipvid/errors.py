"""Exception types shared across the package."""


class ContractError(ValueError):
    """An input violated a documented precondition."""


class ShapeError(ContractError):
    """Array or matrix dimensions do not agree."""


class ParseError(ContractError):
    """A token sequence or serialized blob could not be decoded."""


class NumericError(RuntimeError):
    """A numeric routine produced non-finite values or failed to converge."""
