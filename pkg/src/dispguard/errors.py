"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of a formula (e.g. nonpositive depth)."""


class ContractError(ValueError):
    """Inputs violate a precondition of an operation."""


class NoOverlapError(ContractError):
    """Two disparity maps share no commonly valid pixel."""


class CalibrationError(ValueError):
    """Threshold calibration could not be performed."""


class ConfigError(ValueError):
    """Experiment configuration is malformed or inconsistent."""


class ParseError(ValueError):
    """A sensor data file could not be decoded.

    Parameters
    ----------
    message : str
        What went wrong.
    offset : int
        Byte offset in the file at which decoding failed.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset
