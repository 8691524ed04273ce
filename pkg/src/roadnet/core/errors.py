from __future__ import annotations

from dataclasses import dataclass

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class AppError(Exception):
    code: str
    message: str
    exit_code: int

    def __init__(self, code: str, message: str, exit_code: int = EXIT_RUNTIME) -> None:
        super().__init__(message)
        self.code = code
        self.message = message
        self.exit_code = exit_code


class ConfigError(AppError):
    def __init__(self, message: str = "Invalid configuration") -> None:
        super().__init__("config_error", message, EXIT_CONFIG)


class ParseError(AppError):
    def __init__(self, message: str = "Malformed input") -> None:
        super().__init__("parse_error", message)


class GraphValidationError(AppError):
    def __init__(self, message: str = "Invalid graph") -> None:
        super().__init__("graph_invalid", message)


class ShapeMismatchError(AppError):
    def __init__(self, message: str = "Shape mismatch") -> None:
        super().__init__("shape_mismatch", message)


class ContractViolationError(AppError):
    def __init__(self, message: str = "Proposer contract violated") -> None:
        super().__init__("contract_violation", message)


class DivergenceError(AppError):
    epoch: int

    def __init__(self, epoch: int) -> None:
        super().__init__("diverged", f"training loss is NaN at epoch {epoch}")
        self.epoch = epoch


class DegenerateInputError(AppError):
    def __init__(self, message: str = "Degenerate input") -> None:
        super().__init__("degenerate_input", message)


class EmptyBatchError(AppError):
    def __init__(self, message: str = "empty batch") -> None:
        super().__init__("empty_batch", message)


class NoCenterlineError(AppError):
    def __init__(self, message: str = "no centerline") -> None:
        super().__init__("no_centerline", message)


class ZeroLengthDirectionError(AppError):
    def __init__(self, message: str = "zero-length direction") -> None:
        super().__init__("zero_length_direction", message)


class OutOfExtentError(AppError):
    def __init__(self, message: str = "Coordinate outside extent") -> None:
        super().__init__("out_of_extent", message)


@dataclass(slots=True, frozen=True)
class ErrorPayload:
    error: str
    message: str
    run_id: str
