# backend/src/errors.py

"""
Exception hierarchy shared by every pipeline stage.

Each error carries the process exit code the CLI reports for it:
0 success, 2 usage/config, 3 empty result, 4 calibration failure,
5 numeric failure.
"""


class GelSenseError(Exception):
    """Base class for all domain errors."""

    exit_code: int = 1


# --- Usage / configuration (exit 2) ---

class ConfigError(GelSenseError):
    exit_code = 2


class DimensionError(GelSenseError, ValueError):
    """Inputs whose grid dimensions do not line up."""

    exit_code = 2


class ParameterError(GelSenseError, ValueError):
    """A parameter outside its documented range."""

    exit_code = 2


class PunchThroughError(ParameterError):
    """Press depth reaches the gel base."""


# --- Empty result (exit 3) ---

class EmptyDatasetError(GelSenseError):
    exit_code = 3


# --- Calibration (exit 4) ---

class CalibrationError(GelSenseError):
    exit_code = 4


class GeometryError(CalibrationError):
    """Contact geometry that the sphere model cannot explain (over-press)."""


class EvaluationError(GelSenseError):
    exit_code = 4


# --- Numeric failures (exit 5) ---

class NumericError(GelSenseError, ArithmeticError):
    exit_code = 5


class TrainingError(NumericError):
    def __init__(self, message: str, epoch: int):
        super().__init__(message)
        self.epoch = epoch
