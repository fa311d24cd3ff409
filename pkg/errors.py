"""
Error types for the Dengue Diagnosis Toolkit
Every data/model failure maps to exit code 2 on the command line
"""
from typing import Any, Dict


class ToolkitError(Exception):
    """Base class for data and model errors"""

    exit_code = 2

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = dict(context)

    def add_context(self, key: str, value: Any) -> "ToolkitError":
        """Attach location info (file, line, fold, ...) and return self for re-raising"""
        self.context.setdefault(key, value)
        return self

    def __str__(self) -> str:
        if not self.context:
            return self.message
        where = ", ".join(f"{key}={value}" for key, value in self.context.items())
        return f"{self.message} [{where}]"


# === DATA ERRORS ===

class SchemaError(ToolkitError):
    """Schema sidecar is malformed or violates schema invariants"""


class MalformedRowError(ToolkitError):
    """CSV row has the wrong number of cells"""


class UnknownCategoryError(ToolkitError):
    """Nominal cell holds a label the schema does not list"""


class NonNumericCellError(ToolkitError):
    """Numeric cell does not parse as a number"""


class HeaderMismatchError(ToolkitError):
    """CSV header names do not match the schema names"""


class AllMissingColumnError(ToolkitError):
    """Numeric column has no observed value to average"""


class MissingCellError(ToolkitError):
    """A cell required to be present is missing"""


class AttrNotNumericError(ToolkitError):
    """Operation needs a numeric attribute"""


class LabelArityError(ToolkitError):
    """Discretization labels do not match the cutpoint count"""


class UnknownAttributeError(ToolkitError):
    """Attribute name is not part of the schema"""


class SchemaMismatchError(ToolkitError):
    """Instance or dataset does not match the model's schema"""


# === STATISTICS ERRORS ===

class DomainError(ToolkitError):
    """Argument outside the function's domain"""


class SeparationError(ToolkitError):
    """Logistic fit hit (quasi-)separation: information matrix is singular"""


class NotConvergedError(ToolkitError):
    """Wald test requested on a fit that did not converge"""


class ZeroExpectedCellError(ToolkitError):
    """Contingency table has an expected count of zero"""


# === LEARNER ERRORS ===

class SingleClassError(ToolkitError):
    """Training data holds only one class"""


class DegenerateSplitError(ToolkitError):
    """Split leaves a cell empty or produces a non-finite value"""


class EmptyDatasetError(ToolkitError):
    """Operation needs at least one instance"""


class TooFewInstancesError(ToolkitError):
    """Not enough instances for the requested folds"""


class LengthMismatchError(ToolkitError):
    """Parallel sequences have different lengths"""


class InvalidSpecError(ToolkitError):
    """Synthetic cohort specification is invalid"""


# === DOCUMENT / IO ERRORS ===

class ModelFormatError(ToolkitError):
    """Model or report document cannot be read"""


class ToolkitIOError(ToolkitError):
    """File could not be written"""
