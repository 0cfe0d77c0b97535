"""
Exception hierarchy for the Nambu flow toolkit
Library code raises these; only the command line turns them into exit codes
"""


class NambuFlowError(Exception):
    """Base class for every error raised by the toolkit"""


class BaseSpaceMismatchError(NambuFlowError):
    """Operands live over different base spaces"""


class ExpressionSyntaxError(NambuFlowError):
    """Malformed expression text"""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class GraphEncodingError(ExpressionSyntaxError):
    """Malformed graph-sum encoding"""


class FixtureFormatError(NambuFlowError):
    """A fixture file does not follow its documented layout"""


class ConfigurationError(NambuFlowError):
    """Inconsistent run configuration"""


class NotDivisibleError(NambuFlowError):
    """Exact division left a remainder"""


class NonHomogeneousError(NambuFlowError):
    """A polynomial mixes several homogeneity profiles"""


class DegreeOverflowError(NambuFlowError):
    """A multivector degree would exceed the dimension"""


class ArityMismatchError(NambuFlowError):
    """Vertex contents do not match the vertex out-degree"""


class InvalidPartitionError(NambuFlowError):
    """A letter partition does not split derivatives into full tuples"""


class NoSolutionError(NambuFlowError):
    """A linear system built from the flow has no solution"""

    def __init__(self, message, certificate=None):
        self.certificate = certificate
        super().__init__(message)


class NonUniqueSolutionError(NambuFlowError):
    """A linear system expected to be uniquely solvable has a kernel"""

    def __init__(self, message, kernel_dimension=0):
        self.kernel_dimension = kernel_dimension
        super().__init__(message)


class InconsistentComponentsError(NambuFlowError):
    """Bivector components give different quotients"""


class CollapseNotFoundError(NambuFlowError):
    """No marker combination reproduces a profile class"""


class SymmetryError(NambuFlowError):
    """A polynomial lacks the diagonal skew symmetry a decomposition needs"""
