"""
Exception hierarchy for the irreducible-operator toolkit
"""


class ToolkitError(Exception):
    """Base class for every error raised by the toolkit"""


class InvalidMatrix(ToolkitError):
    """Input is not a finite square complex matrix"""


class ShapeMismatch(ToolkitError):
    """Operand shapes do not conform"""


class NotHermitian(ToolkitError):
    """Matrix is not self-adjoint within the Hermitian band"""


class SpectraOverlap(ToolkitError):
    """Spectra too close for the Sylvester equation to be uniquely solvable"""


class NotInAlgebra(ToolkitError):
    """Operator (or ambient algebra) violates the subalgebra requirements"""


class DegenerateCommutant(ToolkitError):
    """Commutant has dimension >= 2 but every Hermitian element is scalar"""


class DegenerateGap(ToolkitError):
    """Relabeled eigenvalues or injected block spectra are not separated"""


class CertificateFailed(ToolkitError):
    """Perturbation output failed its irreducibility or distance certificate"""


class InvalidConfig(ToolkitError):
    """Configuration file or environment override is malformed"""
