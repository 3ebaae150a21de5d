"""Exception types shared across the package."""


class MagnomechError(Exception):
    """Base class for all package errors."""


class NumericalDomainError(MagnomechError):
    """An evaluation produced non-finite values or left its valid domain."""


class DegenerateFormError(MagnomechError):
    """A bilinear form that must be invertible is singular at the point."""


class DegenerateConstraintError(MagnomechError):
    """Constraint rows are rank deficient at the evaluated point."""


class CompatibilityError(MagnomechError):
    """The constrained solve is ill posed (multiplier matrix singular)."""


class OffConstraintError(MagnomechError):
    """A phase point expected on the constraint surface is too far from it."""


class SectionImageError(MagnomechError):
    """A covector section does not take values in the constraint surface."""


class SectionTangentError(MagnomechError):
    """Tangent images of a section leave the admissible subspace."""


class ExpressionError(MagnomechError):
    """Parse or evaluation failure in the scenario expression language."""

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class ScenarioError(MagnomechError):
    """Invalid scenario document. Carries a stable code and a field path."""

    def __init__(self, code, message, field=None):
        self.code = code
        self.field = field
        prefix = f"[{code}]"
        if field:
            prefix += f" {field}:"
        super().__init__(f"{prefix} {message}")
